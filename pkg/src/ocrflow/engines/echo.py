"""Deterministic test engine speaking the recognizer plugin protocol.

Replies come from a fixture JSON file mapping line ids to texts:

    {"default": "lorem", "lines": {"p0001_r0001_l001": "ipsum"},
     "alphabet": ["a", "b", ...]}

In text mode the fixture text is returned with synthetic confidences
and pixel positions; in matrix mode a one-hot probability matrix whose
best path decodes to the fixture text is emitted, honoring the
width/4 column contract of the recognizer output shape.
"""

import argparse
import base64
import io
import json
import sys

from PIL import Image


def build_matrix(text, labels, t):
    blank = [0.0] * len(labels)
    blank[0] = 1.0
    columns = []
    index = {g: i for i, g in enumerate(labels)}
    chars = [c for c in text if c in index]
    if not chars:
        return [list(blank) for _ in range(t)]
    # one blank column between characters so repeats survive collapse
    needed = 2 * len(chars)
    chars = chars[: max(1, t // 2)] if needed > t else chars
    per_char = max(1, t // (2 * max(1, len(chars))))
    for c in chars:
        col = [0.0] * len(labels)
        col[index[c]] = 1.0
        columns.extend([list(col)] * per_char)
        columns.extend([list(blank)] * per_char)
    while len(columns) < t:
        columns.append(list(blank))
    return columns[:t]


def text_reply(text, width):
    chars = []
    n = max(1, len(text))
    for i, g in enumerate(text):
        x0 = int(i * width / n)
        x1 = int((i + 1) * width / n)
        chars.append({"g": g, "c": 0.95, "x0": x0, "x1": x1, "alts": [[g, 0.95]]})
    return text, chars


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--fixture", required=True)
    parser.add_argument("--bad-rows", action="store_true", help="emit invalid row sums")
    args = parser.parse_args()
    with open(args.fixture, encoding="utf-8") as f:
        fixture = json.load(f)
    default = fixture.get("default", "")
    lines = fixture.get("lines", {})
    labels = fixture.get("alphabet")
    if labels is None:
        glyphs = sorted({c for t in [default, *lines.values()] for c in t})
        labels = ["", *glyphs]

    for raw in sys.stdin:
        raw = raw.strip()
        if not raw:
            continue
        req = json.loads(raw)
        img = Image.open(io.BytesIO(base64.b64decode(req["image"])))
        width = img.size[0]
        text = lines.get(req["id"], default)
        if req.get("want") == "matrix":
            rows = build_matrix(text, labels, max(1, width // 4))
            if args.bad_rows:
                rows = [[v * 0.8 for v in row] for row in rows]
            reply = {"id": req["id"], "matrix": {"labels": labels, "rows": rows}}
        else:
            text_out, chars = text_reply(text, width)
            reply = {"id": req["id"], "text": text_out, "chars": chars}
        sys.stdout.write(json.dumps(reply, ensure_ascii=False) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
