"""Recognizer plugin protocol: stdio JSON, one object per line.

A model is a directory under the models root containing an
``engine.json`` describing how to start the engine process:

    {"cmd": ["python3", "-m", "ocrflow.engines.echo", ...],
     "mode": "matrix" | "text"}

Requests are written to the engine's stdin, one JSON object per line:
``{"id": str, "image": "<base64 PNG>", "want": "matrix"|"text"}``; the
engine answers on stdout with either
``{"id": str, "matrix": {"labels": [...], "rows": [[...]]}}`` or
``{"id": str, "text": str, "chars": [{"g","c","x0","x1","alts"}]}``.
Replies are validated before anything reaches the page model.
"""

import base64
import io
import json
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ocrflow.recognize import (
    Alphabet,
    CharPrediction,
    LinePrediction,
    ProbabilityMatrix,
    ProtocolError,
    ctc_best_path_decode,
)


class RecognizerError(Exception):
    pass


@dataclass
class EngineSpec:
    model_id: str
    cmd: list
    mode: str  # "matrix" | "text"


class ModelRegistry:
    def __init__(self, models_root):
        self.root = Path(models_root)

    def list(self):
        names = []
        if self.root.is_dir():
            for child in sorted(self.root.iterdir()):
                if (child / "engine.json").is_file():
                    names.append(child.name)
        return names

    def get(self, model_id):
        spec_path = self.root / model_id / "engine.json"
        if not spec_path.is_file():
            raise RecognizerError(f"model not found: {model_id!r}")
        data = json.loads(spec_path.read_text())
        cmd = [arg.replace("{model_dir}", str(self.root / model_id)) for arg in data["cmd"]]
        return EngineSpec(model_id, cmd, data.get("mode", "text"))


def image_to_png_b64(img):
    """Encode a GrayImage or BinaryImage crop as base64 PNG."""
    arr = getattr(img, "bits", None)
    if arr is not None:
        data = np.where(arr > 0, 0, 255).astype(np.uint8)
    else:
        data = np.clip(np.round(img.samples * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class EngineProcess:
    """One running engine; sequential request/reply over stdio."""

    def __init__(self, spec, timeout=60.0):
        self.spec = spec
        self.timeout = timeout
        self.proc = subprocess.Popen(
            spec.cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )

    def request(self, line_id, image_b64, want):
        req = json.dumps({"id": line_id, "image": image_b64, "want": want})
        try:
            self.proc.stdin.write(req + "\n")
            self.proc.stdin.flush()
            reply = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as e:
            raise RecognizerError(self._crash_message(str(e)))
        if not reply:
            raise RecognizerError(self._crash_message("no reply"))
        try:
            payload = json.loads(reply)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"engine {self.spec.model_id}: invalid JSON reply: {e}")
        if payload.get("id") != line_id:
            raise ProtocolError(
                f"engine {self.spec.model_id}: reply id {payload.get('id')!r} "
                f"does not match request {line_id!r}"
            )
        return payload

    def _crash_message(self, reason):
        stderr = ""
        try:
            self.proc.kill()
            _, stderr = self.proc.communicate(timeout=5)
        except Exception:
            pass
        return f"engine {self.spec.model_id} failed ({reason}); stderr: {stderr.strip()}"

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
                self.proc.wait(timeout=5)
            except Exception:
                self.proc.kill()


def parse_matrix_reply(payload, line_width=None, downsample_factor=4):
    body = payload.get("matrix")
    if not isinstance(body, dict):
        raise ProtocolError("reply lacks a matrix object")
    labels = body.get("labels")
    rows = body.get("rows")
    if not labels or rows is None:
        raise ProtocolError("matrix reply lacks labels or rows")
    matrix = ProbabilityMatrix(
        np.asarray(rows, dtype=np.float64), downsample_factor=downsample_factor
    )
    matrix.validate(line_width=line_width)
    if matrix.L != len(labels):
        raise ProtocolError("matrix column count does not match labels")
    return matrix, Alphabet(list(labels))


def parse_text_reply(payload, model_id):
    text = payload.get("text")
    if text is None:
        raise ProtocolError("reply lacks text")
    chars = []
    for c in payload.get("chars", []):
        conf = float(c["c"])
        if not 0.0 <= conf <= 1.0:
            raise ProtocolError(f"character confidence {conf} outside [0,1]")
        chars.append(
            CharPrediction(
                glyph=c["g"],
                confidence=conf,
                pixel_start=int(c["x0"]),
                pixel_end=int(c["x1"]),
                alternatives=[(g, float(s)) for g, s in c.get("alts", [])],
            )
        )
    if chars and "".join(c.glyph for c in chars) != text:
        raise ProtocolError("concatenated glyphs do not match reply text")
    return LinePrediction(text, chars, model_id=model_id)


class LineRecognizer:
    """Runs registered models over line images, one process per model."""

    def __init__(self, registry, timeout=60.0):
        self.registry = registry
        self.timeout = timeout
        self._procs = {}

    def _proc(self, model_id):
        if model_id not in self._procs:
            self._procs[model_id] = EngineProcess(
                self.registry.get(model_id), self.timeout
            )
        return self._procs[model_id]

    def recognize(self, model_id, line_id, line_image):
        spec = self.registry.get(model_id)
        want = "matrix" if spec.mode == "matrix" else "text"
        b64 = image_to_png_b64(line_image)
        payload = self._proc(model_id).request(line_id, b64, want)
        if want == "matrix":
            width = (
                line_image.bits.shape[1]
                if hasattr(line_image, "bits")
                else line_image.samples.shape[1]
            )
            matrix, alphabet = parse_matrix_reply(payload, line_width=width)
            pred = ctc_best_path_decode(matrix, alphabet)
            pred.model_id = model_id
            return pred
        return parse_text_reply(payload, model_id)

    def close(self):
        for proc in self._procs.values():
            proc.close()
        self._procs.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
