"""CTC best-path decoding and confidence voting over model ensembles.

Recognition engines are external processes (see ``ocrflow.engines``)
returning either a per-column probability matrix, decoded here, or an
already decoded text with character confidences. Applying several
models triggers confidence voting: the outputs are aligned slot by slot
and the candidate with the greatest summed confidence wins.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ocrflow import evaluate, kernels
from ocrflow.pagexml import GT_KEY


class ProtocolError(Exception):
    pass


@dataclass
class Alphabet:
    labels: list  # unicode strings; blank at index 0
    blank_index: int = 0

    def __post_init__(self):
        if self.blank_index != 0:
            raise ValueError("blank label must sit at index 0")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("alphabet labels must be unique")


@dataclass
class ProbabilityMatrix:
    values: np.ndarray  # (T, L) probabilities
    downsample_factor: int = 4

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def L(self):
        return self.values.shape[1]

    def validate(self, line_width=None):
        v = self.values
        if v.ndim != 2:
            raise ProtocolError("matrix must be two-dimensional")
        if np.any(v < 0) or np.any(v > 1):
            raise ProtocolError("matrix values outside [0,1]")
        sums = v.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > 1e-4)[0]
        if len(bad):
            raise ProtocolError(
                f"matrix row {bad[0]} sums to {sums[bad[0]]:.6f}, expected 1"
            )
        if line_width is not None:
            expected = line_width // self.downsample_factor
            if self.T != expected:
                raise ProtocolError(
                    f"matrix has {self.T} columns, expected "
                    f"{line_width}//{self.downsample_factor} = {expected}"
                )


@dataclass
class CharPrediction:
    glyph: str
    confidence: float
    pixel_start: int
    pixel_end: int
    alternatives: list = field(default_factory=list)  # [(glyph, confidence)]


@dataclass
class LinePrediction:
    text: str
    chars: list
    model_id: str

    def to_json(self):
        return {
            "text": self.text,
            "model_id": self.model_id,
            "chars": [
                {
                    "g": c.glyph,
                    "c": c.confidence,
                    "x0": c.pixel_start,
                    "x1": c.pixel_end,
                    "alts": [[g, conf] for g, conf in c.alternatives],
                }
                for c in self.chars
            ],
        }


@dataclass
class EnsembleResult:
    voted: LinePrediction
    voters: list


def ctc_best_path_decode(matrix, alphabet, top_k=5):
    """Greedy decode: per-column argmax, collapse repeats, drop blanks.

    Each emitted character carries the maximal probability over its run
    as confidence, the run extent scaled by the downsample factor as
    pixel positions, and the top-k column distribution at the run's
    peak column as alternatives.
    """
    if matrix.L != len(alphabet.labels):
        raise ValueError(
            f"matrix width {matrix.L} != alphabet size {len(alphabet.labels)}"
        )
    argmaxes = np.argmax(matrix.values, axis=1)
    runs = kernels.collapse_argmax(argmaxes, alphabet.blank_index)
    chars = []
    for label, start, end in runs:
        probs = matrix.values[start:end, label]
        peak = start + int(np.argmax(probs))
        column = matrix.values[peak]
        order = np.argsort(-column, kind="stable")[:top_k]
        alternatives = [
            (alphabet.labels[i], float(column[i]))
            for i in order
            if i != alphabet.blank_index
        ]
        chars.append(
            CharPrediction(
                glyph=alphabet.labels[label],
                confidence=float(probs.max()),
                pixel_start=start * matrix.downsample_factor,
                pixel_end=end * matrix.downsample_factor,
                alternatives=alternatives,
            )
        )
    return LinePrediction("".join(c.glyph for c in chars), chars, model_id="")


def vote_slot(candidates):
    """Winner of one aligned slot.

    Candidates are (glyph_or_None, confidence, voter_index); None means
    the voter proposes a gap. Returns (glyph_or_None, summed_confidence,
    winning_voter_indices) for the candidate value with the greatest
    summed confidence, ties broken by earliest proposing voter.
    """
    groups = {}
    for glyph, conf, voter in candidates:
        entry = groups.setdefault(glyph, [0.0, voter, []])
        entry[0] += conf
        entry[1] = min(entry[1], voter)
        entry[2].append(voter)
    winner = min(groups.items(), key=lambda kv: (-kv[1][0], kv[1][1]))
    glyph, (total, _, voters) = winner
    ranked = sorted(
        ((g, e[0]) for g, e in groups.items() if g != glyph),
        key=lambda t: -t[1],
    )
    return glyph, total, voters, ranked


def _gap_confidence(pred, position):
    """Confidence a voter assigns to proposing a gap near `position`."""
    if not pred.chars:
        return 0.5
    local = pred.chars[min(max(position, 0), len(pred.chars) - 1)]
    return 1.0 - local.confidence


def confidence_vote(preds):
    """Combine voter predictions into one result.

    All texts are aligned to the first prediction; at every aligned slot
    the glyph (or gap) with the greatest summed confidence wins. The
    voted confidence of an emitted character is the winning sum divided
    by the number of voters.
    """
    if not preds:
        raise ValueError("no predictions to vote over")
    if len(preds) == 1:
        return EnsembleResult(preds[0], list(preds))

    ref = preds[0]
    n_ref = len(ref.chars)
    # proposals[slot] = list of (glyph_or_None, confidence, voter)
    # slot keys: ("r", i) for ref positions, ("i", i, k) for the k-th
    # insertion before ref position i
    proposals = {}
    voter_pos = {}  # (slot, voter) -> voter char index, for gap scoring

    for voter_idx, pred in enumerate(preds):
        if voter_idx == 0:
            ops = [(c.glyph, c.glyph) for c in ref.chars]
        else:
            ops = evaluate.align(ref.text, pred.text)
        ri = vi = 0
        ins_count = 0
        for g, o in ops:
            if g and o:
                conf = pred.chars[vi].confidence if vi < len(pred.chars) else 0.0
                proposals.setdefault(("r", ri), []).append((o, conf, voter_idx, vi))
                ri += 1
                vi += 1
                ins_count = 0
            elif g:
                gap_conf = _gap_confidence(pred, vi)
                proposals.setdefault(("r", ri), []).append(
                    (None, gap_conf, voter_idx, vi)
                )
                ri += 1
                ins_count = 0
            else:
                conf = pred.chars[vi].confidence if vi < len(pred.chars) else 0.0
                proposals.setdefault(("i", ri, ins_count), []).append(
                    (o, conf, voter_idx, vi)
                )
                vi += 1
                ins_count += 1
        voter_pos[voter_idx] = None  # filled per-slot below

    slot_order = []
    max_ins = {}
    for key in proposals:
        if key[0] == "i":
            max_ins[key[1]] = max(max_ins.get(key[1], -1), key[2])
    for ri in range(n_ref + 1):
        for k in range(max_ins.get(ri, -1) + 1):
            slot_order.append(("i", ri, k))
        if ri < n_ref:
            slot_order.append(("r", ri))

    # track each voter's local char index while sweeping the slots so
    # implicit gaps can be scored against the right character
    local_index = [0] * len(preds)
    chars = []
    for slot in slot_order:
        slot_props = proposals.get(slot, [])
        present = {p[2] for p in slot_props}
        candidates = [(g, c, v) for g, c, v, _ in slot_props]
        for voter_idx, pred in enumerate(preds):
            if voter_idx not in present:
                candidates.append(
                    (None, _gap_confidence(pred, local_index[voter_idx]), voter_idx)
                )
        for _, _, v, vi in slot_props:
            local_index[v] = vi
        glyph, total, voters, ranked = vote_slot(candidates)
        if glyph is None:
            continue
        source = None
        for g, _, v, vi in slot_props:
            if g == glyph and v in voters:
                if source is None or v < source[0]:
                    source = (v, vi)
        src_char = preds[source[0]].chars[source[1]]
        chars.append(
            CharPrediction(
                glyph=glyph,
                confidence=total / len(preds),
                pixel_start=src_char.pixel_start,
                pixel_end=src_char.pixel_end,
                alternatives=[(g, s / len(preds)) for g, s in ranked if g is not None],
            )
        )

    # enforce monotone pixel ranges across mixed source voters
    last = 0
    for c in chars:
        if c.pixel_start < last:
            c.pixel_start = last
        if c.pixel_end < c.pixel_start:
            c.pixel_end = c.pixel_start
        last = c.pixel_start
    voted = LinePrediction(
        "".join(c.glyph for c in chars),
        chars,
        model_id="+".join(p.model_id for p in preds),
    )
    return EnsembleResult(voted, list(preds))


def ensemble_key(model_ids):
    return "+".join(model_ids)


def recognize_page(page, model_ids, run_model, sidecar_path=None):
    """Recognize every line of a page with one or more models.

    `run_model(model_id, line) -> LinePrediction` abstracts the engine
    invocation (see ocrflow.engines.recognize_lines). Voted or single
    results are written as OCR variants on the lines; the full
    prediction records land in the JSON sidecar when a path is given.
    Per-line engine errors are recorded and processing continues.
    """
    records = {}
    errors = {}
    key = ensemble_key(model_ids)
    for region in page.regions_in_reading_order():
        for line in region.lines:
            voters = []
            for model_id in model_ids:
                try:
                    pred = run_model(model_id, line)
                except Exception as e:  # engine failure: isolate the line
                    errors.setdefault(line.id, []).append(f"{model_id}: {e}")
                    continue
                voters.append(pred)
            if not voters:
                continue
            result = confidence_vote(voters)
            line.texts.pop(key, None)
            line.set_ocr(key, result.voted.text)
            records[line.id] = {
                "voted": result.voted.to_json(),
                "voters": [v.to_json() for v in result.voters],
            }
    if sidecar_path is not None:
        sidecar_path.write_text(
            json.dumps({"lines": records, "errors": errors}, ensure_ascii=False, indent=2)
        )
    return records, errors
