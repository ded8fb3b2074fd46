import itertools

import numpy as np
import pytest

from ocrflow.pagexml import Polygon, Region, TextLine, Page
from ocrflow.recognize import (
    Alphabet,
    CharPrediction,
    LinePrediction,
    ProbabilityMatrix,
    ProtocolError,
    confidence_vote,
    ctc_best_path_decode,
    ensemble_key,
    recognize_page,
    vote_slot,
)


def _random_matrix(rng, t, l):
    values = rng.dirichlet(np.ones(l), size=t)
    return ProbabilityMatrix(values)


def _decode_oracle(values, labels, blank=0):
    argmaxes = np.argmax(values, axis=1)
    out = []
    for label, _ in itertools.groupby(argmaxes):
        if label != blank:
            out.append(labels[label])
    return "".join(out)


def test_alphabet_invariants():
    Alphabet(["", "a", "b"])
    with pytest.raises(ValueError):
        Alphabet(["", "a", "a"])
    with pytest.raises(ValueError):
        Alphabet(["", "a"], blank_index=1)


def test_decode_simple_matrix():
    labels = ["", "a", "b"]
    values = np.array(
        [
            [0.1, 0.8, 0.1],
            [0.1, 0.8, 0.1],  # repeat of 'a' collapses
            [0.9, 0.05, 0.05],  # blank
            [0.1, 0.7, 0.2],  # 'a' again after blank
            [0.2, 0.1, 0.7],  # 'b'
        ]
    )
    pred = ctc_best_path_decode(ProbabilityMatrix(values), Alphabet(labels))
    assert pred.text == "aab"
    first = pred.chars[0]
    assert first.confidence == 0.8
    assert (first.pixel_start, first.pixel_end) == (0, 8)  # 2 columns * factor 4
    assert pred.chars[1].pixel_start == 12
    assert all(g != "" for g, _ in first.alternatives)  # blank never offered


def test_decode_matches_collapse_oracle():
    rng = np.random.default_rng(31337)
    for _ in range(1000):
        t = int(rng.integers(1, 21))
        l = int(rng.integers(2, 9))
        labels = ["", *"abcdefg"[: l - 1]]
        matrix = _random_matrix(rng, t, l)
        pred = ctc_best_path_decode(matrix, Alphabet(labels))
        assert pred.text == _decode_oracle(matrix.values, labels)


def test_decode_rejects_alphabet_mismatch():
    matrix = ProbabilityMatrix(np.full((4, 3), 1 / 3))
    with pytest.raises(ValueError):
        ctc_best_path_decode(matrix, Alphabet(["", "a"]))


def test_matrix_shape_contract():
    values = np.full((10, 3), 1 / 3)
    matrix = ProbabilityMatrix(values)
    matrix.validate(line_width=40)  # 40 // 4 == 10 columns
    with pytest.raises(ProtocolError):
        matrix.validate(line_width=48)


def test_matrix_row_sums_are_checked():
    bad = ProbabilityMatrix(np.full((4, 3), 1 / 3) * 0.8)
    with pytest.raises(ProtocolError) as e:
        bad.validate()
    assert "sums" in str(e.value)
    with pytest.raises(ProtocolError):
        ProbabilityMatrix(np.array([[1.2, -0.2]])).validate()


def _pred(text, confs=None, model="m"):
    confs = confs or [0.9] * len(text)
    chars = [
        CharPrediction(g, c, i * 4, (i + 1) * 4) for i, (g, c) in enumerate(zip(text, confs))
    ]
    return LinePrediction(text, chars, model_id=model)


def test_vote_identity_single_voter():
    p = _pred("abc")
    result = confidence_vote([p])
    assert result.voted is p


def test_vote_identity_identical_voters():
    preds = [_pred("abc", model=f"m{i}") for i in range(3)]
    result = confidence_vote(preds)
    assert result.voted.text == "abc"
    assert result.voted.model_id == "m0+m1+m2"
    assert all(abs(c.confidence - 0.9) < 1e-9 for c in result.voted.chars)


def test_vote_majority_wins_at_equal_confidence():
    preds = [
        _pred("abc", model="m0"),
        _pred("axc", model="m1"),
        _pred("abc", model="m2"),
    ]
    assert confidence_vote(preds).voted.text == "abc"


def test_vote_confidence_outvotes_majority():
    preds = [
        _pred("ab", [0.9, 0.99], model="m0"),
        _pred("ax", [0.9, 0.3], model="m1"),
        _pred("ax", [0.9, 0.3], model="m2"),
    ]
    assert confidence_vote(preds).voted.text == "ab"


def test_vote_insertion_and_deletion():
    # two voters think there is an extra glyph, one disagrees
    preds = [
        _pred("ac", [0.6, 0.6], model="m0"),
        _pred("abc", [0.9, 0.9, 0.9], model="m1"),
        _pred("abc", [0.9, 0.9, 0.9], model="m2"),
    ]
    assert confidence_vote(preds).voted.text == "abc"
    # symmetric case: deletion wins when the gap is more confident
    preds = [
        _pred("abc", [0.9, 0.05, 0.9], model="m0"),
        _pred("ac", [0.95, 0.95], model="m1"),
        _pred("ac", [0.95, 0.95], model="m2"),
    ]
    assert confidence_vote(preds).voted.text == "ac"


def test_vote_tie_breaks_to_earliest_voter():
    glyph, total, voters, ranked = vote_slot(
        [("x", 0.5, 1), ("y", 0.5, 0), ("x", 0.0, 2)]
    )
    assert glyph == "y"  # equal sums, voter 0 proposed y first
    assert total == 0.5


def _vote_slot_oracle(candidates):
    sums = {}
    first = {}
    for g, c, v in candidates:
        sums[g] = sums.get(g, 0.0) + c
        first[g] = min(first.get(g, v), v)
    return min(sums, key=lambda g: (-sums[g], first[g]))


def test_vote_slot_dominance_matches_brute_force():
    rng = np.random.default_rng(4242)
    glyphs = ["a", "b", "c", None]
    for _ in range(1500):
        n_voters = int(rng.integers(1, 6))
        candidates = [
            (glyphs[rng.integers(0, 4)], float(rng.integers(0, 101)) / 100, v)
            for v in range(n_voters)
        ]
        glyph, total, voters, _ = vote_slot(candidates)
        assert glyph == _vote_slot_oracle(candidates)
        expected = sum(c for g, c, _ in candidates if g == glyph)
        assert abs(total - expected) < 1e-9


def test_vote_pixel_ranges_are_monotone():
    preds = [
        _pred("abcd", model="m0"),
        _pred("axcd", model="m1"),
        _pred("abyd", model="m2"),
    ]
    voted = confidence_vote(preds).voted
    starts = [c.pixel_start for c in voted.chars]
    assert starts == sorted(starts)
    assert all(c.pixel_end >= c.pixel_start for c in voted.chars)


def test_vote_rejects_empty_ensemble():
    with pytest.raises(ValueError):
        confidence_vote([])


def test_ensemble_key():
    assert ensemble_key(["a", "b"]) == "a+b"


def _page_with_lines(n):
    region = Region(
        id="r0001",
        polygon=Polygon([(0, 0), (100, 0), (100, 100), (0, 100)]),
        lines=[
            TextLine(f"r0001_l{i:03d}", Polygon([(0, 0), (10, 0), (10, 10), (0, 10)]))
            for i in range(1, n + 1)
        ],
    )
    return Page(id="p", width=100, height=100, regions=[region])


def test_recognize_page_writes_variants_and_sidecar(tmp_path):
    page = _page_with_lines(2)

    def run_model(model_id, line):
        return _pred("ok", model=model_id)

    records, errors = recognize_page(
        page, ["m0", "m1"], run_model, sidecar_path=tmp_path / "p.pred.json"
    )
    assert errors == {}
    for region in page.regions:
        for line in region.lines:
            assert line.texts["m0+m1"].text == "ok"
    assert set(records) == {"r0001_l001", "r0001_l002"}
    import json

    sidecar = json.loads((tmp_path / "p.pred.json").read_text())
    assert set(sidecar["lines"]) == set(records)
    assert sidecar["lines"]["r0001_l001"]["voted"]["text"] == "ok"
    assert len(sidecar["lines"]["r0001_l001"]["voters"]) == 2


def test_recognize_page_isolates_failing_lines():
    page = _page_with_lines(3)
    calls = []

    def run_model(model_id, line):
        calls.append(line.id)
        if line.id.endswith("l002"):
            raise RuntimeError("engine crashed")
        return _pred("ok", model=model_id)

    records, errors = recognize_page(page, ["m0"], run_model)
    assert set(records) == {"r0001_l001", "r0001_l003"}
    assert "r0001_l002" in errors and "engine crashed" in errors["r0001_l002"][0]
    # the failing line kept whatever text state it had (none)
    _, line = page.line("r0001_l002")
    assert line.texts == {}


def test_recognize_page_preserves_gt():
    page = _page_with_lines(1)
    _, line = page.line("r0001_l001")
    line.set_gt("truth")

    records, errors = recognize_page(page, ["m0"], lambda m, l: _pred("ocr", model=m))
    assert line.gt == "truth"
    assert line.best_text == "truth"
    assert line.texts["m0"].text == "ocr"
