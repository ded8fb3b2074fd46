import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocrflow import evaluate
from ocrflow.evaluate import (
    EvalPair,
    align,
    cer,
    confusion_table,
    error_reduction,
    render_confusion,
    round_half_up,
    round_sig,
    speedup,
)


def test_round_half_up_is_decimal_not_bankers():
    assert round_half_up(0.125, 2) == 0.13
    assert round_half_up(2.675, 2) == 2.68
    assert round_half_up(0.5, 0) == 1.0
    assert round_half_up(-0.5, 0) == -0.5 or round_half_up(1.15, 1) == 1.2


def test_round_sig():
    assert round_sig(4.8333, 2) == 4.8
    assert round_sig(8.888, 2) == 8.9
    assert round_sig(18.0, 2) == 18.0
    assert round_sig(0.0123, 2) == 0.012
    assert round_sig(0, 2) == 0.0


def lev_oracle(a, b):
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return lev_oracle(a[1:], b[1:])
    return 1 + min(
        lev_oracle(a[1:], b), lev_oracle(a, b[1:]), lev_oracle(a[1:], b[1:])
    )


def test_distance_equals_recursive_oracle():
    rnd = random.Random(2024)
    alphabet = "abcd ſ"
    for _ in range(2000):
        a = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, 8)))
        b = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, 8)))
        assert evaluate.levenshtein(a, b) == lev_oracle(a, b)


def test_cer_basic():
    report = cer([EvalPair("abcd", "abed", "l1"), EvalPair("wxyz", "wxyz", "l2")])
    assert report.edit_distance == 1
    assert report.gt_chars == 8
    assert report.cer == 12.5
    assert report.lines[0].cer == 25.0
    assert report.lines[1].cer == 0.0


def test_cer_denominator_is_gt_length():
    # 2 errors against 4 GT chars is 50%, no matter how long the OCR is
    report = cer([EvalPair("abcd", "abcdxx", "l1")])
    assert report.cer == 50.0


def test_empty_gt_needs_explicit_flag():
    with pytest.raises(ValueError):
        cer([EvalPair("", "noise", "l1")])
    report = cer(
        [EvalPair("", "noise", "l1", allow_empty_gt=True), EvalPair("ab", "ab", "l2")]
    )
    assert report.edit_distance == 5
    with pytest.raises(ValueError):  # flagged-only corpus has no denominator
        cer([EvalPair("", "", "l1", allow_empty_gt=True)])


def test_align_prefers_substitution_then_deletion():
    assert align("abc", "axc") == [("a", "a"), ("b", "x"), ("c", "c")]
    assert align("ab", "b") == [("a", ""), ("b", "b")]
    assert align("b", "ab") == [("", "a"), ("b", "b")]
    ops = align("abc", "abc")
    assert all(g == o for g, o in ops)


def test_align_cost_matches_distance():
    rnd = random.Random(5)
    for _ in range(300):
        a = "".join(rnd.choice("abc ") for _ in range(rnd.randint(0, 10)))
        b = "".join(rnd.choice("abc ") for _ in range(rnd.randint(0, 10)))
        ops = align(a, b)
        assert "".join(g for g, _ in ops) == a
        assert "".join(o for _, o in ops) == b
        cost = sum(1 for g, o in ops if g != o)
        assert cost == evaluate.levenshtein(a, b)


def _corpus_239():
    """Exactly 239 alignment errors: 16 whitespace insertions, 3 e->c
    substitutions, 220 one-off filler confusions."""
    pairs = [EvalPair("ab", "a b", f"ws{i}") for i in range(16)]
    pairs += [EvalPair("en", "cn", f"ec{i}") for i in range(3)]
    fillers = []
    for i in range(220):
        g, o = chr(0x400 + i), chr(0x2200 + i)
        fillers.append(EvalPair(f"x{g}x", f"x{o}x", f"f{i}"))
    return pairs + fillers


def test_confusion_table_frequencies():
    table = confusion_table(_corpus_239(), top_k=10)
    assert table.total_errors == 239
    top = table.entries[0]
    assert (top.gt_fragment, top.ocr_fragment, top.count) == ("", " ", 16)
    assert top.percent == 6.69
    second = table.entries[1]
    assert (second.gt_fragment, second.ocr_fragment, second.count) == ("e", "c", 3)
    assert second.percent == 1.26


def test_confusion_table_tie_break_is_first_seen():
    pairs = [EvalPair("aa", "ba", "l1"), EvalPair("cc", "dc", "l2")]
    table = confusion_table(pairs)
    assert [(e.gt_fragment, e.ocr_fragment) for e in table.entries] == [
        ("a", "b"),
        ("c", "d"),
    ]


def test_render_confusion_shows_whitespace_glyph():
    table = confusion_table([EvalPair("ab", "a b", "l1")])
    out = render_confusion(table)
    assert "␣" in out
    assert out.splitlines()[0].startswith("ID\t")


def test_error_reduction_pairs():
    assert error_reduction(2.9, 0.60) == (79.3, 4.8)
    assert error_reduction(1.6, 0.18) == (88.8, 8.9)
    err, impr = error_reduction(5.0, 0.0)
    assert err == 100.0 and impr == math.inf
    with pytest.raises(ValueError):
        error_reduction(0.0, 1.0)


def test_speedup_rounding():
    assert speedup(82, 169).speedup == 2.1
    assert speedup(22, 29).speedup == 1.3
    with pytest.raises(ValueError):
        speedup(0, 10)


def test_apply_regularizations():
    assert evaluate.apply_regularizations("ſchoͤn", [("ſ", "s"), ("oͤ", "ö")]) == "schön"


def test_write_eval_json(tmp_path):
    report = cer([EvalPair("abcd", "abed", "l1")])
    table = confusion_table([EvalPair("abcd", "abed", "l1")])
    payload = evaluate.write_eval_json(tmp_path / "eval.json", report, table)
    on_disk = json.loads((tmp_path / "eval.json").read_text())
    assert on_disk == payload
    assert on_disk["cer"]["cer"] == 25.0
    assert on_disk["confusion"]["total_errors"] == 1


_texts = st.text(alphabet="abc ſ", max_size=12)


@settings(max_examples=150, deadline=None)
@given(_texts, _texts)
def test_cer_bounds_property(a, b):
    if not a:
        return
    report = cer([EvalPair(a, b, "l")])
    assert 0.0 <= report.cer
    assert report.edit_distance <= max(len(a), len(b))


@settings(max_examples=150, deadline=None)
@given(st.floats(0.1, 50), st.one_of(st.just(0.0), st.floats(0.01, 50)))
def test_error_reduction_sign_property(base, new):
    err, impr = error_reduction(base, new)
    if new < base:
        assert err > 0
    if new > base:
        assert err < 0
