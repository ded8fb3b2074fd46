"""Character error rate, confusion tables, and comparative arithmetic.

All percentages use decimal half-up rounding so reports are reproducible
byte-for-byte; whitespace is rendered as "␣" in human-readable output.
"""

import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from ocrflow import kernels

WHITESPACE_GLYPH = "␣"


def round_half_up(x, decimals):
    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def round_sig(x, figures):
    if x == 0:
        return 0.0
    exponent = math.floor(math.log10(abs(x)))
    return round_half_up(x, figures - 1 - exponent)


@dataclass
class EvalPair:
    gt: str
    ocr: str
    line_id: str = ""
    allow_empty_gt: bool = False


@dataclass
class LineResult:
    line_id: str
    distance: int
    gt_chars: int
    cer: float


@dataclass
class CERReport:
    lines: list
    edit_distance: int
    gt_chars: int
    cer: float

    def to_json(self):
        return {
            "edit_distance": self.edit_distance,
            "gt_chars": self.gt_chars,
            "cer": self.cer,
            "lines": [vars(l) for l in self.lines],
        }


@dataclass
class ConfusionEntry:
    gt_fragment: str
    ocr_fragment: str
    count: int
    percent: float


@dataclass
class ConfusionTable:
    entries: list
    total_errors: int

    def to_json(self):
        return {
            "total_errors": self.total_errors,
            "entries": [vars(e) for e in self.entries],
        }


@dataclass
class SpeedupReport:
    ita_minutes: float
    mm_minutes: float
    speedup: float
    err_red: float = None
    improvement: float = None


def levenshtein(a, b):
    """Minimal edit distance over unicode scalar values."""
    return kernels.levenshtein(a, b)


def cer(pairs):
    """Aggregate CER: total distance / total GT characters, as percent."""
    lines = []
    total_d = 0
    total_g = 0
    for p in pairs:
        if not p.gt and not p.allow_empty_gt:
            raise ValueError(f"empty GT for line {p.line_id!r} (not flagged)")
        d = levenshtein(p.gt, p.ocr)
        g = len(p.gt)
        total_d += d
        total_g += g
        lines.append(
            LineResult(p.line_id, d, g, round_half_up(d / g * 100, 2) if g else 0.0)
        )
    if total_g == 0:
        raise ValueError("corpus has no GT characters")
    return CERReport(lines, total_d, total_g, round_half_up(total_d / total_g * 100, 2))


def align(gt, ocr):
    """One minimal alignment as a list of (gt_fragment, ocr_fragment).

    Match and substitution cells carry one character on both sides;
    deletions have an empty ocr fragment, insertions an empty gt
    fragment. Tie-break during backtrace: substitution, then deletion,
    then insertion, which together with backtracing from the end yields
    the leftmost such alignment.
    """
    d = kernels.alignment_matrix(gt, ocr)
    i, j = len(gt), len(ocr)
    ops = []
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if gt[i - 1] == ocr[j - 1] else 1
            if d[i][j] == d[i - 1][j - 1] + cost:
                ops.append((gt[i - 1], ocr[j - 1]))
                i -= 1
                j -= 1
                continue
        if i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops.append((gt[i - 1], ""))
            i -= 1
            continue
        ops.append(("", ocr[j - 1]))
        j -= 1
    ops.reverse()
    return ops


def confusion_table(pairs, top_k=10):
    """Most common (gt, ocr) confusions with counts and percentages."""
    counts = {}
    order = {}
    total = 0
    for p in pairs:
        for g, o in align(p.gt, p.ocr):
            if g == o:
                continue
            total += 1
            key = (g, o)
            counts[key] = counts.get(key, 0) + 1
            order.setdefault(key, len(order))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], order[kv[0]]))
    entries = [
        ConfusionEntry(g, o, c, round_half_up(c / total * 100, 2))
        for (g, o), c in ranked[:top_k]
    ]
    return ConfusionTable(entries, total)


def error_reduction(base_cer, new_cer):
    """Percent error reduction and improvement factor of new over base."""
    if base_cer <= 0:
        raise ValueError("base CER must be positive")
    err_red = round_half_up((base_cer - new_cer) / base_cer * 100, 1)
    if new_cer == 0:
        return err_red, math.inf
    return err_red, round_sig(base_cer / new_cer, 2)


def speedup(ita_minutes, mm_minutes):
    if ita_minutes <= 0:
        raise ValueError("ITA minutes must be positive")
    return SpeedupReport(
        ita_minutes, mm_minutes, round_half_up(mm_minutes / ita_minutes, 1)
    )


def _display(fragment):
    return "".join(WHITESPACE_GLYPH if c.isspace() else c for c in fragment)


def render_confusion(table):
    rows = ["ID\tGT\tOCR\tCNT\tPERC"]
    for i, e in enumerate(table.entries, 1):
        rows.append(
            f"{i}\t{_display(e.gt_fragment)}\t{_display(e.ocr_fragment)}"
            f"\t{e.count}\t{e.percent:.2f}"
        )
    return "\n".join(rows)


def apply_regularizations(text, substitutions):
    """User-supplied replacement list applied before evaluation."""
    for old, new in substitutions:
        text = text.replace(old, new)
    return text


def write_eval_json(path, cer_report, conf_table):
    payload = {"cer": cer_report.to_json(), "confusion": conf_table.to_json()}
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2))
    return payload
