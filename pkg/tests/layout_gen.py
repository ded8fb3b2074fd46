"""Random multi-column page generator with known layout ground truth.

Used by the segmentation tests: each generated page records how many
columns it has, how many text lines sit in each column, and the
top-to-bottom row positions, so the segmentation output can be checked
against an exact oracle.
"""

from dataclasses import dataclass

import numpy as np

from ocrflow.preprocess import BinaryImage

GLYPH_HEIGHT = 12
ROW_PITCH = 26
COLUMN_WIDTH = 200
GUTTER = 60


@dataclass
class LayoutTruth:
    n_columns: int
    lines_per_column: list
    rows_per_column: list  # top y of each line, top to bottom
    has_swash: bool
    binary: BinaryImage


def _fill_row(bits, y, x_lo, x_hi, rng):
    x = x_lo
    while x < x_hi - 12:
        wl = int(rng.integers(14, 30))
        bits[y : y + GLYPH_HEIGHT, x : min(x + wl, x_hi)] = 1
        x += wl + int(rng.integers(6, 12))


def generate_layout(rng):
    n_columns = int(rng.integers(1, 4))
    total_lines = int(rng.integers(5, 31))
    # spread the lines over the columns, at least one per column
    counts = [1] * n_columns
    for _ in range(total_lines - n_columns):
        counts[int(rng.integers(0, n_columns))] += 1

    height = (max(counts) + 1) * ROW_PITCH + 40
    width = n_columns * COLUMN_WIDTH + (n_columns - 1) * GUTTER + 40
    bits = np.zeros((height, width), dtype=np.uint8)

    has_swash = bool(rng.integers(0, 2))
    rows_per_column = []
    for col, n_lines in enumerate(counts):
        x_lo = 20 + col * (COLUMN_WIDTH + GUTTER)
        x_hi = x_lo + COLUMN_WIDTH
        rows = [20 + i * ROW_PITCH for i in range(n_lines)]
        rows_per_column.append(rows)
        swash_here = has_swash and col == 0 and n_lines >= 3
        for i, y in enumerate(rows):
            lo = x_lo
            if swash_here and i < 3:
                lo = x_lo + 50  # indent beside the oversized capital
            _fill_row(bits, y, lo, x_hi, rng)
        if swash_here:
            bits[20:60, x_lo : x_lo + 40] = 1  # 40px-tall swash capital

    return LayoutTruth(n_columns, counts, rows_per_column, has_swash, BinaryImage(bits))
