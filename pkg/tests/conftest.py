import numpy as np
import pytest

from ocrflow.pagexml import Page, Polygon, Region, TextLine
from ocrflow.preprocess import BinaryImage, GrayImage


def make_valid_page():
    region = Region(
        id="r0001",
        polygon=Polygon([(10, 10), (400, 10), (400, 300), (10, 300)]),
        kind="text",
        subtype="running-text",
        lines=[
            TextLine(
                id="r0001_l001",
                polygon=Polygon([(12, 20), (390, 20), (390, 48), (12, 48)]),
            )
        ],
    )
    image = Region(
        id="r0002",
        polygon=Polygon([(10, 320), (400, 320), (400, 580), (10, 580)]),
        kind="image",
    )
    return Page(
        id="0001",
        width=800,
        height=600,
        regions=[region, image],
        reading_order=["r0001"],
        image_original="0001.png",
    )


def render_words(
    shape,
    rows,
    rng,
    x_range=(20, None),
    glyph_height=12,
    row_gap=None,
    min_words=4,
):
    """Word-like ink blobs on given row baselines; returns (bits, mask rows)."""
    h, w = shape
    bits = np.zeros(shape, dtype=np.uint8)
    x_lo, x_hi = x_range
    if x_hi is None:
        x_hi = w - 20
    for y in rows:
        x = x_lo
        words = 0
        while x < x_hi - 10:
            wl = int(rng.integers(12, 30))
            bits[y : y + glyph_height, x : min(x + wl, x_hi)] = 1
            words += 1
            x += wl + int(rng.integers(5, 12))
    return bits


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def text_page_bits(rng, n_rows=6, shape=(200, 420)):
    rows = list(range(20, 20 + n_rows * 26, 26))
    return render_words(shape, rows, rng), rows


@pytest.fixture
def simple_binary(rng):
    bits, _ = text_page_bits(rng)
    return BinaryImage(bits)


def gray_from_bits(bits, ink=0.1, background=0.95):
    arr = np.where(bits > 0, ink, background)
    return GrayImage(arr.astype(np.float64))
