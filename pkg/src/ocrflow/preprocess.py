"""Page preprocessing: illumination normalization, binarization, deskew.

Scans are converted to a normalized grayscale image (background divided
out, contrast stretched between percentiles) and a binary ink mask, then
optionally rotated upright by the projection-variance skew estimate.
All functions are pure: identical input and parameters give identical
output bytes.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage


@dataclass
class GrayImage:
    samples: np.ndarray  # float row-major luminance in [0,1], shape (h, w)

    @property
    def width(self):
        return self.samples.shape[1]

    @property
    def height(self):
        return self.samples.shape[0]


@dataclass
class BinaryImage:
    bits: np.ndarray  # uint8, 1 = ink, 0 = background, shape (h, w)

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]


@dataclass
class SkewEstimate:
    angle: float  # degrees, positive = counter-clockwise
    score: float  # projection variance at that angle


def load_gray(path):
    img = Image.open(path).convert("L")
    return GrayImage(np.asarray(img, dtype=np.float64) / 255.0)


def save_gray(gray, path):
    arr = np.clip(np.round(gray.samples * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_binary(path):
    img = Image.open(path).convert("L")
    arr = np.asarray(img)
    return BinaryImage((arr < 128).astype(np.uint8))


def save_binary(binary, path):
    arr = np.where(binary.bits > 0, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").convert("1").save(path)


def normalize_gray(raw, percentile_lo=5, percentile_hi=90, bg_window_fraction=0.05):
    """Flatten illumination and stretch contrast into [0,1].

    The background is estimated with separable box filters whose window
    is a fraction of the image height, the image is divided by it, and
    the result is stretched between the lo/hi percentile values.
    A constant input has no ink anywhere and comes back all background.
    """
    img = np.asarray(raw.samples, dtype=np.float64)
    if img.size == 0:
        raise ValueError("empty image")
    if img.max() - img.min() < 1e-9:
        return GrayImage(np.ones_like(img))

    window = max(3, int(round(img.shape[0] * bg_window_fraction)) | 1)
    background = ndimage.uniform_filter(img, size=window, mode="nearest")
    background = ndimage.maximum_filter(background, size=window // 2, mode="nearest")
    background = np.maximum(background, 1e-6)
    flat = np.clip(img / background, 0, 2)

    lo = np.percentile(flat, percentile_lo)
    hi = np.percentile(flat, percentile_hi)
    if hi - lo < 1e-9:
        return GrayImage(np.ones_like(img))
    out = np.clip((flat - lo) / (hi - lo), 0.0, 1.0)
    return GrayImage(out)


def binarize(norm, threshold=0.5):
    """Ink wherever the normalized value is below the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold {threshold} outside (0,1)")
    return BinaryImage((norm.samples < threshold).astype(np.uint8))


def estimate_skew(binary, max_skew=2.0, steps_per_degree=8, border_ignore=0.1):
    """Angle maximizing the variance of row-sum projections.

    The search grid covers [-max_skew, max_skew] at 1/steps_per_degree
    resolution; a border fraction is cropped before scoring to suppress
    scan-edge noise. Ties break toward the angle of smallest magnitude.
    Blank input gives (0, 0).
    """
    ink = binary.bits.astype(np.float64)
    h, w = ink.shape
    oy = int(h * border_ignore)
    ox = int(w * border_ignore)
    core = ink[oy : h - oy, ox : w - ox] if h > 2 * oy and w > 2 * ox else ink
    if core.size == 0 or core.sum() == 0:
        return SkewEstimate(0.0, 0.0)

    n = int(round(2 * max_skew * steps_per_degree))
    angles = np.linspace(-max_skew, max_skew, n + 1)
    best_angle, best_score = 0.0, -1.0
    for a in angles:
        rotated = ndimage.rotate(core, a, reshape=False, order=1, mode="constant", cval=0.0)
        score = float(np.var(rotated.sum(axis=1)))
        if score > best_score + 1e-12 or (
            abs(score - best_score) <= 1e-12 and abs(a) < abs(best_angle)
        ):
            best_angle, best_score = float(a), score
    # the grid angle straightens the image; the skew itself is its negative
    skew = -best_angle
    return SkewEstimate(skew if skew != 0 else 0.0, best_score)


def deskew(img, angle):
    """Rotate by `angle` degrees counter-clockwise about the center.

    Bilinear for gray, nearest for binary; canvas keeps its size and is
    padded with background.
    """
    if abs(angle) > 45:
        raise ValueError(f"angle {angle} exceeds 45 degrees")
    if angle == 0:
        return img
    if isinstance(img, BinaryImage):
        rotated = ndimage.rotate(
            img.bits, angle, reshape=False, order=0, mode="constant", cval=0
        )
        return BinaryImage(rotated.astype(np.uint8))
    rotated = ndimage.rotate(
        img.samples, angle, reshape=False, order=1, mode="constant", cval=1.0
    )
    return GrayImage(np.clip(rotated, 0.0, 1.0))


def preprocess_page(raw, threshold=0.5, deskew_page=True, skew_params=None):
    """normalize -> binarize -> (optional) page-level deskew.

    Returns (gray, binary, skew_estimate).
    """
    norm = normalize_gray(raw)
    binary = binarize(norm, threshold)
    est = SkewEstimate(0.0, 0.0)
    if deskew_page:
        est = estimate_skew(binary, **(skew_params or {}))
        if est.angle != 0.0:
            norm = deskew(norm, -est.angle)
            binary = deskew(binary, -est.angle)
    return norm, binary, est
