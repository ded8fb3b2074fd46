"""Region segmentation, extraction, per-region deskew, reading order.

Dummy segmentation treats the page (or each detected column) as one
running-text region; smearing grows selected connected components into a
single blob whose contour becomes a region polygon. Extraction cuts the
exact polygon out of the page image so overlapping bounding boxes never
leak foreign ink.
"""

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from ocrflow import preprocess
from ocrflow.pagexml import Polygon, Region
from ocrflow.preprocess import BinaryImage, GrayImage

_STRUCTURE_8 = np.ones((3, 3), dtype=int)
_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)


@dataclass
class ConnectedComponent:
    id: int
    bbox: tuple  # (x0, y0, x1, y1), exclusive right/bottom
    pixel_count: int
    centroid: tuple

    @property
    def height(self):
        return self.bbox[3] - self.bbox[1]

    @property
    def width(self):
        return self.bbox[2] - self.bbox[0]


@dataclass
class ColumnSplit:
    gutters: list  # disjoint, sorted (x0, x1) intervals
    column_count: int


@dataclass
class RegionExtract:
    image: object  # BinaryImage or GrayImage crop
    offset: tuple  # (x0, y0) of the crop in page space

    def to_page_coords(self, x, y):
        return x + self.offset[0], y + self.offset[1]


def connected_components(binary, connectivity=8):
    """Labeled ink components sorted by (y0, x0) with deterministic ids."""
    structure = _STRUCTURE_8 if connectivity == 8 else _STRUCTURE_4
    labels, count = ndimage.label(binary.bits, structure=structure)
    if count == 0:
        return []
    slices = ndimage.find_objects(labels)
    sums = ndimage.sum_labels(binary.bits, labels, index=np.arange(1, count + 1))
    centroids = ndimage.center_of_mass(binary.bits, labels, np.arange(1, count + 1))
    ccs = []
    for i, sl in enumerate(slices):
        ys, xs = sl
        ccs.append(
            (
                (ys.start, xs.start),
                (xs.start, ys.start, xs.stop, ys.stop),
                int(sums[i]),
                (centroids[i][1], centroids[i][0]),
                i + 1,
            )
        )
    ccs.sort(key=lambda t: t[0])
    return [
        ConnectedComponent(new_id, bbox, count, centroid)
        for new_id, (_, bbox, count, centroid, _) in enumerate(ccs)
    ]


def detect_columns(binary, max_columns, gutter_frac=0.005, min_width_frac=0.02):
    """Whitespace gutters from the smoothed vertical ink projection."""
    h, w = binary.bits.shape
    projection = binary.bits.sum(axis=0).astype(np.float64)
    projection = ndimage.uniform_filter1d(projection, size=max(3, w // 100))
    peak = projection.max()
    if peak <= 0:
        return ColumnSplit([], 1)
    low = projection <= gutter_frac * peak
    min_width = max(1, int(w * min_width_frac))

    # interior runs of near-zero projection, wide enough to be gutters
    gutters = []
    start = None
    for x in range(w):
        if low[x]:
            if start is None:
                start = x
        elif start is not None:
            gutters.append((start, x))
            start = None
    if start is not None:
        gutters.append((start, w))
    ink_cols = np.nonzero(projection > gutter_frac * peak)[0]
    x_lo, x_hi = int(ink_cols[0]), int(ink_cols[-1])
    gutters = [
        (a, b) for a, b in gutters if a > x_lo and b <= x_hi and b - a >= min_width
    ]
    gutters.sort(key=lambda g: g[0] - g[1])  # widest first
    gutters = sorted(gutters[: max_columns - 1])
    return ColumnSplit(gutters, len(gutters) + 1)


def _ink_bbox(bits, margin, bounds=None):
    h, w = bits.shape
    if bounds is not None:
        x_lo, x_hi = bounds
        view = bits[:, x_lo:x_hi]
    else:
        x_lo, x_hi = 0, w
        view = bits
    ys, xs = np.nonzero(view)
    if len(ys) == 0:
        return None
    x0 = max(0, int(xs.min()) + x_lo - margin)
    x1 = min(w, int(xs.max()) + x_lo + 1 + margin)
    y0 = max(0, int(ys.min()) - margin)
    y1 = min(h, int(ys.max()) + 1 + margin)
    return x0, y0, x1, y1


def dummy_segment(binary, max_columns=1, margin=5):
    """One running-text region per page, or per detected column.

    Regions are rectangles around the ink bounding box; a blank page
    gives a single full-page region.
    """
    if max_columns < 1:
        raise ValueError("max_columns must be >= 1")
    h, w = binary.bits.shape
    if binary.bits.sum() == 0:
        return [
            Region(
                id="r0001",
                polygon=Polygon([(0, 0), (w, 0), (w, h), (0, h)]),
                kind="text",
                subtype="running-text",
            )
        ]
    if max_columns == 1:
        split = ColumnSplit([], 1)
    else:
        split = detect_columns(binary, max_columns)

    edges = [0]
    for a, b in split.gutters:
        edges.append((a + b) // 2)
    edges.append(w)

    regions = []
    n = 0
    for left, right in zip(edges, edges[1:]):
        bbox = _ink_bbox(binary.bits, margin, bounds=(left, right))
        if bbox is None:
            continue
        x0, y0, x1, y1 = bbox
        x0, x1 = max(x0, left), min(x1, right)
        n += 1
        regions.append(
            Region(
                id=f"r{n:04d}",
                polygon=Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)]),
                kind="text",
                subtype="running-text",
            )
        )
    return regions


def smear_region(ccs, binary, max_iterations=20, max_vertices=64):
    """Grow the selected components into one blob; trace its contour.

    Dilation radius grows by 2 px each round until a single connected
    blob remains, then the outer contour is simplified to at most
    `max_vertices` points. The result always contains every input bbox.
    """
    if not ccs:
        raise ValueError("no components selected")
    h, w = binary.bits.shape
    # filled bboxes rather than raw pixels: keeps the containment
    # guarantee even for glyphs that do not touch their box corners
    mask = np.zeros((h, w), dtype=np.uint8)
    for cc in ccs:
        x0, y0, x1, y1 = cc.bbox
        mask[y0:y1, x0:x1] = 1

    blob = mask
    for k in range(1, max_iterations + 1):
        _, count = ndimage.label(blob, structure=_STRUCTURE_8)
        if count <= 1:
            break
        r = 2 * k
        kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (2 * r + 1, 2 * r + 1))
        blob = cv2.dilate(mask, kernel)

    # pad so contours of blobs touching the border stay closed
    padded = np.pad(blob, 1)
    contours, _ = cv2.findContours(
        padded, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE
    )
    contour = max(contours, key=cv2.contourArea)
    contour = contour - 1  # undo padding offset

    points = _simplify_contour(contour, max_vertices)
    polygon = Polygon(points)
    if not _contains_bboxes(polygon, ccs, (h, w)):
        # blobs the dilation cap left unmerged: hull over every contour
        hull = cv2.convexHull(np.vstack([c.reshape(-1, 2) - 1 for c in contours]))
        polygon = Polygon(_simplify_contour(hull.reshape(-1, 1, 2), max_vertices))
    return polygon


def _simplify_contour(contour, max_vertices):
    eps = 0.5
    approx = contour
    while len(approx) > max_vertices:
        approx = cv2.approxPolyDP(contour, eps, True)
        eps *= 1.5
    pts = [(int(p[0][0]), int(p[0][1])) for p in approx]
    cleaned = [p for i, p in enumerate(pts) if i == 0 or p != pts[i - 1]]
    if len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
        cleaned.pop()
    if len(cleaned) < 3:  # degenerate tiny blob: fall back to its bbox
        xs = [p[0][0] for p in contour]
        ys = [p[0][1] for p in contour]
        cleaned = [
            (min(xs), min(ys)),
            (max(xs) + 1, min(ys)),
            (max(xs) + 1, max(ys) + 1),
            (min(xs), max(ys) + 1),
        ]
    return cleaned


def _contains_bboxes(polygon, ccs, shape):
    contour = np.array(polygon.points, dtype=np.int32)
    for cc in ccs:
        x0, y0, x1, y1 = cc.bbox
        for x, y in ((x0, y0), (x1 - 1, y0), (x0, y1 - 1), (x1 - 1, y1 - 1)):
            if cv2.pointPolygonTest(contour, (float(x), float(y)), False) < 0:
                return False
    return True


def extract_region(page_img, region):
    """Cut the exact polygon out of the page image.

    Pixels inside the bounding box but outside the polygon are set to
    background, so adjacent regions never leak ink into each other.
    Returns the crop plus the offset back to page space.
    """
    if isinstance(page_img, BinaryImage):
        arr = page_img.bits
        background = 0
    else:
        arr = page_img.samples
        background = 1.0
    h, w = arr.shape
    x0, y0, x1, y1 = region.polygon.bbox()
    if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
        raise ValueError(f"region {region.id} polygon outside image")
    mask = np.zeros((h, w), dtype=np.uint8)
    cv2.fillPoly(mask, [np.array(region.polygon.points, dtype=np.int32)], 1)
    crop = arr[y0:y1, x0:x1].copy()
    crop_mask = mask[y0:y1, x0:x1]
    crop[crop_mask == 0] = background
    if isinstance(page_img, BinaryImage):
        out = BinaryImage(crop.astype(np.uint8))
    else:
        out = GrayImage(crop)
    return RegionExtract(out, (x0, y0))


def deskew_region(region_img, max_skew=2.0, steps_per_degree=8, border_ignore=0.1):
    """Per-region skew estimate + rotation; returns (image, angle)."""
    if isinstance(region_img, BinaryImage):
        binary = region_img
    else:
        binary = preprocess.binarize(region_img)
    est = preprocess.estimate_skew(
        binary, max_skew=max_skew, steps_per_degree=steps_per_degree,
        border_ignore=border_ignore,
    )
    if est.angle == 0.0:
        return region_img, 0.0
    return preprocess.deskew(region_img, -est.angle), est.angle


def derive_reading_order(regions, column_split=None):
    """Column-major order of text regions; deterministic tie-breaks.

    Columns left to right, then top edge, then left edge, then id.
    Non-text regions are excluded. Permuting the input never changes
    the result.
    """
    text_regions = [r for r in regions if r.kind == "text" and r.polygon.points]

    def column_of(region):
        if not column_split or not column_split.gutters:
            return 0
        cx = sum(p[0] for p in region.polygon.points) / len(region.polygon.points)
        col = 0
        for a, b in column_split.gutters:
            if cx >= (a + b) / 2:
                col += 1
        return col

    def key(region):
        x0, y0, _, _ = region.polygon.bbox()
        return (column_of(region), y0, x0, region.id)

    return [r.id for r in sorted(text_regions, key=key)]
