"""Text line segmentation of extracted, deskewed region images.

Pipeline: estimate the typical glyph height, locate horizontal line
bands in a smoothed ink map, assign connected components to bands
(splitting tall ones across bands), and trace a tight per-column
polygon around each line so that even vertically overlapping neighbors
get disjoint outlines.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ocrflow.layout import connected_components
from ocrflow.pagexml import Polygon, TextLine


@dataclass
class ScaleEstimate:
    xheight: float


@dataclass
class LineSeed:
    band: tuple  # (y_top, y_bottom), exclusive bottom
    x_extent: tuple


@dataclass
class Fragment:
    cc_id: int
    y_lo: int  # vertical clip of the component, exclusive hi
    y_hi: int


def default_noise_px(xheight):
    return max(4, int(0.05 * xheight * xheight))


def estimate_scale(ccs):
    """Median component height, robust against outliers like swashes.

    Heights outside [25%, 400%] of the raw median are excluded before
    taking the final median.
    """
    if not ccs:
        raise ValueError("empty region")
    heights = np.array([cc.height for cc in ccs], dtype=np.float64)
    raw = np.median(heights)
    kept = heights[(heights >= 0.25 * raw) & (heights <= 4.0 * raw)]
    if len(kept) == 0:
        kept = heights
    return ScaleEstimate(float(np.median(kept)))


def detect_line_seeds(region_bin, scale, tall_factor=3.0):
    """Horizontal line bands from a smoothed ink map.

    Components much taller than the x-height (swash capitals, borders)
    are kept out of the map so they cannot bridge adjacent bands; they
    are still assigned to lines later. The map is smoothed with a wide
    horizontal / narrow vertical kernel and thresholded at 50% of the
    per-row maxima.
    """
    xh = scale.xheight
    bits = region_bin.bits
    if bits.sum() == 0:
        return []

    labels, count = ndimage.label(bits, structure=np.ones((3, 3), dtype=int))
    keep = np.ones(count + 1, dtype=bool)
    keep[0] = False
    slices = ndimage.find_objects(labels)
    for i, sl in enumerate(slices, start=1):
        if sl[0].stop - sl[0].start > tall_factor * xh:
            keep[i] = False
    mask = keep[labels].astype(np.float64)
    if mask.sum() == 0:
        return []

    kw = max(3, int(round(10 * xh)))
    kh = max(1, int(round(0.5 * xh)))
    smooth = ndimage.uniform_filter(mask, size=(kh, kw), mode="constant")

    row_max = smooth.max(axis=1)
    peak = row_max.max()
    if peak <= 0:
        return []
    active = row_max >= 0.5 * peak

    seeds = []
    y = 0
    h = len(active)
    while y < h:
        if active[y]:
            start = y
            while y < h and active[y]:
                y += 1
            band_rows = smooth[start:y]
            cols = np.nonzero(band_rows.max(axis=0) >= 0.25 * peak)[0]
            if len(cols):
                seeds.append(LineSeed((start, y), (int(cols[0]), int(cols[-1]) + 1)))
        else:
            y += 1
    return seeds


def _overlap(a_lo, a_hi, b_lo, b_hi):
    return max(0, min(a_hi, b_hi) - max(a_lo, b_lo))


def assign_components(ccs, seeds, min_ccs=3, noise_px=4, split_overlap=0.3):
    """Distribute components over seed bands.

    Small components are treated as noise and dropped. A component
    overlapping two bands each by at least `split_overlap` of its height
    is split at the inter-band midline; otherwise it goes whole to the
    band with maximal vertical overlap. Candidate lines with fewer than
    `min_ccs` components are discarded.
    """
    per_seed = [[] for _ in seeds]
    for cc in ccs:
        if cc.pixel_count < noise_px:
            continue
        y0, y1 = cc.bbox[1], cc.bbox[3]
        height = y1 - y0
        overlaps = [
            (i, _overlap(y0, y1, s.band[0], s.band[1])) for i, s in enumerate(seeds)
        ]
        overlaps = [(i, o) for i, o in overlaps if o > 0]
        if not overlaps:
            continue
        strong = [i for i, o in overlaps if o >= split_overlap * height]
        if len(strong) >= 2:
            # split at the midlines between consecutive strong bands
            strong.sort()
            cuts = []
            for a, b in zip(strong, strong[1:]):
                cuts.append((seeds[a].band[1] + seeds[b].band[0]) // 2)
            bounds = [y0] + cuts + [y1]
            for idx, (lo, hi) in zip(strong, zip(bounds, bounds[1:])):
                if hi > lo:
                    per_seed[idx].append(Fragment(cc.id, lo, hi))
        else:
            best = max(overlaps, key=lambda t: t[1])[0]
            per_seed[best].append(Fragment(cc.id, y0, y1))
    return [
        (seed, frags)
        for seed, frags in zip(seeds, per_seed)
        if len(frags) >= min_ccs
    ]


def line_ink_mask(region_bin, labels, fragments):
    """Ink pixels belonging to the given fragments only."""
    mask = np.zeros_like(region_bin.bits)
    for f in fragments:
        sel = labels[f.y_lo : f.y_hi, :] == f.cc_id
        mask[f.y_lo : f.y_hi, :][sel] = 1
    return mask


def build_line_polygon(mask, xheight, max_vertices=128):
    """Tight per-column envelope around the line's ink.

    For every x column the min/max ink rows are taken; gaps narrower
    than twice the x-height are bridged by linear interpolation. The
    polygon walks the upper contour left to right and the lower contour
    back, simplified to at most `max_vertices` points while only ever
    growing outward (containment of the ink is preserved).
    """
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ValueError("no ink in line mask")
    x_min, x_max = int(xs.min()), int(xs.max())
    width = x_max - x_min + 1
    top = np.full(width, -1, dtype=np.int64)
    bot = np.full(width, -1, dtype=np.int64)
    for x, y in zip(xs, ys):
        i = x - x_min
        if top[i] < 0 or y < top[i]:
            top[i] = y
        if bot[i] < 0 or y + 1 > bot[i]:
            bot[i] = y + 1

    filled = top >= 0
    gap_limit = 2 * xheight
    idx = np.nonzero(filled)[0]
    for a, b in zip(idx, idx[1:]):
        if b - a > 1 and (b - a) <= gap_limit:
            for i in range(a + 1, b):
                t = (i - a) / (b - a)
                top[i] = int(round(top[a] * (1 - t) + top[b] * t))
                bot[i] = int(round(bot[a] * (1 - t) + bot[b] * t))

    # columns beyond the gap limit stay unfilled: clamp them to their
    # nearest filled neighbourhood so the envelope remains one piece
    for i in range(width):
        if top[i] < 0:
            j = idx[np.argmin(np.abs(idx - i))]
            top[i], bot[i] = top[j], bot[j]

    runs = []  # (x_start, x_end_exclusive, top, bot) in mask coords
    start = 0
    for i in range(1, width + 1):
        if i == width or top[i] != top[start] or bot[i] != bot[start]:
            runs.append([x_min + start, x_min + i, int(top[start]), int(bot[start])])
            start = i

    # each run can contribute up to two vertices on both contours
    while len(runs) * 4 + 2 > max_vertices and len(runs) > 1:
        # merge the adjacent pair whose envelopes differ least
        best_i, best_cost = 0, None
        for i in range(len(runs) - 1):
            cost = abs(runs[i][2] - runs[i + 1][2]) + abs(runs[i][3] - runs[i + 1][3])
            if best_cost is None or cost < best_cost:
                best_i, best_cost = i, cost
        a, b = runs[best_i], runs[best_i + 1]
        runs[best_i] = [a[0], b[1], min(a[2], b[2]), max(a[3], b[3])]
        del runs[best_i + 1]

    points = []
    for x0, x1, t, _ in runs:
        if not points or points[-1][1] != t:
            points.append((x0, t))
        points.append((x1, t))
    for x0, x1, _, b in reversed(runs):
        if points[-1][1] != b:
            points.append((x1, b))
        points.append((x0, b))
    # drop collinear duplicates introduced at run joins
    cleaned = []
    for p in points:
        if len(cleaned) >= 2 and (
            (cleaned[-2][0] == cleaned[-1][0] == p[0])
            or (cleaned[-2][1] == cleaned[-1][1] == p[1])
        ):
            cleaned[-1] = p
        elif not cleaned or p != cleaned[-1]:
            cleaned.append(p)
    if len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
        cleaned.pop()
    return Polygon(cleaned)


def map_point_from_rotated(x, y, shape, angle):
    """Undo an in-place rotation (as applied by deskew) for one point."""
    h, w = shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    a = math.radians(angle)
    dx, dy = x - cx, y - cy
    # y grows downward, so a counter-clockwise image rotation is a
    # clockwise rotation in (x, y) math coordinates
    ox = cx + dx * math.cos(a) - dy * math.sin(a)
    oy = cy + dx * math.sin(a) + dy * math.cos(a)
    return ox, oy


def segment_lines(
    region,
    region_bin,
    min_ccs=3,
    noise_px=None,
    offset=(0, 0),
    deskew_angle=0.0,
    page_size=None,
):
    """Populate region.lines from its deskewed binary crop.

    Line polygons are computed in crop space; `deskew_angle` is the
    rotation that was applied to produce the crop, which gets undone
    before shifting by the crop offset into page coordinates.
    """
    if region.kind != "text":
        raise ValueError(f"region {region.id} is not a text region")
    region.lines = []
    ccs = connected_components(region_bin)
    if not ccs:
        return region
    scale = estimate_scale(ccs)
    if noise_px is None:
        noise_px = default_noise_px(scale.xheight)
    seeds = detect_line_seeds(region_bin, scale)
    # relabel raw component labels to the deterministic (y0, x0) ids
    # that connected_components assigned
    labels, count = ndimage.label(region_bin.bits, structure=np.ones((3, 3), dtype=int))
    slices = ndimage.find_objects(labels)
    order = sorted(range(count), key=lambda i: (slices[i][0].start, slices[i][1].start))
    relabel = np.zeros(count + 1, dtype=np.int64)
    for new_id, raw_idx in enumerate(order):
        relabel[raw_idx + 1] = new_id + 1
    labels = relabel[labels] - 1  # -1 = background, else deterministic id

    assigned = assign_components(ccs, seeds, min_ccs=min_ccs, noise_px=noise_px)
    shape = region_bin.bits.shape
    for n, (seed, frags) in enumerate(assigned, start=1):
        mask = line_ink_mask(region_bin, labels, frags)
        polygon = build_line_polygon(mask, scale.xheight)
        pts = []
        for x, y in polygon.points:
            if deskew_angle:
                x, y = map_point_from_rotated(x, y, shape, deskew_angle)
            px = int(round(x)) + offset[0]
            py = int(round(y)) + offset[1]
            if page_size is not None:
                px = min(max(px, 0), page_size[0])
                py = min(max(py, 0), page_size[1])
            pts.append((px, py))
        region.lines.append(TextLine(id=f"{region.id}_l{n:03d}", polygon=Polygon(pts)))
    return region
