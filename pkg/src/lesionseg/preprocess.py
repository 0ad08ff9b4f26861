"""Dull-razor hair removal.

Dark hairs are thin, elongated structures: a line laid across a hair has
bright pixels on both sides of it, while one laid along it does not. Pixels
that are darker than both sides of some line by more than a threshold are
flagged as hair and repainted by linear interpolation between the nearest
clean pixels on either side, along the direction that bridged the hair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize

from .imgcore import as_rgb, quantize

# components wider than this (pixels per skeleton pixel) are not hair
MAX_HAIR_WIDTH = 3.0


@dataclass(frozen=True)
class HairRemovalConfig:
    line_length: int = 9
    orientations: int = 4
    hair_threshold: int = 10

    def __post_init__(self):
        if self.line_length < 3 or self.line_length % 2 == 0:
            raise ValueError("line_length must be odd and >= 3")
        if self.orientations < 1:
            raise ValueError("orientations must be >= 1")
        if self.hair_threshold < 1:
            raise ValueError("hair_threshold must be >= 1")


def _angles(n):
    return [np.pi * k / n for k in range(n)]


def line_footprint(length: int, angle: float) -> np.ndarray:
    """Rasterized line of ``length`` pixels through the centre at ``angle`` (radians, CCW from +x)."""
    half = length // 2
    fp = np.zeros((length, length), dtype=bool)
    dy, dx = -np.sin(angle), np.cos(angle)
    scale = 1.0 / max(abs(dy), abs(dx))
    for t in range(-half, half + 1):
        r = half + int(np.rint(t * dy * scale))
        c = half + int(np.rint(t * dx * scale))
        if 0 <= r < length and 0 <= c < length:
            fp[r, c] = True
    return fp


def _offsets(length, angle):
    # integer steps 1..half along the line direction, in (row, col)
    fp = line_footprint(length, angle)
    half = length // 2
    r, c = np.nonzero(fp)
    steps = sorted(zip(r - half, c - half), key=lambda rc: max(abs(rc[0]), abs(rc[1])))
    fwd = [(int(dr), int(dc)) for dr, dc in steps if (dr, dc) > (0, 0) or (dr == 0 and dc > 0)]
    return fwd


def _shifted(padded, dr, dc, pad):
    h, w = padded.shape[0] - 2 * pad, padded.shape[1] - 2 * pad
    return padded[pad + dr:pad + dr + h, pad + dc:pad + dc + w]


def bar_lift(plane, cfg: HairRemovalConfig = HairRemovalConfig()) -> np.ndarray:
    """Per-orientation lift of a 2-D plane, shape ``(orientations, H, W)``.

    For each line orientation the lift is ``min(median(one side),
    median(other side)) - value``, the sides being the ``line_length // 2``
    pixels on either side along the line. It behaves like a grey closing
    with the line element but ignores isolated bright outliers on the sides
    and does not lift the rim of a compact blob from the inside.
    """
    plane = np.asarray(plane, dtype=np.float64)
    half = cfg.line_length // 2
    padded = np.pad(plane, half, mode="edge")
    lifts = []
    for angle in _angles(cfg.orientations):
        fwd = _offsets(cfg.line_length, angle)
        side_a = np.median([_shifted(padded, dr, dc, half) for dr, dc in fwd], axis=0)
        side_b = np.median([_shifted(padded, -dr, -dc, half) for dr, dc in fwd], axis=0)
        lifts.append(np.minimum(side_a, side_b) - plane)
    return np.stack(lifts)


def _detect(rgb, cfg):
    lift = np.max([bar_lift(rgb[..., ch], cfg) for ch in range(3)], axis=0)
    hair = _elongated(lift.max(axis=0) > cfg.hair_threshold, 2 * cfg.line_length)
    return hair, lift


def hair_mask(img, cfg: HairRemovalConfig = HairRemovalConfig()):
    """Return ``(hair, bridge_index)``.

    ``hair`` flags pixels lifted by more than ``hair_threshold`` in any
    channel and orientation (see :func:`bar_lift`), restricted to thin
    8-connected components spanning at least twice the line length.
    ``bridge_index`` is, per pixel, the orientation with the largest lift
    over all channels, i.e. the one crossing the hair.
    """
    hair, lift = _detect(as_rgb(img).astype(np.float64), cfg)
    return hair, np.argmax(lift, axis=0)


def _elongated(mask, min_extent, max_width=MAX_HAIR_WIDTH):
    # long (bounding-box extent) and thin (pixels per skeleton pixel)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return mask
    skeleton = skeletonize(mask)
    skel_len = ndimage.sum_labels(skeleton, labels, index=np.arange(n + 1))
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    keep = np.zeros(n + 1, dtype=bool)
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        extent = max(sl[0].stop - sl[0].start, sl[1].stop - sl[1].start)
        keep[i] = extent >= min_extent and sizes[i] <= max_width * max(skel_len[i], 1)
    return keep[labels]


def _endpoint(hair, rows, cols, dy, dx, reach):
    """First non-hair pixel from each start along ``(dy, dx)``: (found, row, col, steps)."""
    h, w = hair.shape
    found = np.zeros(rows.size, dtype=bool)
    er = np.zeros(rows.size, dtype=np.int64)
    ec = np.zeros(rows.size, dtype=np.int64)
    steps = np.zeros(rows.size)
    for s in range(1, reach + 1):
        r = rows + int(round(s * dy))
        c = cols + int(round(s * dx))
        inside = (r >= 0) & (r < h) & (c >= 0) & (c < w)
        rc, cc = np.clip(r, 0, h - 1), np.clip(c, 0, w - 1)
        hit = ~found & inside & ~hair[rc, cc]
        er[hit], ec[hit], steps[hit] = rc[hit], cc[hit], s
        found |= hit
        if found.all():
            break
    return found, er, ec, steps


def dull_razor(img, cfg: HairRemovalConfig = HairRemovalConfig()) -> np.ndarray:
    """Remove dark hair from an RGB raster. Non-hair pixels are left untouched.

    Each hair pixel is repainted along the orientation that bridges it best:
    the largest lift among orientations with clean pixels on both sides, or
    failing that on one side (near the canvas border), in which case the
    single clean pixel is copied.
    """
    rgb = as_rgb(img)
    src = rgb.astype(np.float64)
    hair, lift = _detect(src, cfg)
    if not hair.any():
        return rgb.copy()

    rows, cols = np.nonzero(hair)
    reach = 2 * cfg.line_length
    best_key = np.full(rows.size, -np.inf)
    repaint = src[rows, cols].copy()
    for k, angle in enumerate(_angles(cfg.orientations)):
        dy, dx = -np.sin(angle), np.cos(angle)
        scale = 1.0 / max(abs(dy), abs(dx))
        dy, dx = dy * scale, dx * scale
        f1, r1, c1, d1 = _endpoint(hair, rows, cols, dy, dx, reach)
        f2, r2, c2, d2 = _endpoint(hair, rows, cols, -dy, -dx, reach)
        both = f1 & f2
        wt = np.where(both, d2 / np.where(both, d1 + d2, 1.0), 0.0)[:, None]
        v1, v2 = src[r1, c1], src[r2, c2]
        value = np.where(both[:, None], wt * v1 + (1.0 - wt) * v2,
                         np.where(f1[:, None], v1, v2))
        # rank: two-sided beats one-sided beats none; then the larger lift
        key = (2.0 * both + (f1 | f2)) * 1e6 + lift[k, rows, cols]
        key[~(f1 | f2)] = -np.inf
        better = key > best_key
        repaint[better] = value[better]
        best_key[better] = key[better]

    out = src.copy()
    out[rows, cols] = repaint
    return quantize(out)
