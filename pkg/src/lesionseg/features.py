"""ABCD lesion features: asymmetry, border irregularity, colour variegation
and diameter, each measured on a binary lesion mask (plus the RGB image for
colour). A, B and C are bounded to [0, 1]; D is in pixels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .imgcore import as_rgb
from .segment import largest_component

# Moore neighbourhood in clockwise order (rows grow downwards), starting west
_DIRS = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))


@dataclass(frozen=True)
class FeatureVector:
    a: float
    b: float
    c: float
    d: float
    d_mm: float | None = None

    def abc(self):
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class LesionSample:
    img: np.ndarray
    mask: np.ndarray
    mm_per_pixel: float | None = None

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2 or not mask.any():
            raise ValueError("lesion mask must be a nonempty 2-D mask")
        if np.asarray(self.img).shape[:2] != mask.shape:
            raise ValueError("image and mask dimensions differ")
        if self.mm_per_pixel is not None and not self.mm_per_pixel > 0:
            raise ValueError("mm_per_pixel must be positive")


def _points(mask):
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or not mask.any():
        raise ValueError("empty mask")
    rows, cols = np.nonzero(mask)
    # relative to the bounding-box origin so that integer shifts are exact
    return rows - rows.min(), cols - cols.min()


def asymmetry(mask) -> float:
    """Mean symmetric difference of the mask with its reflections across
    both principal axes, normalised by ``4 |M|``."""
    rows, cols = _points(mask)
    pts = np.stack([rows, cols], axis=1).astype(np.float64)
    n = len(pts)
    local = np.zeros((int(rows.max()) + 1, int(cols.max()) + 1), dtype=bool)
    local[rows, cols] = True
    mean = pts.mean(axis=0)
    cov = (pts - mean).T @ (pts - mean) / n
    # reflect through the nearest half-pixel point so that axis-aligned
    # reflections map pixel centres onto pixel centres
    centroid = np.rint(2.0 * mean) / 2.0
    centred = pts - centroid
    evals, evecs = np.linalg.eigh(cov)
    if abs(evals[1] - evals[0]) <= 1e-9 * max(abs(evals[1]), 1.0):
        # isotropic second moments: any orthogonal pair is principal
        evecs = np.eye(2)

    h, w = local.shape
    total = 0
    for k in range(2):
        u = evecs[:, k]
        reflect = 2.0 * np.outer(u, u) - np.eye(2)
        # backward mapping: q is in R(M) iff the pixel nearest R q is in M
        # (a forward map of pixel centres leaves holes at oblique angles)
        corners = (np.array([[0, 0], [0, w - 1], [h - 1, 0], [h - 1, w - 1]]) - centroid) @ reflect.T + centroid
        # cover both the mask's box and its mirror image's
        lo = np.minimum(np.floor(corners.min(axis=0)).astype(int) - 1, 0)
        hi = np.maximum(np.ceil(corners.max(axis=0)).astype(int) + 1, [h - 1, w - 1])
        qr, qc = np.mgrid[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1]
        q = np.stack([qr.ravel(), qc.ravel()], axis=1)
        src = np.rint((q - centroid) @ reflect.T + centroid).astype(np.int64)
        inside = (src[:, 0] >= 0) & (src[:, 0] < h) & (src[:, 1] >= 0) & (src[:, 1] < w)
        member = np.zeros(len(q), dtype=bool)
        member[inside] = local[src[inside, 0], src[inside, 1]]
        in_m = (q[:, 0] >= 0) & (q[:, 0] < h) & (q[:, 1] >= 0) & (q[:, 1] < w)
        orig = np.zeros(len(q), dtype=bool)
        orig[in_m] = local[q[in_m, 0], q[in_m, 1]]
        total += int(np.count_nonzero(member ^ orig))
    return float(min(max(total / (4.0 * n), 0.0), 1.0))


def trace_boundary(mask) -> np.ndarray:
    """Outer boundary of the (single) component containing the first
    foreground pixel in raster order, as an ``(N, 2)`` array of (row, col)
    pixel centres in clockwise order. A lone pixel gives one point."""
    m = np.pad(np.asarray(mask, dtype=bool), 1)
    if not m.any():
        raise ValueError("empty mask")
    start = tuple(int(v) for v in np.argwhere(m)[0])

    def step(cur, search):
        for k in range(8):
            d = (search + k) % 8
            nxt = (cur[0] + _DIRS[d][0], cur[1] + _DIRS[d][1])
            if m[nxt]:
                return nxt, d
        return None, None

    nxt, first_dir = step(start, 0)
    if nxt is None:
        return np.array([[start[0] - 1, start[1] - 1]])
    path = [start]
    cur, d = nxt, first_dir
    while True:
        path.append(cur)
        nxt, nd = step(cur, (d + 6) % 8)
        if cur == start and nd == first_dir:
            path.pop()
            break
        cur, d = nxt, nd
    return np.asarray(path) - 1


def perimeter(boundary) -> float:
    """Length of the closed 8-connected chain: 1 per straight, sqrt(2) per diagonal step."""
    b = np.asarray(boundary)
    if len(b) < 2:
        return 0.0
    steps = np.abs(np.diff(np.vstack([b, b[:1]]), axis=0)).sum(axis=1)
    n_diag = int(np.count_nonzero(steps == 2))
    return float((len(steps) - n_diag) + math.sqrt(2.0) * n_diag)


def polygon_area(boundary) -> float:
    b = np.asarray(boundary, dtype=np.float64)
    if len(b) < 3:
        return 0.0
    y, x = b[:, 0], b[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def border_irregularity(mask) -> float:
    """``1 - 4 pi A / P**2`` from the traced outer boundary.

    ``A`` is the area enclosed by the boundary chain (pixel centres), which
    is the area that ``P`` actually bounds; a square then scores exactly
    ``1 - pi/4``. A lone pixel scores 0 and a chain enclosing no area
    (a line) scores 1.
    """
    _points(mask)
    comp = largest_component(np.asarray(mask, dtype=bool), connectivity=8)
    boundary = trace_boundary(comp)
    p = perimeter(boundary)
    if p == 0:
        return 0.0
    a = polygon_area(boundary)
    return float(min(max(1.0 - 4.0 * math.pi * a / p**2, 0.0), 1.0))


def color_variegation(img, mask) -> float:
    """Mean per-channel population standard deviation over the lesion, over 127.5."""
    mask = np.asarray(mask, dtype=bool)
    _points(mask)
    pix = as_rgb(img)[mask].astype(np.float64)
    sigma = pix.std(axis=0)
    return float(min(max(sigma.sum() / (3 * 127.5), 0.0), 1.0))


def diameter(mask, mm_per_pixel=None):
    """Largest distance between two lesion pixel centres (Feret diameter).

    Returns pixels, or ``(pixels, mm)`` when a scale is given.
    """
    rows, cols = _points(mask)
    pts = np.unique(np.stack([rows, cols], axis=1), axis=0)
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear: fall back to all points
    diff = pts[:, None, :] - pts[None, :, :]
    d = float(math.sqrt(int((diff**2).sum(axis=2).max())))
    if mm_per_pixel is None:
        return d
    return d, d * mm_per_pixel


def extract_features(sample: LesionSample) -> FeatureVector:
    """A, B, C, D of the largest 8-connected component of the sample's mask."""
    comp = largest_component(np.asarray(sample.mask, dtype=bool), connectivity=8)
    d = diameter(comp)
    return FeatureVector(
        a=asymmetry(comp),
        b=border_irregularity(comp),
        c=color_variegation(sample.img, comp),
        d=d,
        d_mm=None if sample.mm_per_pixel is None else d * sample.mm_per_pixel,
    )
