"""Conventional lesion segmenters and the primitives they share.

B-Otsu, Canny edge filling and two-phase Chan-Vese all return boolean masks
(``True`` = lesion) with the input's height and width. Lesions are assumed
darker than the surrounding skin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import disk

from .imgcore import MAX_LEVEL, extract_channel, luminance, quantize

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
EIGHT_CONNECTED = ndimage.generate_binary_structure(2, 2)


class DegenerateHistogramError(ValueError):
    """Raised when a histogram or plane has no meaningful two-class split."""


@dataclass(frozen=True)
class PostprocessConfig:
    closing_radius: int = 2
    keep_largest: bool = True

    def __post_init__(self):
        if self.closing_radius < 0:
            raise ValueError("closing_radius must be >= 0")


@dataclass(frozen=True)
class ChanVeseConfig:
    iterations: int = 1000
    init: str = "Large"
    mu: float = 0.25
    dt: float = 0.5

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.init != "Large":
            raise ValueError(f"unknown Chan-Vese initializer {self.init!r}")


# --------------------------------------------------------------------------
# Otsu

def histogram256(plane) -> np.ndarray:
    """Bin counts of an 8-bit plane (values are quantized first if needed)."""
    plane = np.asarray(plane)
    if plane.dtype != np.uint8:
        plane = quantize(plane)
    return np.bincount(plane.ravel(), minlength=MAX_LEVEL + 1).astype(np.int64)


def otsu_threshold(hist) -> int:
    """Level ``t`` maximizing between-class variance of the split ``{<=t} | {>t}``.

    Ties resolve to the smallest ``t``. Float scores only shortlist the
    candidates; the final comparison is exact integer arithmetic, so plateaus
    (empty bins between the two classes) tie exactly.
    """
    counts = np.asarray(hist, dtype=np.int64)
    if counts.shape != (MAX_LEVEL + 1,):
        raise ValueError("histogram must have 256 bins")
    if np.count_nonzero(counts) < 2:
        raise DegenerateHistogramError("no threshold exists: fewer than two occupied bins")

    levels = np.arange(MAX_LEVEL + 1, dtype=np.int64)
    n0 = np.cumsum(counts)
    s0 = np.cumsum(counts * levels)
    total, total_sum = int(n0[-1]), int(s0[-1])
    n1 = total - n0
    valid = (n0 > 0) & (n1 > 0)

    # sigma_b^2 * N^2 = (N*S0 - n0*S)^2 / (n0*n1)
    diff = total * s0.astype(np.float64) - n0 * float(total_sum)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(valid, diff * diff / (n0 * n1.astype(np.float64)), -1.0)
    best = score.max()
    shortlist = np.flatnonzero(score >= best * (1 - 1e-9))

    best_t, best_num, best_den = None, 0, 1
    for t in shortlist:
        d = total * int(s0[t]) - int(n0[t]) * total_sum
        num, den = d * d, int(n0[t]) * int(n1[t])
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = int(t), num, den
    return best_t


# --------------------------------------------------------------------------
# postprocessing

def fill_holes(mask) -> np.ndarray:
    """Background regions not 8-connected to the border become lesion."""
    return ndimage.binary_fill_holes(np.asarray(mask, dtype=bool), structure=EIGHT_CONNECTED)


def largest_component(mask, connectivity: int = 4) -> np.ndarray:
    """Keep the largest 4- (or 8-) connected component (first in raster order on ties)."""
    mask = np.asarray(mask, dtype=bool)
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    labels, n = ndimage.label(mask, structure=FOUR_CONNECTED if connectivity == 4 else EIGHT_CONNECTED)
    if n <= 1:
        return mask.copy()
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def binary_closing(mask, radius: int) -> np.ndarray:
    """Closing with a disk; zero padding keeps the result a superset of the input."""
    mask = np.asarray(mask, dtype=bool)
    if radius == 0:
        return mask.copy()
    footprint = disk(radius).astype(bool)
    padded = np.pad(mask, radius, mode="constant")
    closed = ndimage.binary_closing(padded, structure=footprint)
    return closed[radius:-radius, radius:-radius]


def postprocess_mask(mask, cfg: PostprocessConfig = PostprocessConfig()) -> np.ndarray:
    """Closing, hole filling, then (optionally) largest-component selection."""
    out = fill_holes(binary_closing(mask, cfg.closing_radius))
    if cfg.keep_largest:
        out = largest_component(out)
    return out


# --------------------------------------------------------------------------
# B-Otsu

def otsu_dark_mask(plane) -> np.ndarray:
    """Pixels at or below the Otsu level of a plane (quantized to 8 bits)."""
    q = np.asarray(plane)
    if q.dtype != np.uint8:
        q = quantize(q)
    return q <= otsu_threshold(histogram256(q))


def segment_b_otsu(img, post: PostprocessConfig = PostprocessConfig()) -> np.ndarray:
    return postprocess_mask(otsu_dark_mask(extract_channel(img, "B")), post)


# --------------------------------------------------------------------------
# 2-means

def kmeans2_lesion_mean(plane, tol: float = 1e-6, max_iter: int = 500) -> float:
    """Mean of the darker cluster of a 1-D 2-means on the pixel intensities.

    Centres start at the 25th and 75th percentiles (or the extremes when those
    coincide) and follow Lloyd updates until they move less than ``tol``.
    """
    values = np.asarray(plane, dtype=np.float64).ravel()
    lo, hi = values.min(), values.max()
    if lo == hi:
        raise DegenerateHistogramError("2-means needs at least two distinct values")
    c0, c1 = np.percentile(values, [25, 75])
    if c0 == c1:
        c0, c1 = lo, hi

    for _ in range(max_iter):
        dark = np.abs(values - c0) <= np.abs(values - c1)
        if dark.all() or not dark.any():
            # an empty cluster means the split collapsed; restart from extremes
            c0, c1 = lo, hi
            continue
        n0, n1 = values[dark].mean(), values[~dark].mean()
        moved = max(abs(n0 - c0), abs(n1 - c1))
        c0, c1 = n0, n1
        if moved < tol:
            break
    return float(min(c0, c1))


# --------------------------------------------------------------------------
# Canny edge filling

def _non_max_suppression(mag, gx, gy):
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    out = np.zeros_like(mag, dtype=bool)
    # (row, col) offset of the neighbour along the gradient for each sector
    sectors = [
        ((angle < 22.5) | (angle >= 157.5), (0, 1)),
        ((angle >= 22.5) & (angle < 67.5), (1, 1)),
        ((angle >= 67.5) & (angle < 112.5), (1, 0)),
        ((angle >= 112.5) & (angle < 157.5), (1, -1)),
    ]
    for sel, (dr, dc) in sectors:
        fwd = padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        bwd = padded[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        # asymmetric comparison keeps plateau ridges one pixel wide
        out |= sel & (mag >= fwd) & (mag > bwd)
    return out & (mag > 0)


def canny_edges(gray, sigma: float = 1.4, low_ratio: float = 0.4):
    """Canny edge map with hysteresis levels derived from an Otsu split of |grad|.

    The high level is the Otsu level of the gradient-magnitude histogram
    (magnitudes rescaled to 0..255); the low level is ``low_ratio`` times it.
    """
    smoothed = ndimage.gaussian_filter(np.asarray(gray, dtype=np.float64), sigma, mode="nearest")
    gx = ndimage.sobel(smoothed, axis=1, mode="nearest")
    gy = ndimage.sobel(smoothed, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 1e-9:
        return np.zeros(mag.shape, dtype=bool)
    try:
        level = otsu_threshold(histogram256(mag / peak * MAX_LEVEL))
    except DegenerateHistogramError:
        return np.zeros(mag.shape, dtype=bool)
    high = level / MAX_LEVEL * peak
    low = low_ratio * high

    thin = _non_max_suppression(mag, gx, gy)
    weak = thin & (mag >= low)
    strong = thin & (mag > high)
    labels, n = ndimage.label(weak, structure=EIGHT_CONNECTED)
    if n == 0:
        return weak
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]


def fill_edge_map(edges) -> np.ndarray:
    """Turn a closed edge contour into a filled region.

    Edges are dilated by one pixel so single-pixel gaps close, interior holes
    are filled, and the dilation is then undone by a matching erosion.
    """
    grown = ndimage.binary_dilation(edges, structure=EIGHT_CONNECTED)
    filled = fill_holes(grown)
    return ndimage.binary_erosion(filled, structure=EIGHT_CONNECTED, border_value=1)


def segment_canny_fill(img, post: PostprocessConfig = PostprocessConfig()) -> np.ndarray:
    edges = canny_edges(luminance(img))
    if not edges.any():
        return edges
    return postprocess_mask(fill_edge_map(edges), post)


# --------------------------------------------------------------------------
# Chan-Vese

HEAVISIDE_EPS = 1.0
GRAD_EPS = 1e-8


def _heaviside(phi):
    return 0.5 * (1.0 + (2.0 / np.pi) * np.arctan(phi / HEAVISIDE_EPS))


def _dirac(phi):
    return (HEAVISIDE_EPS / np.pi) / (HEAVISIDE_EPS**2 + phi**2)


def _dirac_prime(phi):
    return -2.0 * phi * (HEAVISIDE_EPS / np.pi) / (HEAVISIDE_EPS**2 + phi**2) ** 2


def _gradient_adjoint(v, axis):
    """Transpose of ``np.gradient`` along ``axis`` (unit spacing, first-order edges)."""
    v = np.moveaxis(v, axis, 0)
    n = v.shape[0]
    out = np.zeros_like(v)
    if n == 1:
        return np.moveaxis(out, 0, axis)
    if n == 2:
        out[0] = -v[0] - v[1]
        out[1] = v[0] + v[1]
        return np.moveaxis(out, 0, axis)
    # interior rows i contribute 0.5*v[i] to i+1 and -0.5*v[i] to i-1
    out[2:] += 0.5 * v[1:-1]
    out[:-2] -= 0.5 * v[1:-1]
    out[0] -= v[0]
    out[1] += v[0]
    out[-1] += v[-1]
    out[-2] -= v[-1]
    return np.moveaxis(out, 0, axis)


def _region_means(image, h):
    inside, outside = h.sum(), (1.0 - h).sum()
    c1 = (h * image).sum() / inside if inside > 0 else 0.0
    c2 = ((1.0 - h) * image).sum() / outside if outside > 0 else 0.0
    return c1, c2


def chan_vese_energy(image, phi, mu: float) -> float:
    """Regularized two-phase piecewise-constant Mumford-Shah energy, per pixel."""
    h = _heaviside(phi)
    c1, c2 = _region_means(image, h)
    gy, gx = np.gradient(phi)
    length = (_dirac(phi) * np.sqrt(gx * gx + gy * gy + GRAD_EPS)).sum()
    fit = (h * (image - c1) ** 2).sum() + ((1.0 - h) * (image - c2) ** 2).sum()
    return float((mu * length + fit) / image.size)


def chan_vese_gradient(image, phi, mu: float) -> np.ndarray:
    """Exact gradient of :func:`chan_vese_energy` (times the pixel count).

    The region means are optimal for the current ``phi``, so their own
    derivatives drop out. In the continuum the length part reduces to the
    familiar ``-dirac(phi) * curvature``.
    """
    d = _dirac(phi)
    c1, c2 = _region_means(image, _heaviside(phi))
    gy, gx = np.gradient(phi)
    norm = np.sqrt(gx * gx + gy * gy + GRAD_EPS)
    length = (_dirac_prime(phi) * norm
              + _gradient_adjoint(d * gx / norm, axis=1)
              + _gradient_adjoint(d * gy / norm, axis=0))
    fit = d * ((image - c1) ** 2 - (image - c2) ** 2)
    return mu * length + fit


def large_init(shape) -> np.ndarray:
    """Centred rectangle covering 90% of each dimension."""
    h, w = shape
    mask = np.zeros(shape, dtype=bool)
    ih, iw = max(1, round(0.9 * h)), max(1, round(0.9 * w))
    top, left = (h - ih) // 2, (w - iw) // 2
    mask[top:top + ih, left:left + iw] = True
    return mask


def _signed_distance(mask):
    # positive inside; |phi| >= 0.5 everywhere so the zero set sits between pixels
    return (ndimage.distance_transform_edt(mask) - ndimage.distance_transform_edt(~mask)
            - (mask.astype(np.float64) - 0.5))


def chan_vese_evolve(image, cfg: ChanVeseConfig = ChanVeseConfig(), stall_tol: float = 1e-4,
                     window: int = 50, max_halvings: int = 12):
    """Evolve a level set by normalized gradient descent on the Chan-Vese energy.

    The gradient is preconditioned by ``1 / dirac(phi)`` so the fitting force
    acts with full strength away from the current contour (new boundaries can
    nucleate anywhere), then scaled so its largest entry moves ``phi`` by
    ``cfg.dt``. A positive diagonal preconditioner keeps it a descent
    direction, so halving the step (at most ``max_halvings`` times) until the
    energy does not increase always terminates; the evolution ends when no
    decreasing step exists. It also ends once fewer
    than ``stall_tol`` of the pixels changed phase over the last ``window``
    steps.

    Returns ``(phi, energies)`` where ``energies[k]`` is the energy after
    ``k`` accepted steps.
    """
    image = np.asarray(image, dtype=np.float64)
    phi = _signed_distance(large_init(image.shape))
    energy = chan_vese_energy(image, phi, cfg.mu)
    energies = [energy]
    history = [phi > 0]
    min_changed = stall_tol * image.size

    for _ in range(cfg.iterations):
        direction = -chan_vese_gradient(image, phi, cfg.mu) / _dirac(phi)
        peak = np.abs(direction).max()
        if peak == 0:
            break
        direction /= peak

        step, accepted = cfg.dt, None
        for _ in range(max_halvings + 1):
            candidate = phi + step * direction
            cand_energy = chan_vese_energy(image, candidate, cfg.mu)
            if cand_energy <= energy:
                accepted = candidate
                break
            step *= 0.5
        if accepted is None:
            break

        phi, energy = accepted, cand_energy
        energies.append(energy)
        history.append(phi > 0)
        if len(history) > window:
            old = history.pop(0)
            if np.count_nonzero(old != history[-1]) < min_changed:
                break
    return phi, energies


def segment_chan_vese(img, cfg: ChanVeseConfig = ChanVeseConfig(),
                      post: PostprocessConfig = PostprocessConfig()) -> np.ndarray:
    gray = luminance(img)
    phi, _ = chan_vese_evolve(gray, cfg)
    inside = phi > 0
    if inside.all() or not inside.any():
        return np.zeros(gray.shape, dtype=bool)
    m_in, m_out = gray[inside].mean(), gray[~inside].mean()
    if m_in == m_out:
        return np.zeros(gray.shape, dtype=bool)
    lesion = inside if m_in < m_out else ~inside
    return postprocess_mask(lesion, post)
