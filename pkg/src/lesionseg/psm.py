"""Parameter selection (PSM) and maximum-area (MAM) lesion segmentation.

PSM sweeps the boost parameter ``c`` of a high-boost filter over a grid,
segments each filtered blue channel with Otsu, and tracks the mean lesion
intensity ``M(c)``. The three grid points where ``M`` accelerates most (largest
second difference) plus ``c = 0`` are the candidates; the winner is the one
whose mean is closest to the darker-cluster mean of a 2-means split.

MAM runs PSM on the raw blue channel and on two saturating normalizations of
it (by the whole-image mean and by the background mean) and keeps the
largest mask.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imgcore import BIT_DEPTH, convolve3x3, extract_channel, high_boost_kernel, quantize, saturating_scale
from .segment import (
    DegenerateHistogramError,
    PostprocessConfig,
    histogram256,
    kmeans2_lesion_mean,
    otsu_threshold,
    postprocess_mask,
)

MAM_BRANCHES = ("PSM", "PSMW", "PSMB")


@dataclass(frozen=True)
class PsmConfig:
    c_max: float = 15.0
    delta_c: float = 0.2
    epsilon: float = 0.0

    def __post_init__(self):
        # c_max = 0 (a one-point grid) is allowed: PSM then reduces to B-Otsu
        if self.c_max < 0:
            raise ValueError("c_max must be >= 0")
        if not self.delta_c > 0:
            raise ValueError("delta_c must be > 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")

    def grid(self) -> np.ndarray:
        n = int(math.floor(self.c_max / self.delta_c + 1e-9)) + 1
        return np.arange(n) * self.delta_c


@dataclass
class MeanCurve:
    cs: np.ndarray
    means: np.ndarray
    masks: list

    def __len__(self):
        return len(self.cs)


@dataclass
class PsmResult:
    chosen_c: float
    mask: np.ndarray
    candidates: list
    candidate_means: list
    reference_mean: float
    curve: MeanCurve | None = None


@dataclass
class MamResult:
    winner: str
    mask: np.ndarray
    areas: dict
    m_w: float
    m_b: float | None
    branches: dict = field(default_factory=dict)

    @property
    def chosen_c(self):
        return self.branches[self.winner].chosen_c


def lesion_mean(plane, mask) -> float:
    """Mean of the unfiltered plane over the lesion mask.

    M(c) is measured on the input plane rather than the filtered one so it is
    directly comparable with the 2-means reference mean.
    """
    return float(np.asarray(plane, dtype=np.float64)[mask].mean())


def _segment_at(plane, c, post):
    filtered = quantize(convolve3x3(plane, high_boost_kernel(c)))
    t = otsu_threshold(histogram256(filtered))
    return postprocess_mask(filtered <= t, post)


def sweep_mean_curve(plane, cfg: PsmConfig = PsmConfig(), post: PostprocessConfig = PostprocessConfig(),
                     mapper=map) -> MeanCurve:
    """Evaluate ``M(c)`` and the Otsu lesion mask at every grid point.

    Grid points are independent; pass e.g. ``executor.map`` as ``mapper`` to
    evaluate them in parallel (results are merged in grid order). A
    degenerate histogram at ``c > 0`` records an empty mask and carries the
    previous mean forward; at ``c = 0`` it is an error.
    """
    plane = np.asarray(plane, dtype=np.float64)
    cs = cfg.grid()

    def one(c):
        try:
            return _segment_at(plane, c, post)
        except DegenerateHistogramError:
            if c == 0:
                raise
            return None

    masks, means = [], []
    for c, mask in zip(cs, mapper(one, cs)):
        if mask is None or not mask.any():
            masks.append(np.zeros(plane.shape, dtype=bool))
            means.append(means[-1])
        else:
            masks.append(mask)
            means.append(lesion_mean(plane, mask))
    return MeanCurve(cs=cs, means=np.asarray(means), masks=masks)


def second_differences(means, delta_c: float) -> np.ndarray:
    m = np.asarray(means, dtype=np.float64)
    return (m[2:] - 2.0 * m[1:-1] + m[:-2]) / delta_c**2


def select_candidates(curve: MeanCurve, k: int = 3) -> list:
    """The ``k`` interior grid values with the largest second difference of ``M``.

    Values that agree to 1e-9 (in units of M, before dividing by the grid
    step) count as ties, which go to the smaller ``c``.
    """
    means = np.asarray(curve.means, dtype=np.float64)
    if len(means) < 3:
        return []
    raw = means[2:] - 2.0 * means[1:-1] + means[:-2]
    keyed = np.round(raw, 9)
    order = sorted(range(len(raw)), key=lambda i: (-keyed[i], i))
    return [float(curve.cs[i + 1]) for i in order[:k]]


def psm_segment(plane, cfg: PsmConfig = PsmConfig(), post: PostprocessConfig = PostprocessConfig(),
                mapper=map) -> PsmResult:
    curve = sweep_mean_curve(plane, cfg, post, mapper=mapper)
    reference = kmeans2_lesion_mean(plane)
    index = {float(c): i for i, c in enumerate(curve.cs)}

    candidates = [0.0] + [c for c in select_candidates(curve) if c != 0.0]
    cand_means = [float(curve.means[index[c]]) for c in candidates]
    # ties go to the smaller c
    best = min(range(len(candidates)), key=lambda i: (abs(cand_means[i] - reference), candidates[i]))
    chosen = candidates[best]
    return PsmResult(
        chosen_c=chosen,
        mask=curve.masks[index[chosen]],
        candidates=candidates,
        candidate_means=cand_means,
        reference_mean=reference,
        curve=curve,
    )


def normalization_factor(mean: float, epsilon: float = 0.0) -> float:
    """``2**(n-1) * (1 + epsilon) / mean`` for an n-bit channel."""
    return 2 ** (BIT_DEPTH - 1) * (1.0 + epsilon) / mean


def mam_segment(img, cfg: PsmConfig = PsmConfig(), post: PostprocessConfig = PostprocessConfig(),
                mapper=map) -> MamResult:
    """Largest of the PSM masks on the raw, whole-normalized and
    background-normalized blue channel.

    The background is the complement of the raw-channel PSM mask. A branch
    that cannot be computed (degenerate histogram, zero mean, no background)
    is left out; if every branch fails the last error is raised. Area ties
    resolve in the order PSM, PSMW, PSMB.
    """
    blue = extract_channel(img, "B").astype(np.float64)
    branches: dict[str, PsmResult] = {}
    errors: list[Exception] = []

    def attempt(name, plane):
        try:
            branches[name] = psm_segment(plane, cfg, post, mapper=mapper)
        except (DegenerateHistogramError, ValueError) as exc:
            errors.append(exc)

    attempt("PSM", blue)

    m_w = float(blue.mean())
    m_b = None
    if "PSM" in branches:
        background = ~branches["PSM"].mask
        if background.any():
            m_b = float(blue[background].mean())

    if m_w > 0:
        attempt("PSMW", saturating_scale(blue, normalization_factor(m_w, cfg.epsilon)))
    if m_b is not None and m_b > 0:
        attempt("PSMB", saturating_scale(blue, normalization_factor(m_b, cfg.epsilon)))

    if not branches:
        raise errors[-1] if errors else DegenerateHistogramError("all MAM branches failed")

    areas = {name: (int(branches[name].mask.sum()) if name in branches else None) for name in MAM_BRANCHES}
    winner = max((n for n in MAM_BRANCHES if n in branches),
                 key=lambda n: (areas[n], -MAM_BRANCHES.index(n)))
    return MamResult(winner=winner, mask=branches[winner].mask, areas=areas,
                     m_w=m_w, m_b=m_b, branches=branches)
