"""Segmentation and classification scoring: Jaccard index, pairwise
comparison with a dead band, confusion metrics, overlays and the summary
tables printed by the command line."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import BENIGN, MALIGNANT

BETTER, SIMILAR, WORSE = "better", "similar", "worse"

YELLOW = (255, 255, 0)
BLUE = (0, 0, 255)
RED = (255, 0, 0)


def _same_shape(s, e):
    s = np.asarray(s, dtype=bool)
    e = np.asarray(e, dtype=bool)
    if s.shape != e.shape:
        raise ValueError(f"mask shapes differ: {s.shape} vs {e.shape}")
    return s, e


def jaccard(s, e) -> float:
    """``|S & E| / |S | E|``; two empty masks count as identical (1)."""
    s, e = _same_shape(s, e)
    union = np.count_nonzero(s | e)
    if union == 0:
        return 1.0
    return np.count_nonzero(s & e) / union


@dataclass(frozen=True)
class ComparisonVerdict:
    j1: float
    j2: float
    j12: float
    verdict: str


def compare(j1: float, j2: float, delta: float = 0.1) -> ComparisonVerdict:
    """Relative Jaccard gain of method 1 over method 2 and its verdict.

    ``j12 = (j1 - j2) / max(j1, j2)``; better above ``delta``, worse below
    ``-delta``, similar otherwise. Two zero indices compare as similar.
    """
    for j in (j1, j2):
        if not 0.0 <= j <= 1.0:
            raise ValueError(f"Jaccard index out of [0, 1]: {j}")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    top = max(j1, j2)
    j12 = 0.0 if top == 0 else (j1 - j2) / top
    if j12 > delta:
        verdict = BETTER
    elif j12 < -delta:
        verdict = WORSE
    else:
        verdict = SIMILAR
    return ComparisonVerdict(j1, j2, j12, verdict)


def verdict_counts(verdicts) -> tuple[int, int, int]:
    """(better, similar, worse) counts."""
    v = [x.verdict if isinstance(x, ComparisonVerdict) else x for x in verdicts]
    return v.count(BETTER), v.count(SIMILAR), v.count(WORSE)


@dataclass(frozen=True)
class ConfusionReport:
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    sensitivity: float
    specificity: float


def _ratio(num, den):
    return num / den if den else math.nan


def confusion(preds, truth) -> ConfusionReport:
    """Counts and ratios with malignant as the positive class. A ratio whose
    denominator is zero is NaN."""
    preds, truth = list(preds), list(truth)
    if len(preds) != len(truth):
        raise ValueError("predictions and truth differ in length")
    if not truth:
        raise ValueError("no samples")
    for lab in preds + truth:
        if lab not in (BENIGN, MALIGNANT):
            raise ValueError(f"unknown label {lab!r}")
    tp = sum(p == MALIGNANT and t == MALIGNANT for p, t in zip(preds, truth))
    tn = sum(p == BENIGN and t == BENIGN for p, t in zip(preds, truth))
    fp = sum(p == MALIGNANT and t == BENIGN for p, t in zip(preds, truth))
    fn = sum(p == BENIGN and t == MALIGNANT for p, t in zip(preds, truth))
    return report_from_counts(tp, tn, fp, fn)


def report_from_counts(tp, tn, fp, fn) -> ConfusionReport:
    return ConfusionReport(tp, tn, fp, fn,
                           accuracy=_ratio(tp + tn, tp + tn + fp + fn),
                           sensitivity=_ratio(tp, tp + fn),
                           specificity=_ratio(tn, tn + fp))


def render_overlay(s, e) -> np.ndarray:
    """Yellow where both agree, blue for expert only, red for segmentation only."""
    s, e = _same_shape(s, e)
    out = np.zeros(s.shape + (3,), dtype=np.uint8)
    out[s & e] = YELLOW
    out[e & ~s] = BLUE
    out[s & ~e] = RED
    return out


# --------------------------------------------------------------------------
# summary tables

def format_comparison_table(rows) -> str:
    """``rows``: iterable of (method1, method2, (better, similar, worse)).

    One line per pair, read as "method1 is <better> <similar> <worse> method2".
    """
    rows = list(rows)
    w1 = max([len("Method 1")] + [len(r[0]) for r in rows])
    w2 = max([len("Method 2")] + [len(r[1]) for r in rows])
    lines = [f"{'Method 1':<{w1}}     {'Better':>6} {'Similar':>7} {'Worse':>6}  {'Method 2':<{w2}}"]
    for m1, m2, (b, s, w) in rows:
        lines.append(f"{m1:<{w1}}  is {b:>6} {s:>7} {w:>6}  {m2:<{w2}}")
    return "\n".join(lines)


def format_jaccard_ranking(means) -> str:
    """``means``: {method: (mean Jaccard, n)}; methods listed best first."""
    order = sorted(means, key=lambda m: (-means[m][0], m))
    w = max([len("Method")] + [len(m) for m in order])
    lines = [f"{'Method':<{w}}  {'Mean J':>6}  {'n':>5}"]
    for m in order:
        j, n = means[m]
        lines.append(f"{m:<{w}}  {j:6.4f}  {n:>5}")
    lines.append("ordering: " + " > ".join(order))
    return "\n".join(lines)


def _fmt(x):
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.4f}"


def format_classification_table(rows) -> str:
    """``rows``: iterable of (method, ConfusionReport). Columns: Acc., Sens., Spec."""
    rows = list(rows)
    w = max([len("Method")] + [len(r[0]) for r in rows])
    lines = [f"{'Method':<{w}}  {'Acc.':>6}  {'Sens.':>6}  {'Spec.':>6}"]
    for method, r in rows:
        lines.append(f"{method:<{w}}  {_fmt(r.accuracy):>6}  {_fmt(r.sensitivity):>6}  {_fmt(r.specificity):>6}")
    return "\n".join(lines)
