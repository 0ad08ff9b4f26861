"""Weighted-ROC thresholding of the score ``w_a*A + w_b*B + w_c*C``.

Training sweeps convex weight triples on a simplex grid. For each triple the
threshold whose (sensitivity, specificity) lies closest to (1, 1) is kept;
over all triples the most sensitive kept point wins.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureVector

MALIGNANT = "malignant"
BENIGN = "benign"
TIE_EPS = 1e-12


@dataclass(frozen=True)
class TrainedClassifier:
    w_a: float
    w_b: float
    w_c: float
    threshold: float
    train_sens: float | None = None
    train_spec: float | None = None

    def __post_init__(self):
        w = self.weights
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights must be nonnegative and sum to 1, got {w}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")

    @property
    def weights(self):
        return (self.w_a, self.w_b, self.w_c)

    def save(self, path) -> None:
        lines = [f"w_a={self.w_a!r}", f"w_b={self.w_b!r}", f"w_c={self.w_c!r}",
                 f"threshold={self.threshold!r}"]
        if self.train_sens is not None:
            lines.append(f"train_sens={self.train_sens!r}")
        if self.train_spec is not None:
            lines.append(f"train_spec={self.train_spec!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "TrainedClassifier":
        values = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            values[key.strip()] = float(value)
        missing = {"w_a", "w_b", "w_c", "threshold"} - set(values)
        if missing:
            raise ValueError(f"{path}: missing keys {sorted(missing)}")
        return cls(values["w_a"], values["w_b"], values["w_c"], values["threshold"],
                   values.get("train_sens"), values.get("train_spec"))


@dataclass(frozen=True)
class LabeledFeatures:
    features: FeatureVector
    label: str


def _abc(f):
    return f.abc() if isinstance(f, FeatureVector) else tuple(f)[:3]


def score(f, w) -> float:
    a, b, c = _abc(f)
    return w[0] * a + w[1] * b + w[2] * c


def predict(clf: TrainedClassifier, f) -> str:
    """Malignant iff the score reaches the threshold (ties classify malignant)."""
    return MALIGNANT if score(f, clf.weights) >= clf.threshold else BENIGN


def simplex_grid(grid_step: float = 0.05):
    """Weight triples ``(i, j, k) / n`` with ``i + j + k = n``, ``n = 1/grid_step``,
    in lexicographic order."""
    n = round(1.0 / grid_step)
    if n < 1 or abs(n * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step must divide 1, got {grid_step}")
    return [(i / n, j / n, (n - i - j) / n) for i in range(n + 1) for j in range(n + 1 - i)]


def candidate_thresholds(scores) -> np.ndarray:
    u = np.unique(np.asarray(scores, dtype=np.float64))
    mids = (u[:-1] + u[1:]) / 2.0
    return np.unique(np.concatenate([[0.0], mids, [1.0]]))


def _as_arrays(data):
    X = np.array([_abc(d.features) for d in data], dtype=np.float64).reshape(-1, 3)
    labels = [d.label for d in data]
    bad = sorted(set(labels) - {MALIGNANT, BENIGN})
    if bad:
        raise ValueError(f"unknown labels {bad}")
    y = np.array([lab == MALIGNANT for lab in labels], dtype=bool)
    return X, y


def _best_for_weight(X, y, w):
    """(sens, spec, dist, threshold) of the point closest to (1, 1) for one triple."""
    s = X[:, 0] * w[0] + X[:, 1] * w[1] + X[:, 2] * w[2]
    thresholds = candidate_thresholds(s)
    pos = np.sort(s[y])
    neg = np.sort(s[~y])
    # s >= t is malignant
    tp = len(pos) - np.searchsorted(pos, thresholds, side="left")
    tn = np.searchsorted(neg, thresholds, side="left")
    sens = tp / len(pos)
    spec = tn / len(neg)
    dist = np.hypot(1.0 - sens, 1.0 - spec)
    near = np.flatnonzero(dist <= dist.min() + TIE_EPS)
    # higher sensitivity, then lower threshold (thresholds ascend)
    i = min(near, key=lambda k: (-tp[k], k))
    return float(sens[i]), float(spec[i]), float(dist[i]), float(thresholds[i]), int(tp[i])


def train(data, grid_step: float = 0.05, mapper=map) -> TrainedClassifier:
    """Fit weights and threshold on labelled feature vectors.

    ``mapper`` may be a parallel map; the reduction below does not depend on
    completion order.
    """
    X, y = _as_arrays(data)
    if len(y) == 0 or y.all() or not y.any():
        raise ValueError("training data must contain both benign and malignant samples")
    weights = simplex_grid(grid_step)
    results = list(mapper(lambda w: _best_for_weight(X, y, w), weights))

    best = None
    for w, (sens, spec, dist, thr, tp) in zip(weights, results):
        if best is None:
            best = (w, sens, spec, dist, thr, tp)
            continue
        _, _, _, bdist, _, btp = best
        if tp > btp or (tp == btp and dist < bdist - TIE_EPS):
            best = (w, sens, spec, dist, thr, tp)
        # equal sensitivity and distance: the earlier (lexicographically smaller) triple stays
    w, sens, spec, _, thr, _ = best
    return TrainedClassifier(w[0], w[1], w[2], thr, sens, spec)


def kfold_predict(data, k: int, seed: int = 0, grid_step: float = 0.05, mapper=map) -> list:
    """Out-of-fold predictions from stratified ``k``-fold cross-validation."""
    X, y = _as_arrays(data)
    if k < 2 or k > min(y.sum(), (~y).sum()):
        raise ValueError(f"k must be between 2 and the size of the smaller class, got {k}")
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    for cls in (True, False):
        idx = rng.permutation(np.flatnonzero(y == cls))
        fold[idx] = np.arange(len(idx)) % k
    preds = [None] * len(y)
    for f in range(k):
        held = np.flatnonzero(fold == f)
        clf = train([data[i] for i in np.flatnonzero(fold != f)], grid_step, mapper)
        for i in held:
            preds[i] = predict(clf, X[i])
    return preds

