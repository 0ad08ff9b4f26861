import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lesionseg.classify import (
    BENIGN,
    MALIGNANT,
    LabeledFeatures,
    TrainedClassifier,
    candidate_thresholds,
    kfold_predict,
    predict,
    score,
    simplex_grid,
    train,
)
from lesionseg.features import FeatureVector


def make_data(X, y):
    return [LabeledFeatures(FeatureVector(*x, d=0.0), MALIGNANT if t else BENIGN) for x, t in zip(X, y)]


def brute_train(X, y, step=0.05):
    """Exhaustive (weight, threshold) search written without the vectorized helpers."""
    n = round(1 / step)
    best = None
    for i in range(n + 1):
        for j in range(n + 1 - i):
            w = (i / n, j / n, (n - i - j) / n)
            s = [x[0] * w[0] + x[1] * w[1] + x[2] * w[2] for x in X]
            u = sorted(set(s))
            ts = sorted(set([0.0, 1.0] + [(a + b) / 2 for a, b in zip(u, u[1:])]))
            npos = sum(y)
            nneg = len(y) - npos
            local = None
            for t in ts:
                tp = sum(1 for si, yi in zip(s, y) if yi and si >= t)
                tn = sum(1 for si, yi in zip(s, y) if not yi and si < t)
                sens, spec = tp / npos, tn / nneg
                d = math.hypot(1 - sens, 1 - spec)
                if local is None:
                    local = (d, tp, t, sens, spec)
                    continue
                dmin = min(local[0], d)
                # track the minimum distance, ties by higher tp then lower t
                if d < local[0] - 1e-12 or (abs(d - local[0]) <= 1e-12 and tp > local[1]):
                    local = (d, tp, t, sens, spec)
            # re-run the per-weight rule exactly: min distance first, then ties
            cands = []
            for t in ts:
                tp = sum(1 for si, yi in zip(s, y) if yi and si >= t)
                tn = sum(1 for si, yi in zip(s, y) if not yi and si < t)
                cands.append((math.hypot(1 - tp / npos, 1 - tn / nneg), tp, t, tn))
            dmin = min(c[0] for c in cands)
            near = [c for c in cands if c[0] <= dmin + 1e-12]
            d, tp, t, tn = min(near, key=lambda c: (-c[1], c[2]))
            cand = (w, t, tp, d)
            if best is None or tp > best[2] or (tp == best[2] and d < best[3] - 1e-12):
                best = cand
    return best[0], best[1]


def test_score_examples():
    assert score((1, 1, 1), (0.2, 0.3, 0.5)) == pytest.approx(1.0)
    assert score((0, 0, 0), (0.2, 0.3, 0.5)) == 0
    assert score((0.5, 0.2, 0.8), (0.5, 0.3, 0.2)) == pytest.approx(0.47)


def test_predict_threshold_convention():
    clf = TrainedClassifier(1.0, 0.0, 0.0, 0.5)
    assert predict(clf, (0.5, 0, 0)) == MALIGNANT
    assert predict(clf, (0.0, 1, 1)) == BENIGN
    assert predict(TrainedClassifier(0, 0, 1, 1.0), (0, 0, 1)) == MALIGNANT


def test_classifier_validation_and_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        TrainedClassifier(0.5, 0.5, 0.5, 0.2)
    with pytest.raises(ValueError):
        TrainedClassifier(1, 0, 0, 1.5)
    clf = TrainedClassifier(0.15, 0.35, 0.5, 0.123456789, 0.9, 0.8)
    clf.save(tmp_path / "m.txt")
    assert TrainedClassifier.load(tmp_path / "m.txt") == clf
    (tmp_path / "bad.txt").write_text("w_a=1\n")
    with pytest.raises(ValueError):
        TrainedClassifier.load(tmp_path / "bad.txt")


def test_grid_and_thresholds():
    g = simplex_grid(0.05)
    assert len(g) == 231 and g[0] == (0.0, 0.0, 1.0) and g == sorted(g)
    assert all(abs(sum(w) - 1) < 1e-9 for w in g)
    assert list(candidate_thresholds([0.2, 0.4, 0.4])) == pytest.approx([0.0, 0.3, 1.0])
    with pytest.raises(ValueError):
        simplex_grid(0.3)


def test_two_point_example():
    data = make_data([(1, 0, 0), (0, 0, 0)], [1, 0])
    clf = train(data)
    assert clf.w_a > 0
    assert 0 < clf.threshold < clf.w_a
    assert clf.train_sens == clf.train_spec == 1


def test_single_class_rejected():
    with pytest.raises(ValueError):
        train(make_data([(0.1, 0.2, 0.3)], [1]))
    with pytest.raises(ValueError):
        train(make_data([(0.1, 0.2, 0.3), (0.3, 0.3, 0.3)], [0, 0]))


def test_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(4):
        X = np.round(rng.random((20, 3)), 2)
        y = rng.random(20) < 0.4
        y[0], y[1] = True, False
        clf = train(make_data(X, y))
        w, t = brute_train(X.tolist(), y.tolist())
        assert clf.weights == w and clf.threshold == t


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_separable_data_reaches_corner(seed):
    rng = np.random.default_rng(seed)
    benign = rng.uniform(0, 0.4, (8, 3))
    malignant = rng.uniform(0.6, 1.0, (8, 3))
    clf = train(make_data(np.vstack([benign, malignant]), [0] * 8 + [1] * 8))
    assert clf.train_sens == 1 and clf.train_spec == 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((12, 3))
    y = rng.random(12) < 0.5
    y[0], y[1] = True, False
    data = make_data(X, y)
    perm = rng.permutation(12)
    assert train(data) == train([data[i] for i in perm])


def test_parallel_training_is_identical():
    from concurrent.futures import ThreadPoolExecutor
    rng = np.random.default_rng(3)
    data = make_data(rng.random((25, 3)), rng.random(25) < 0.5)
    with ThreadPoolExecutor(4) as pool:
        assert train(data, mapper=pool.map) == train(data)


def test_predict_monotone():
    clf = TrainedClassifier(0.3, 0.3, 0.4, 0.5)
    rng = np.random.default_rng(0)
    for _ in range(200):
        f = rng.random(3)
        g = f.copy()
        g[rng.integers(3)] += rng.random()
        if predict(clf, f) == MALIGNANT:
            assert predict(clf, g) == MALIGNANT


def test_kfold():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.uniform(0, 0.3, (10, 3)), rng.uniform(0.7, 1, (10, 3))])
    data = make_data(X, [0] * 10 + [1] * 10)
    preds = kfold_predict(data, 5, seed=1)
    assert preds == [d.label for d in data]
    assert preds == kfold_predict(data, 5, seed=1)
    with pytest.raises(ValueError):
        kfold_predict(data, 11)
