import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lesionseg.dataset import Phantom, make_phantom
from lesionseg.evaluation import jaccard
from lesionseg.segment import (
    ChanVeseConfig,
    DegenerateHistogramError,
    PostprocessConfig,
    canny_edges,
    chan_vese_energy,
    chan_vese_evolve,
    fill_holes,
    histogram256,
    kmeans2_lesion_mean,
    large_init,
    largest_component,
    otsu_dark_mask,
    otsu_threshold,
    postprocess_mask,
    segment_b_otsu,
    segment_canny_fill,
    segment_chan_vese,
)
from lesionseg.imgcore import luminance


def brute_otsu(hist):
    # exact rational between-class variance for every split, smallest t on ties
    from fractions import Fraction
    hist = [int(v) for v in hist]
    total = sum(hist)
    best, best_t = None, None
    for t in range(255):
        n0 = sum(hist[: t + 1])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        m0 = Fraction(sum(i * hist[i] for i in range(t + 1)), n0)
        m1 = Fraction(sum(i * hist[i] for i in range(t + 1, 256)), n1)
        var = Fraction(n0 * n1, total * total) * (m0 - m1) ** 2
        if best is None or var > best:
            best, best_t = var, t
    return best_t


def test_otsu_bimodal():
    hist = np.zeros(256, np.int64)
    hist[50], hist[200] = 10, 10
    assert otsu_threshold(hist) == 50


def test_otsu_matches_brute_force_on_random_planes():
    rng = np.random.default_rng(1)
    for _ in range(25):
        plane = rng.integers(0, 256, (16, 16))
        hist = histogram256(plane.astype(np.uint8))
        assert otsu_threshold(hist) == brute_otsu(hist)


def test_otsu_degenerate():
    hist = np.zeros(256, np.int64)
    hist[17] = 5
    with pytest.raises(DegenerateHistogramError):
        otsu_threshold(hist)
    with pytest.raises(ValueError):
        otsu_threshold(np.zeros(10))


def test_b_otsu_two_tone():
    img, truth, _ = make_phantom(Phantom(kind="two_tone"))
    assert jaccard(segment_b_otsu(img), truth) == 1.0


def test_b_otsu_disk():
    img, truth, _ = make_phantom(Phantom(kind="disk"))
    assert jaccard(segment_b_otsu(img), truth) > 0.98


def test_otsu_dark_mask_is_dark_side():
    plane = np.array([[10, 10, 240, 240]], np.uint8)
    assert otsu_dark_mask(plane).tolist() == [[True, True, False, False]]


def test_kmeans_reference():
    plane = np.array([10.0] * 5 + [200.0] * 5)
    assert kmeans2_lesion_mean(plane) == pytest.approx(10.0)
    plane = np.array([0.0, 2.0, 4.0, 100.0, 102.0])
    assert kmeans2_lesion_mean(plane) == pytest.approx(2.0)
    with pytest.raises(DegenerateHistogramError):
        kmeans2_lesion_mean(np.ones(5))


def test_fill_holes_and_largest_component():
    ring = np.zeros((7, 7), bool)
    ring[1:6, 1:6] = True
    ring[3, 3] = False
    assert fill_holes(ring)[3, 3]
    two = np.zeros((6, 6), bool)
    two[0, 0] = True
    two[3:6, 3:6] = True
    assert largest_component(two).sum() == 9


def test_postprocess_closes_gaps():
    mask = np.zeros((20, 20), bool)
    mask[5:15, 5:15] = True
    mask[9, 7:13] = False  # a 1-px crack inside the block
    out = postprocess_mask(mask, PostprocessConfig(closing_radius=2))
    assert out[5:15, 5:15].all()


@settings(max_examples=40, deadline=None)
@given(arrays(bool, (12, 12)))
def test_postprocess_idempotent(mask):
    once = postprocess_mask(mask)
    assert np.array_equal(postprocess_mask(once), once)


def test_postprocess_config_validation():
    with pytest.raises(ValueError):
        PostprocessConfig(closing_radius=-1)


def test_canny_on_disk():
    img, truth, _ = make_phantom(Phantom(kind="disk"))
    edges = canny_edges(luminance(img))
    # edges hug the true boundary
    assert edges.sum() > 0
    from scipy import ndimage
    boundary = truth ^ ndimage.binary_erosion(truth)
    near = ndimage.binary_dilation(boundary, iterations=2)
    assert (edges & near).sum() / edges.sum() > 0.95
    assert jaccard(segment_canny_fill(img), truth) > 0.9


def test_canny_constant_image():
    assert not canny_edges(np.full((20, 20), 5.0)).any()
    assert not segment_canny_fill(np.full((20, 20, 3), 5, np.uint8)).any()


def test_chan_vese_energy_monotone_and_converges():
    img, truth, _ = make_phantom(Phantom(kind="disk", height=60, width=60, radius=15))
    gray = luminance(img)
    phi, energies = chan_vese_evolve(gray, ChanVeseConfig(iterations=400))
    assert all(b <= a + 1e-9 for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]
    assert chan_vese_energy(gray, phi, 0.25) == pytest.approx(energies[-1])


def test_chan_vese_segments_disk():
    img, truth, _ = make_phantom(Phantom(kind="disk"))
    assert jaccard(segment_chan_vese(img), truth) > 0.97


def test_chan_vese_constant_image_is_empty():
    img = np.full((30, 30, 3), 120, np.uint8)
    assert not segment_chan_vese(img, ChanVeseConfig(iterations=50)).any()


def test_chan_vese_config_validation():
    with pytest.raises(ValueError):
        ChanVeseConfig(iterations=0)
    with pytest.raises(ValueError):
        ChanVeseConfig(init="Small")
    assert large_init((10, 10)).shape == (10, 10)
