import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermochaos.errors import Divergence, InvalidParams, LevelOutOfRange, SelfIntersection
from thermochaos.imaging import radial_signal
from thermochaos.nonlinear import extract_features
from thermochaos.synth import (
    BENIGN,
    MALIGNANT,
    ContourParams,
    deep_embedding,
    gen_contour,
    henon_series,
    koch_curve,
    lesion_corpus,
    logistic_series,
    sine,
    white_noise,
)


def test_koch_level0_is_segment():
    np.testing.assert_array_equal(koch_curve(0), [[0, 0], [1, 0]])


def test_koch_level1_bump():
    p = koch_curve(1)
    assert len(p) == 5
    np.testing.assert_allclose(p[2], [0.5, math.sqrt(3) / 6], atol=1e-15)
    np.testing.assert_allclose(p[[1, 3]], [[1 / 3, 0], [2 / 3, 0]], atol=1e-15)


@pytest.mark.parametrize("level", range(0, 7))
def test_koch_counts_and_segment_lengths(level):
    p = koch_curve(level)
    assert len(p) == 4 ** level + 1
    seg = np.hypot(*np.diff(p, axis=0).T)
    np.testing.assert_allclose(seg, 3.0 ** -level, rtol=1e-9)
    np.testing.assert_array_equal(p[[0, -1]], [[0, 0], [1, 0]])


def test_koch_level_range():
    for bad in (-1, 9):
        with pytest.raises(LevelOutOfRange):
            koch_curve(bad)


def test_logistic_rejects_bad_params():
    for kw in ({"r": 0.0}, {"r": 4.1}, {"r": 3.0, "x0": 1.0}, {"r": 3.0, "x0": 0.0}):
        with pytest.raises(InvalidParams):
            logistic_series(n=10, **kw)


def test_logistic_recurrence():
    x = logistic_series(3.7, 50, x0=0.2, burn_in=0)
    np.testing.assert_allclose(x[1:], 3.7 * x[:-1] * (1 - x[:-1]), rtol=1e-15)
    assert x[0] == pytest.approx(3.7 * 0.2 * 0.8)


def test_henon_recurrence_and_b0_reduction():
    x = henon_series(30, burn_in=0)
    y = 0.3 * np.r_[0.1, x[:-1]]
    np.testing.assert_allclose(x[1:], 1 - 1.4 * x[:-1] ** 2 + y[:-1], rtol=1e-12)
    q = henon_series(20, a=1.2, b=0.0, burn_in=5)
    np.testing.assert_allclose(q[1:], 1 - 1.2 * q[:-1] ** 2, rtol=1e-12)
    np.testing.assert_array_equal(henon_series(100), henon_series(100))


def test_henon_divergence():
    with pytest.raises(Divergence):
        henon_series(100, x0=5.0, y0=0.0)


@given(st.integers(2, 500), st.integers(0, 2**32 - 1))
def test_white_noise_normalised_and_seeded(n, seed):
    x = white_noise(n, seed)
    assert abs(x.mean()) < 1e-12
    assert x.std() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(x, white_noise(n, seed))


@given(st.integers(1, 64), st.integers(1, 400), st.floats(0.1, 10), st.floats(0, 6.3))
def test_sine_exactly_periodic(period, n, amp, phase):
    x = sine(n + period, period, amp, phase)
    np.testing.assert_array_equal(x[period:], x[:-period])


def test_circle_when_flat():
    les = gen_contour(ContourParams(BENIGN, base_radius=40, amp=0.0))
    v = radial_signal(les.contour).values
    assert (v.max() - v.min()) / v.mean() < 0.08
    assert les.mask.sum() == pytest.approx(math.pi * 40 ** 2, rel=0.02)


def test_self_intersection():
    with pytest.raises(SelfIntersection):
        gen_contour(ContourParams(MALIGNANT, amp=1.0))
    with pytest.raises(SelfIntersection):
        gen_contour(ContourParams(BENIGN, amp=1.5))


def test_bad_params():
    with pytest.raises(InvalidParams):
        gen_contour(ContourParams("other"))
    with pytest.raises(InvalidParams):
        gen_contour(ContourParams(n_points=32))


@pytest.mark.parametrize("seed", range(12))
def test_matched_pair_malignant_more_complex(seed):
    b = extract_features(gen_contour(ContourParams(BENIGN, 40, 256, 0.3, 0.8, seed)).mask)
    m = extract_features(gen_contour(ContourParams(MALIGNANT, 40, 256, 0.3, 0.8, seed)).mask)
    assert m.apen > b.apen
    assert m.bcd > b.bcd


def test_matched_pair_area():
    b = gen_contour(ContourParams(BENIGN, 45, 256, 0.2, 0.7, 3))
    m = gen_contour(ContourParams(MALIGNANT, 45, 256, 0.2, 0.7, 3))
    target = math.pi * 45 ** 2
    assert b.mask.sum() == pytest.approx(target, rel=0.02)
    assert m.mask.sum() == pytest.approx(target, rel=0.02)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([BENIGN, MALIGNANT]), st.floats(50, 70), st.floats(0.0, 0.15),
       st.floats(0.5, 1.2), st.integers(0, 10_000))
def test_mask_reproduces_radius_function(kind, radius, amp, decay, seed):
    les = gen_contour(ContourParams(kind, radius, 256, amp, decay, seed))
    pts = les.contour.astype(float)
    cx, cy = les.center
    theta = np.arctan2(-(pts[:, 1] - cy), pts[:, 0] - cx)
    truth = les.radius(theta)
    sig = radial_signal(les.contour).values
    rms = math.sqrt(np.mean((sig - truth) ** 2))
    assert rms < 0.02 * radius


def _recovery_error(radius, amp, decay, seed):
    les = gen_contour(ContourParams(MALIGNANT, radius, 256, amp, decay, seed))
    pts = les.contour.astype(float)
    cx, cy = les.center
    truth = les.radius(np.arctan2(-(pts[:, 1] - cy), pts[:, 0] - cx))
    return math.sqrt(np.mean((radial_signal(les.contour).values - truth) ** 2)) / radius


@pytest.mark.xfail(strict=True, reason="at the default amplitude the contour-point centroid drifts "
                   "off the generating center and steep harmonics alias, so some masks exceed 2%")
def test_radius_recovery_at_default_amplitude():
    errs = [_recovery_error(50, 0.3, d, s) for s in range(10) for d in (0.5, 0.75, 1.0)]
    assert max(errs) < 0.02


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([BENIGN, MALIGNANT]), st.integers(0, 2**31 - 1))
def test_generators_deterministic(kind, seed):
    a = gen_contour(ContourParams(kind, 35, 256, 0.2, 0.8, seed))
    b = gen_contour(ContourParams(kind, 35, 256, 0.2, 0.8, seed))
    np.testing.assert_array_equal(a.mask, b.mask)
    np.testing.assert_array_equal(a.contour, b.contour)


def test_corpus_layout_and_embedding():
    lesions, y = lesion_corpus(3, seed=5)
    np.testing.assert_array_equal(y, [0, 1, 0, 1, 0, 1])
    for b, m in zip(lesions[0::2], lesions[1::2]):
        assert b.params.seed == m.params.seed
        assert b.params.base_radius == m.params.base_radius
        assert (b.params.class_kind, m.params.class_kind) == (BENIGN, MALIGNANT)
    D = deep_embedding(lesions, dim=64, seed=1)
    assert D.shape == (6, 64)
    np.testing.assert_array_equal(D, deep_embedding(lesions, dim=64, seed=1))
    assert not np.array_equal(D, deep_embedding(lesions, dim=64, seed=2))
