import math

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from fracqv.errors import DomainError
from fracqv.models import (
    AfbmSegment,
    BifBm,
    ConstantProfile,
    Fbm,
    PiecewiseProfile,
    SmoothProfile,
    afbm_segment_cov,
    bifbm_cov,
    bifbm_segment_cov,
    c_norm,
    cov_grid,
    fbm_cov,
    lambda_weight,
    model_from_dict,
    model_to_dict,
)

# 40-digit reference values
BIFBM_2_1 = 0.57690971208643024737
SQRT_2PI = 2.5066282746310005024
SQRT_4PI = 3.5449077018110320546
LAMBDA_HALF = 0.024933892525089542371

hurst = st.floats(0.02, 0.98)
times = st.floats(0.0, 3.0)


def test_fbm_cov_examples():
    assert fbm_cov(1.0, 1.0, 0.5) == 1.0
    assert fbm_cov(1.0, 0.5, 0.7) == pytest.approx(0.5, abs=1e-15)
    assert fbm_cov(0.3, 0.3, 0.2) == pytest.approx(0.3**0.4, rel=1e-15)


@pytest.mark.parametrize("h", [0.0, 1.0, -0.1, 1.5])
def test_fbm_cov_rejects_index(h):
    with pytest.raises(DomainError):
        fbm_cov(1.0, 1.0, h)


@given(times, times, hurst)
def test_fbm_cov_symmetric(s, t, h):
    assert fbm_cov(s, t, h) == fbm_cov(t, s, h)


def test_bifbm_cov_examples():
    assert bifbm_cov(1.0, 1.0, 0.5, 1.0) == 1.0
    assert bifbm_cov(0.0, 0.0, 0.3, 0.4) == 0.0
    assert bifbm_cov(2.0, 1.0, 0.6, 0.5) == pytest.approx(BIFBM_2_1, rel=1e-14)


def test_bifbm_cov_negative_time():
    with pytest.raises(DomainError):
        bifbm_cov(-1.0, 1.0, 0.5, 0.5)


@settings(max_examples=100)
@given(times, times, hurst)
def test_bifbm_k_one_reduces_to_fbm(s, t, h):
    assert abs(bifbm_cov(s, t, h, 1.0) - fbm_cov(s, t, h)) < 1e-12


def test_bifbm_segment_cov():
    m = BifBm(0.6, 0.5, 1.0, 2.0)
    assert bifbm_segment_cov(0.0, 0.0, m) == bifbm_cov(1.0, 1.0, 0.6, 0.5)
    m = BifBm(0.5, 0.5, 1.0, 3.0)
    assert bifbm_segment_cov(0.5, 0.25, m) == pytest.approx(bifbm_cov(2.0, 1.5, 0.5, 0.5), rel=1e-15)


@pytest.mark.parametrize(
    "args",
    [(0.0, 0.5, 1.0, 2.0), (0.5, 1.0, 1.0, 2.0), (0.5, 0.5, 0.0, 2.0), (0.5, 0.5, 2.0, 1.0)],
)
def test_bifbm_model_invariants(args):
    with pytest.raises(DomainError):
        BifBm(*args)


def test_c_norm_values():
    assert c_norm(1, 0.5) == pytest.approx(SQRT_2PI, rel=1e-14)
    assert c_norm(2, 0.5) == pytest.approx(SQRT_4PI, rel=1e-14)
    hs = np.linspace(0.05, 0.95, 901)
    vals = np.array([c_norm(1, h) for h in hs])
    assert np.all(np.isfinite(vals))
    assert np.max(np.abs(np.diff(vals)) / vals[:-1]) < 0.01


def test_lambda_weight():
    m = AfbmSegment(ConstantProfile(0.5), omega=0.3)
    assert lambda_weight(0.3 + math.pi / 2, m) == pytest.approx(0.0, abs=1e-15)
    th = np.linspace(0, 2 * math.pi, 17)
    assert np.allclose(lambda_weight(th, m), lambda_weight(th + math.pi, m), rtol=1e-12)
    m0 = AfbmSegment(ConstantProfile(0.5))
    assert lambda_weight(0.0, m0) == pytest.approx(LAMBDA_HALF, rel=1e-13)


PROFILES = [
    ConstantProfile(0.6),
    PiecewiseProfile((0.0, math.pi / 2), (0.4, 0.65)),
    SmoothProfile(math.pi / 3, 0.35, 0.8, 0.5),
]


@pytest.mark.parametrize("prof", PROFILES, ids=["constant", "piecewise", "smooth"])
def test_profile_even_and_periodic(prof):
    th = np.linspace(-3, 3, 41)
    assert np.allclose(prof(th), prof(th + math.pi))
    vals = prof(np.linspace(0, math.pi, 200))
    assert np.all((vals > 0) & (vals < 1))
    assert vals.min() >= prof.h_min - 1e-15


def test_smooth_profile_symmetric_case_is_even():
    prof = SmoothProfile(0.0, 0.4, 0.6)
    th = np.linspace(-3, 3, 41)
    assert np.allclose(prof(th), prof(-th))


def test_smooth_profile_checks():
    with pytest.raises(DomainError):
        SmoothProfile(0.5, 0.4, -1.0)
    with pytest.raises(DomainError):
        SmoothProfile(0.5, 0.4, 0.1, 1.0)
    # custom function with wrong stored second derivative
    f = lambda th: 0.4 + 0.25 * np.sin(th - 0.5) ** 2  # noqa: E731
    SmoothProfile(0.5, 0.4, 0.5, 0.0, func=f)
    with pytest.raises(DomainError):
        SmoothProfile(0.5, 0.4, 0.9, 0.0, func=f)


def test_piecewise_profile_checks():
    with pytest.raises(DomainError):
        PiecewiseProfile((1.0, 0.5), (0.4, 0.6))
    with pytest.raises(DomainError):
        PiecewiseProfile((0.0, 4.0), (0.4, 0.6))
    p = PiecewiseProfile((0.5, 2.0), (0.3, 0.7))
    assert p(0.1) == 0.7  # wraps around from the last breakpoint
    assert p.measure(lambda h: h == 0.3) == pytest.approx(1.5)


def test_afbm_singular_direction_rejected():
    prof = SmoothProfile(0.2, 0.4, 0.6)
    with pytest.raises(DomainError):
        AfbmSegment(prof, omega=0.2 + math.pi / 2)


@pytest.mark.parametrize("prof", PROFILES, ids=["constant", "piecewise", "smooth"])
def test_afbm_cov_basic(prof):
    m = AfbmSegment(prof, omega=0.7)
    assert afbm_segment_cov(0.0, 0.0, m) == 0.0
    assert afbm_segment_cov(0.3, 0.8, m) == pytest.approx(afbm_segment_cov(0.8, 0.3, m), rel=1e-12)


def test_afbm_constant_profile_proportional_to_fbm():
    h = 0.35
    m = AfbmSegment(ConstantProfile(h), omega=0.0)
    mass, _ = integrate.quad(lambda th: float(lambda_weight(th, m)), 0, math.pi, points=[math.pi / 2], epsabs=1e-13)
    for s, t in [(0.2, 0.7), (1.0, 0.5), (0.9, 0.9)]:
        expected = 8.0 * mass * fbm_cov(s, t, h)
        assert afbm_segment_cov(s, t, m) == pytest.approx(expected, rel=1e-8)


def test_afbm_quadrature_stable_under_tolerance():
    m = AfbmSegment(SmoothProfile(math.pi / 3, 0.35, 0.8, 0.5), omega=1.0)
    v1, e1 = afbm_segment_cov(0.4, 0.9, m, tol=1e-10, full_output=True)
    v2, _ = afbm_segment_cov(0.4, 0.9, m, tol=5e-11, full_output=True)
    assert abs(v1 - v2) <= max(e1, 1e-10)


def test_cov_grid_brownian():
    g = cov_grid(Fbm(0.5), 4)
    j = np.arange(5)
    assert np.allclose(g.entries, np.minimum.outer(j, j) / 4, atol=1e-15)
    assert np.array_equal(g.times, j / 4)


def test_cov_grid_too_small():
    with pytest.raises(DomainError):
        cov_grid(Fbm(0.5), 3)


def test_cov_grid_bifbm_matches_pointwise():
    m = BifBm(0.6, 0.5, 1.0, 2.0)
    g = cov_grid(m, 8)
    t = np.arange(9) / 8
    assert np.allclose(g.entries, bifbm_segment_cov(t[:, None], t[None, :], m), rtol=1e-14)


MODELS = [
    Fbm(0.3),
    Fbm(0.8),
    BifBm(0.6, 0.5, 1.0, 2.0),
    AfbmSegment(ConstantProfile(0.5)),
    AfbmSegment(PiecewiseProfile((0.0, math.pi / 2), (0.4, 0.65)), omega=math.pi / 4),
    AfbmSegment(SmoothProfile(math.pi / 3, 0.35, 0.8, 0.5), omega=1.0),
]


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.tag)
def test_cov_grid_invariants(model):
    g = cov_grid(model, 8)
    R = g.entries
    assert np.array_equal(R, R.T)
    assert np.all(np.diag(R) >= 0)
    assert np.linalg.eigvalsh(R)[0] >= -1e-8 * np.diag(R).max()


@pytest.mark.parametrize("model", MODELS[:4], ids=lambda m: m.tag)
def test_cov_grid_psd_at_512(model):
    cov_grid(model, 512, check_psd=True)


def test_cov_grid_afbm_matches_pointwise():
    m = MODELS[-1]
    g = cov_grid(m, 6)
    for j, k in [(1, 5), (3, 3), (6, 2)]:
        assert g.entries[j, k] == pytest.approx(afbm_segment_cov(j / 6, k / 6, m), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.tag)
def test_model_dict_round_trip(model):
    assert model_from_dict(model_to_dict(model)) == model


@pytest.mark.parametrize(
    "doc",
    [{"model": "nope"}, {"model": "fbm"}, {"model": "fbm", "hurst": 0.5, "k": 1}, {"model": "afbm", "profile": {"kind": "x"}}],
)
def test_model_from_dict_errors(doc):
    with pytest.raises(DomainError):
        model_from_dict(doc)

