import json
import math

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given
from hypothesis import strategies as st

from fracqv import asymptotics as asy
from fracqv.errors import DomainError, RegimeError
from fracqv.models import AfbmSegment, ConstantProfile, PiecewiseProfile, SmoothProfile, lambda_weight

RHO_1_2 = 0.33979807359079494580  # 10 log 2 - 6 log 3
RHO_05_3 = 0.077414977340407778002

SMOOTH = AfbmSegment(SmoothProfile(math.pi / 3, 0.35, 0.8, 0.5), omega=1.0)
TWO_LEVEL = AfbmSegment(PiecewiseProfile((0.0, math.pi / 2), (0.4, 0.65)), omega=math.pi / 4)


def test_rho_examples():
    assert asy.rho(1.0, 2) == pytest.approx(RHO_1_2, rel=1e-13)
    assert asy.rho(0.5, 3) == pytest.approx(RHO_05_3, rel=1e-13)


@pytest.mark.parametrize("gamma", [0.3, 1.0, 1.7])
@pytest.mark.parametrize("lag", [2, 5, 10])
def test_rho_matches_quadrature(gamma, lag):
    assert abs(asy.rho(gamma, lag) - asy.rho_numeric(gamma, lag)) < 1e-8


def test_rho_numeric_lag_domain():
    with pytest.raises(DomainError):
        asy.rho_numeric(0.5, 1)


@pytest.mark.parametrize("gamma", [0.3, 0.8, 1.0, 1.4, 1.9])
def test_rho_decay(gamma):
    ls = np.arange(4, 201)
    r = np.abs(asy.rho(gamma, ls)) * ls ** (2.0 + gamma)
    assert np.all(np.isfinite(r))
    assert r.max() < 2.0 * r[-1] + 1.0


def test_rho_near_one_is_continuous():
    ls = np.arange(2, 12)
    at_one = asy.rho(1.0, ls)
    for d in (1e-7, -1e-7, 2e-6, -2e-6):
        assert np.allclose(asy.rho(1.0 + d, ls), at_one, rtol=1e-5, atol=0)


def test_rho_series_branch_continuous():
    # lags 5 and 6 sit on either side of the switch between closed form and series
    for g in (0.3, 1.0, 1.7):
        r = asy.rho(g, [4, 5, 6, 7])
        assert np.all(np.diff(np.sign(r)) == 0)


def test_rho_at_one_diverges_at_small_lags():
    with pytest.raises(DomainError):
        asy.rho(1.0, 0)
    with pytest.raises(DomainError):
        asy.rho(2.0, 3)
    with pytest.raises(DomainError):
        asy.rho(0.5, -1)


@given(st.floats(0.03, 0.97).filter(lambda h: abs(h - 0.5) > 1e-3))
def test_extended_rho_identities(h):
    gamma = 2.0 - 2.0 * h
    c = asy.fbm_c(h)
    assert abs(c * asy.rho(gamma, 0) - asy.fbm_g0(h)) < 1e-10
    assert abs(c * asy.rho(gamma, 1) - asy.fbm_gtilde(h)) < 1e-10


def test_rho_norm_sq():
    val, bound, lmax = asy.rho_norm_sq(1.0, full_output=True)
    assert val >= RHO_1_2**2
    assert bound < 1e-12
    partial = np.cumsum(asy.rho(1.0, np.arange(2, 200)) ** 2)
    assert np.all(np.diff(partial) >= 0)
    assert partial[-1] <= val + 1e-15
    _, bound, lmax = asy.rho_norm_sq(0.3, full_output=True)
    assert bound < 1e-12
    k = 1.5
    assert k * k * 1e4 ** (-3.6) / 3.6 < 1e-12


def test_sigma_general_trivial():
    assert asy.sigma_sq_general(0.0, 0.0, 0.0, 0.7) == 0.0
    a = asy.sigma_sq_general(1.0, 0.0, 0.0, 0.7)
    b = asy.sigma_sq_general(0.0, 1.0, 0.0, 0.7)
    c = asy.sigma_sq_general(0.0, 0.0, 1.0, 0.7)
    assert asy.sigma_sq_general(1.0, 1.0, 1.0, 0.7) == pytest.approx(a + b + c, rel=1e-15)
    ing = asy.Ingredients.constant(2.0, 0.0, 0.0)
    s1, s2, star = asy.sigma_covs_general(ing, 0.9)
    assert s1 == 0.0 and s2 == 0.0
    assert star == pytest.approx(3 * asy.sigma_sq_general(4.0, 0.0, 0.0, 0.9))


@pytest.mark.parametrize(
    "h,sig,s1,s2,star",
    [
        (0.5, 12.0, 2.0, -8.0, 6.0),
        (0.3, 20.69916, 5.73983, -15.23080, 6.91410),
        (0.7, 4.946324, 0.169307, -2.791327, 3.842969),
    ],
)
def test_fbm_constants(h, sig, s1, s2, star):
    tc = asy.fbm_constants(h)
    assert tc.gamma == pytest.approx(2 - 2 * h)
    assert tc.limit == pytest.approx(4 - 2 ** (2 * h))
    assert tc.sigma_sq == pytest.approx(sig, rel=1e-6)
    assert tc.sigma1_cov_sq == pytest.approx(s1, rel=1e-5, abs=1e-12)
    assert tc.sigma2_cov_sq == pytest.approx(s2, rel=1e-6)
    assert tc.sigma_star_sq == pytest.approx(star, rel=1e-6)


def test_fbm_half_ingredients():
    d = asy.fbm_constants(0.5).to_dict()
    assert d["gtilde"] == -1.0
    assert d["sigma_sq"] == 12.0
    assert d["slowly_varying"] == "unit"


@pytest.mark.parametrize("h", [0.2, 0.5, 0.9])
def test_sigma_matrix_structure(h):
    tc = asy.fbm_constants(h)
    S = tc.Sigma
    assert S[0][0] == tc.sigma_sq
    assert S[1][1] == tc.sigma_sq / 2
    assert S[0][1] == S[1][0] == 2 ** (tc.gamma - 2) * tc.sigma_star_sq


def test_bifbm_constants():
    tc = asy.bifbm_constants(0.6, 0.5, 1.0, 2.0)
    assert tc.limit == pytest.approx(3.5133073244197939, rel=1e-13)
    assert tc.gamma == pytest.approx(2 - 0.6)
    base = asy.fbm_constants(0.3)
    assert tc.sigma_sq == pytest.approx(2.0 * base.sigma_sq, rel=1e-12)


def test_bifbm_k_near_one_reduces_to_fbm():
    h = 0.7
    tc = asy.bifbm_constants(h, 1 - 1e-12, 3.0, 4.0)
    base = asy.fbm_constants(h)
    assert tc.limit == pytest.approx(base.limit, rel=1e-9)
    assert tc.sigma_sq == pytest.approx(base.sigma_sq, rel=1e-9)
    # the printed HK variance at K = 1 is the printed FBM variance
    assert tc.extras["var_hk_printed"] == pytest.approx(base.extras["var_h_printed"], rel=1e-9)


def test_afbm_constant_profile():
    m = AfbmSegment(ConstantProfile(0.45), omega=0.3)
    tc = asy.afbm_constants(m)
    assert tc.extras["case"] == "I"
    assert tc.phi(1e-3) == 0.0
    mass, _ = integrate.quad(lambda t: float(lambda_weight(t, m)), 0, math.pi, points=[0.3 + math.pi / 2])
    assert tc.extras["J"] == pytest.approx(8 * mass, rel=1e-9)
    assert tc.limit == pytest.approx((4 - 2**0.9) * tc.extras["J"], rel=1e-12)


def test_afbm_two_level_values():
    tc = asy.afbm_constants(TWO_LEVEL)
    assert tc.extras["J"] == pytest.approx(0.25382, rel=1e-4)
    assert tc.limit == pytest.approx(0.57335, rel=1e-4)
    # 0.65 is exactly H_min + 1/4, so the root-n bias stays finite
    assert tc.extras["case"] == "II"
    assert tc.extras["bias_sqrt_n_finite"]
    m = AfbmSegment(PiecewiseProfile((0.0, math.pi / 2), (0.4, 0.6)), omega=math.pi / 4)
    assert not asy.afbm_constants(m).extras["bias_sqrt_n_finite"]


def test_afbm_quarter_example_phi():
    lo = 0.4
    m = AfbmSegment(PiecewiseProfile((0.0, math.pi / 2), (lo, lo + 0.25)), omega=math.pi / 4)
    tc = asy.afbm_constants(m)
    j_hi = tc.extras["J_levels"][f"{lo + 0.25:.12g}"]
    for h in (1e-2, 1e-5):
        assert tc.phi(h) == pytest.approx((4 - 2 ** (2 * lo + 0.5)) * j_hi * math.sqrt(h), rel=1e-12)
    assert tc.extras["bias_sqrt_n_finite"]


def test_afbm_case_one():
    m = AfbmSegment(PiecewiseProfile((0.0, 1.0), (0.3, 0.6)), omega=0.2)
    tc = asy.afbm_constants(m)
    assert tc.extras["case"] == "I"
    assert tc.phi(1e-4) == 0.0


def test_lass_rejects_smooth_profile():
    with pytest.raises(RegimeError):
        asy.afbm_lass_constants(SMOOTH)
    with pytest.raises(RegimeError):
        asy.afbm_nonlass_constants(TWO_LEVEL)


def test_nonlass_constants():
    tc = asy.afbm_constants(SMOOTH)
    ex = tc.extras
    assert tc.slowly_varying == "inverse-sqrt-log"
    assert ex["G"] == pytest.approx(0.321233, rel=1e-5)
    assert tc.limit == pytest.approx(0.763088, rel=1e-5)
    assert abs(16 * math.sqrt(math.pi) * ex["sigma0"] - tc.limit) < 1e-12


def test_sigma1_vanishes_for_symmetric_profile():
    m = AfbmSegment(SmoothProfile(0.4, 0.3, 0.7), omega=0.4)
    assert asy.afbm_constants(m).extras["sigma1"] == 0.0


def test_laplace_curve_approaches_limit():
    tc = asy.afbm_constants(SMOOTH)
    hs = [1e-4, 1e-6, 1e-8, 1e-10, 1e-12]
    curve = asy.laplace_curve(SMOOTH, hs)
    gaps = np.abs(curve - tc.limit)
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] / tc.limit < 0.15


def test_laplace_fit_leading_term():
    tc = asy.afbm_constants(SMOOTH)
    coef = asy.laplace_expansion_fit(SMOOTH, np.logspace(-40, -10, 12), q=3)
    assert coef[0] == pytest.approx(tc.limit, rel=2e-3)


def test_variogram_limit():
    prof = SMOOTH.profile
    assert asy.variogram_limit(prof, (0.0, 0.0)) == 0.0
    a = prof.theta_star + math.pi / 2
    assert asy.variogram_limit(prof, (math.cos(a), math.sin(a))) == pytest.approx(0.0, abs=1e-9)
    t = (0.6, 0.8)
    lim = asy.variogram_limit(prof, t)
    ratios = []
    for eps in (1e-6, 1e-12):
        v = asy.variogram(prof, (eps * t[0], eps * t[1]))
        ratios.append(math.sqrt(-math.log(eps)) * v / eps ** (2 * prof.h_min) / lim)
    assert abs(ratios[0] - 1) < 0.15
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1)
    assert asy.variogram_limit(prof, t, form="printed") == pytest.approx(lim / 2)


def test_richardson_removes_orders():
    seq = [3.0 + 5.0 / n + 7.0 / n**2 for n in (100, 200, 400)]
    assert asy.richardson(seq) == pytest.approx(3.0, rel=1e-12)


def test_to_dict_is_plain_json():
    for tc in (asy.fbm_constants(0.3), asy.bifbm_constants(0.6, 0.5, 1, 2), asy.afbm_constants(TWO_LEVEL)):
        json.dumps(tc.to_dict())
