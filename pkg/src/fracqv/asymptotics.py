"""Closed-form asymptotic constants of second-order quadratic variations.

Every model here reduces to scaled FBM ingredients: the on-diagonal limit
``g0``, the lag-one limit ``gtilde`` and the diagonal ``C(t, t)`` of the
normalized fourth mixed derivative are constant in ``t`` and equal to a model
scale times their FBM values at the model's effective index.  The limiting
variances then follow from the lag correlations ``rho_gamma``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError, RegimeError
from .models import (
    AfbmSegment,
    BifBm,
    PiecewiseProfile,
    SmoothProfile,
    _piece_weights,
    _quad,
    c_norm,
    lambda_weight,
)

__all__ = [
    "rho",
    "rho_numeric",
    "rho_lag_sum",
    "rho_norm_sq",
    "Ingredients",
    "TheoreticalConstants",
    "sigma_sq_general",
    "sigma_covs_general",
    "sigma_matrix",
    "fbm_c",
    "fbm_g0",
    "fbm_gtilde",
    "fbm_ingredients",
    "fbm_constants",
    "bifbm_constants",
    "afbm_lass_constants",
    "afbm_nonlass_constants",
    "afbm_constants",
    "laplace_integral",
    "laplace_curve",
    "laplace_expansion_fit",
    "variogram",
    "variogram_limit",
    "richardson",
]

SERIES_TOL = 1e-12
NEAR_ONE = 1e-6
_SERIES_FROM = 6
_QUARTER = 0.25


# ---------------------------------------------------------------------------
# Lag correlations
# ---------------------------------------------------------------------------


def _check_gamma(gamma):
    if not 0.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in (0, 2), got {gamma!r}")


_W5 = np.array([1.0, -4.0, 6.0, -4.0, 1.0])


def _stencil(f, l):
    """Fourth central difference ``sum_j w_j f(|l + j|)`` for ``j = -2..2``."""
    pts = np.abs(l[:, None] + np.arange(-2, 3)[None, :]).astype(float)
    return f(pts) @ _W5


def _xlogx(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _xlog2x(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(np.where(x > 0, x, 1.0))
        return np.where(x > 0, x * lx * lx, 0.0)


def _series_coeffs(gamma):
    """Coefficients ``c_m`` with ``rho(l) = l^p sum_m c_m l^-m`` (even m >= 4).

    ``binom(p, m) / ((gamma-2)(gamma-1)gamma(gamma+1))`` is evaluated with the
    ``(gamma - 1)`` factor cancelled, so the expansion is regular at gamma = 1.
    """
    p = 2.0 - gamma
    den = (gamma - 2.0) * gamma * (gamma + 1.0)
    coeffs = []
    prod = -p * (p - 2.0) * (p - 3.0)  # -p * prod_{i=2}^{m-1} (p - i) at m = 4
    fact = 24.0
    m = 4
    while m <= 200:
        c = prod / (fact * den) * (2.0 ** (m + 1) - 8.0)
        coeffs.append((m, c))
        if m > 8 and abs(c) * _SERIES_FROM ** (-m) < 1e-20 * abs(coeffs[0][1]) * _SERIES_FROM**-4:
            break
        prod *= (p - m) * (p - m - 1.0)
        fact *= (m + 1.0) * (m + 2.0)
        m += 2
    return coeffs


def _rho_array(gamma, l):
    l = np.asarray(l, dtype=np.int64)
    out = np.empty(l.shape, dtype=float)
    small = l < _SERIES_FROM
    if np.any(small):
        ls = l[small]
        delta = gamma - 1.0
        vals = np.empty(ls.shape)
        use_log = ls >= 2 if abs(delta) < NEAR_ONE else np.zeros(ls.shape, dtype=bool)
        if gamma == 1.0 and np.any(ls < 2):
            raise DomainError("rho_1 diverges at lags 0 and 1")
        if np.any(use_log):
            a = 0.5 * _stencil(_xlogx, ls[use_log])
            b = _stencil(_xlog2x, ls[use_log])
            vals[use_log] = a - delta * (a / 2.0 + b / 4.0)
        if np.any(~use_log):
            p = 2.0 - gamma
            den = (gamma - 2.0) * (gamma - 1.0) * gamma * (gamma + 1.0)
            vals[~use_log] = _stencil(lambda x: x**p, ls[~use_log]) / den
        out[small] = vals
    if np.any(~small):
        lb = l[~small].astype(float)
        acc = np.zeros_like(lb)
        for m, c in reversed(_series_coeffs(gamma)):
            acc += c * lb ** (-m)
        out[~small] = lb ** (2.0 - gamma) * acc
    return out


def rho(gamma, l):
    """Lag-``l`` correlation constant ``rho_gamma(l)``.

    Defined by a fourth difference of ``|x|^(2-gamma)`` (or ``x log x`` at
    gamma = 1); lags 0 and 1 use the same closed form.  Large lags are summed
    from the binomial expansion, which avoids the ``l^4`` cancellation of the
    direct difference.
    """
    _check_gamma(gamma)
    arr = np.asarray(l)
    if np.any(arr < 0) or not np.all(np.equal(np.mod(arr, 1), 0)):
        raise DomainError("lags must be nonnegative integers")
    out = _rho_array(float(gamma), arr.reshape(-1)).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def rho_numeric(gamma, l, tol=1e-10):
    """Quadrature oracle for ``rho_gamma(l)``, ``l >= 2``.

    The two innermost integrals are done in closed form, leaving

        int_l^{l+1} du int_{u-1}^{u} G(v) dv,
        G(v) = (a(v-1) - 2 a(v) + a(v+1)) / (gamma (1 + gamma)),  a(z) = z^-gamma,

    which is integrated adaptively.
    """
    _check_gamma(gamma)
    if l < 2 or int(l) != l:
        raise DomainError("rho_numeric needs an integer lag >= 2")
    g = float(gamma)
    norm = g * (1.0 + g)

    def G(v):
        return ((v - 1.0) ** -g - 2.0 * v**-g + (v + 1.0) ** -g) / norm

    errs = []

    def inner(u):
        val, err = integrate.quad(G, u - 1.0, u, epsabs=tol / 100.0, epsrel=1e-13, limit=200)
        errs.append(err)
        return val

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(inner, l, l + 1.0, epsabs=tol / 10.0, epsrel=1e-13, limit=200)
    total = err + max(errs)
    if total > tol:
        raise NumericalError(f"rho_numeric({gamma}, {l}) reached only {total:.3g}", estimate=total)
    return val


def _lmax(gamma, shift, k_bound):
    e = 3.0 + 2.0 * gamma
    return int(math.ceil(shift + (SERIES_TOL * e / k_bound**2) ** (-1.0 / e))) + 1


@functools.lru_cache(maxsize=512)
def _lag_sum(gamma, shift, start):
    k_bound = 1.5
    while True:
        lmax = max(_lmax(gamma, shift, k_bound), start + 8)
        ls = np.arange(start - shift, lmax + 1)
        r = _rho_array(gamma, ls)
        prods = r[shift:] * r[: r.size - shift]
        tail_l = ls[max(4 - ls[0], 0) :]
        k_emp = float(np.max(np.abs(_rho_array(gamma, tail_l)) * tail_l.astype(float) ** (2.0 + gamma)))
        if k_emp <= k_bound:
            e = 3.0 + 2.0 * gamma
            bound = k_bound**2 * (lmax - shift) ** (-e) / e
            return math.fsum(prods), bound, lmax
        k_bound = 2.0 * k_emp


def rho_lag_sum(gamma, shift, start, full_output=False):
    """``sum_{l >= start} rho(l) rho(l - shift)`` truncated with a tail bound.

    The cutoff ``L_max`` makes ``sum_{l > L_max} K^2 (l - shift)^(-4 - 2 gamma)``
    smaller than ``1e-12``, with ``K`` bounding ``l^(2+gamma) |rho(l)|``.
    """
    _check_gamma(gamma)
    if start - shift < 0:
        raise DomainError("lag sum would reach negative lags")
    val, bound, lmax = _lag_sum(float(gamma), int(shift), int(start))
    return (val, bound, lmax) if full_output else val


def rho_norm_sq(gamma, full_output=False):
    """``||rho_gamma||^2 = sum_{l >= 2} rho_gamma(l)^2``."""
    return rho_lag_sum(gamma, 0, 2, full_output)


# ---------------------------------------------------------------------------
# Variance constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ingredients:
    """Integrals over [0, 1] of products of ``g0``, ``gtilde`` and ``C(t, t)``."""

    g0_sq: float
    gtilde_sq: float
    c_sq: float
    g0_gtilde: float
    g0_c: float
    gtilde_c: float

    def scaled(self, s):
        return Ingredients(*(s * s * v for v in self.__dict__.values()))

    @classmethod
    def constant(cls, g0, gtilde, c):
        return cls(g0 * g0, gtilde * gtilde, c * c, g0 * gtilde, g0 * c, gtilde * c)


def sigma_sq_general(g0_sq_int, gtilde_sq_int, c_diag_sq_int, gamma):
    """``2 int g0^2 + 4 int gtilde^2 + 4 ||rho||^2 int C(x, x)^2``."""
    return 2.0 * g0_sq_int + 4.0 * gtilde_sq_int + 4.0 * rho_norm_sq(gamma) * c_diag_sq_int


def sigma_covs_general(ing: Ingredients, gamma):
    """Return ``(sigma1_cov^2, sigma2_cov^2, sigma_star^2)``."""
    r2, r3 = rho(gamma, [2, 3])
    s1 = (
        2.0 * ing.gtilde_sq
        + 4.0 * r2 * ing.g0_c
        + 4.0 * r3 * ing.gtilde_c
        + 4.0 * ing.c_sq * rho_lag_sum(gamma, 2, 4)
    )
    s2 = 4.0 * ing.g0_gtilde + 4.0 * r2 * ing.gtilde_c + 4.0 * ing.c_sq * rho_lag_sum(gamma, 1, 3)
    sig = sigma_sq_general(ing.g0_sq, ing.gtilde_sq, ing.c_sq, gamma)
    return s1, s2, 3.0 * sig + s1 + 4.0 * s2


def sigma_matrix(sigma_sq, sigma_star_sq, gamma):
    """Limiting covariance of the normalized pair ``(V_n, V_2n)``."""
    off = 2.0 ** (gamma - 2.0) * sigma_star_sq
    return ((sigma_sq, off), (off, sigma_sq / 2.0))


def fbm_c(hurst):
    return -hurst * (2 * hurst - 1) * (2 * hurst - 2) * (2 * hurst - 3)


def fbm_g0(hurst):
    return 4.0 - 2.0 ** (2 * hurst)


def fbm_gtilde(hurst):
    return (2.0 ** (2 * hurst + 2) - 7.0 - 3.0 ** (2 * hurst)) / 2.0


def fbm_ingredients(hurst):
    return Ingredients.constant(fbm_g0(hurst), fbm_gtilde(hurst), fbm_c(hurst))


@dataclass(frozen=True)
class TheoreticalConstants:
    """Asymptotic constants of ``V_n`` for one model.

    ``scale`` multiplies every FBM ingredient at the effective ``index``
    (1 for FBM, the window factor for bifBm, ``J`` or ``G`` for the
    anisotropic segment).  ``limit`` is the almost-sure limit of the
    normalized variation.
    """

    model: str
    index: float
    gamma: float
    slowly_varying: str
    scale: float
    ingredients: Ingredients
    sigma_sq: float
    sigma1_cov_sq: float
    sigma2_cov_sq: float
    sigma_star_sq: float
    Sigma: tuple
    limit: float
    extras: dict = field(default_factory=dict)
    phi: Optional[Callable] = field(default=None, compare=False, repr=False)

    def to_dict(self):
        s = self.scale
        ing = self.ingredients
        out = {
            "model": self.model,
            "index": self.index,
            "gamma": self.gamma,
            "slowly_varying": self.slowly_varying,
            "scale": s,
            "g0": s * fbm_g0(self.index),
            "gtilde": s * fbm_gtilde(self.index),
            "c_diag": s * fbm_c(self.index),
            "g0_sq_integral": ing.g0_sq,
            "gtilde_sq_integral": ing.gtilde_sq,
            "c_diag_sq_integral": ing.c_sq,
            "g0_gtilde_integral": ing.g0_gtilde,
            "g0_c_integral": ing.g0_c,
            "gtilde_c_integral": ing.gtilde_c,
            "rho_norm_sq": rho_norm_sq(self.gamma),
            "sigma_sq": self.sigma_sq,
            "sigma1_cov_sq": self.sigma1_cov_sq,
            "sigma2_cov_sq": self.sigma2_cov_sq,
            "sigma_star_sq": self.sigma_star_sq,
            "Sigma": [list(r) for r in self.Sigma],
            "limit": self.limit,
        }
        out.update(self.extras)
        return _plain(out)


def _plain(obj):
    """Convert numpy scalars so the result serializes as plain JSON."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _build(model, index, scale, slowly_varying="unit", limit=None, extras=None, phi=None):
    gamma = 2.0 - 2.0 * index
    _check_gamma(gamma)
    ing = fbm_ingredients(index).scaled(scale)
    sig = sigma_sq_general(ing.g0_sq, ing.gtilde_sq, ing.c_sq, gamma)
    s1, s2, star = (float(v) for v in sigma_covs_general(ing, gamma))
    sig = float(sig)
    if not sig > 0.0:
        raise NumericalError(f"nonpositive limiting variance {sig}")
    return TheoreticalConstants(
        model=model,
        index=index,
        gamma=gamma,
        slowly_varying=slowly_varying,
        scale=scale,
        ingredients=ing,
        sigma_sq=sig,
        sigma1_cov_sq=s1,
        sigma2_cov_sq=s2,
        sigma_star_sq=star,
        Sigma=sigma_matrix(sig, star, gamma),
        limit=scale * fbm_g0(index) if limit is None else limit,
        extras=_plain(dict(extras or {})),
        phi=phi,
    )


def _ratio_var_printed(sig, star, index):
    return (3.0 * sig - 2.0 ** (2.0 - 2.0 * index) * star) / (4.0 * fbm_g0(index) * math.log(2.0))


def fbm_constants(hurst) -> TheoreticalConstants:
    """Constants for standard FBM: ``gamma = 2 - 2H``, limit ``4 - 2^{2H}``."""
    if not 0.0 < hurst < 1.0:
        raise DomainError("hurst must lie in (0, 1)")
    tc = _build("fbm", float(hurst), 1.0)
    tc.extras["hurst"] = float(hurst)
    tc.extras["var_h_printed"] = float(_ratio_var_printed(tc.sigma_sq, tc.sigma_star_sq, hurst))
    return tc


def bifbm_constants(hurst, k, t1, t2) -> TheoreticalConstants:
    """Constants for two-parameter FBM observed on ``[t1, t2]``.

    Every ingredient equals ``c = (t2 - t1)^{2HK} / 2^{K-1}`` times its FBM
    value at index ``HK``.  The printed variances of the three estimators and
    the ``eta`` coefficients are kept in ``extras``.
    """
    model = BifBm(hurst, k, t1, t2)
    hk = model.hk
    span = t2 - t1
    c = span ** (2 * hk) / 2.0 ** (k - 1)
    tc = _build("bifbm", hk, c)
    base = fbm_constants(hk)
    sig, star = base.sigma_sq, base.sigma_star_sq
    g0 = fbm_g0(hk)
    log2 = math.log(2.0)
    eta1 = 2.0 ** (2 * k - 2) * sig / (g0**2 * log2**2 * span ** (4 * hk))
    eta2 = 2.0 ** (k - 1) * (3 * sig - 2.0 ** (2 - 2 * hk) * star) / (4 * g0 * log2)
    eta3 = 2.0 ** (2 * k - 2) * (2.0 ** (-2 * hk) * star - sig) / (2 * g0**2 * log2**2 * span ** (2 * hk))
    eta_sq = hurst**2 / k**2 * eta1 + eta2 / k**2 - 2 * hurst / k**2 * eta3
    tc.extras.update(_plain(dict(
        hurst=hurst,
        k=k,
        t1=t1,
        t2=t2,
        hk=hk,
        eta1=eta1,
        eta2=eta2,
        eta3=eta3,
        eta_sq=eta_sq,
        var_hk_printed=(3 * sig - 2.0 ** (2 - 2 * hk) * star) / (2.0 ** (k + 1) * g0 * log2) * span ** (4 * hk),
        var_k_printed=sig / (g0**2 * log2**2),
        var_h_printed=span ** (4 * hk) / 2.0 ** (2 * (k - 1)) * eta_sq,
    )))
    return tc


# ---------------------------------------------------------------------------
# Anisotropic segment
# ---------------------------------------------------------------------------


def _lass_pieces(model: AfbmSegment):
    return list(_piece_weights(model))


def afbm_lass_constants(model: AfbmSegment) -> TheoreticalConstants:
    """Constants when the minimizing set of H has positive measure.

    Returns ``J`` (angular mass of the minimizing directions), the case
    label (``"I"`` when no direction has ``H`` in ``(H_min, H_min + 1/4]``),
    and the bias function ``phi(h)`` built from the intermediate directions.
    """
    prof = model.profile
    if isinstance(prof, SmoothProfile):
        raise RegimeError("smooth profiles have a null minimizing set; use afbm_nonlass_constants")
    pieces = _lass_pieces(model)
    hmin = prof.h_min
    J = 8.0 * math.fsum(w for h, w, _ in pieces if h == hmin)
    if not J > 0.0:
        raise RegimeError("minimizing set carries no angular weight")
    mid = [(h, w) for h, w, _ in pieces if hmin < h <= hmin + _QUARTER and w > 0.0]
    case = "II" if mid else "I"

    def phi(h):
        h = np.asarray(h, dtype=float)
        out = sum(8.0 * w * fbm_g0(hh) * np.abs(h) ** (2 * (hh - hmin)) for hh, w in mid)
        out = np.zeros_like(h) + out
        return float(out) if out.ndim == 0 else out

    levels = {}
    for h, w, _ in pieces:
        levels[h] = levels.get(h, 0.0) + 8.0 * w
    extras = {
        "J": J,
        "h_min": hmin,
        "case": case,
        "J_levels": {f"{h:.12g}": v for h, v in sorted(levels.items())},
        "bias_sqrt_n_finite": all(hh == hmin + _QUARTER for hh, _ in mid),
        "var_h_printed": J * _ratio_var_printed(*_fbm_pair(hmin), hmin),
    }
    return _build("afbm", hmin, J, extras=extras, phi=phi)


def _fbm_pair(index):
    b = fbm_constants(index)
    return b.sigma_sq, b.sigma_star_sq


def _lambda_scalar(model):
    return lambda th: float(lambda_weight(th, model))


def laplace_integral(model: AfbmSegment, h, truncate=False, tol=1e-12):
    """``I(h) = 8 int_0^pi Lambda (4 - 2^{2H}) h^{2(H - H_min)} dtheta``.

    With ``truncate`` only directions with ``H <= H_min + 1/4`` contribute.
    """
    prof = model.profile
    hmin = prof.h_min
    lam = _lambda_scalar(model)
    log_h = math.log(h)
    if isinstance(prof, SmoothProfile):

        def f(th):
            hh = float(prof(th))
            if truncate and hh > hmin + _QUARTER:
                return 0.0
            return lam(th) * fbm_g0(hh) * math.exp(2.0 * (hh - hmin) * log_h)

        pts = [model.singular_angle, prof.theta_star]
        if truncate:
            pts += _quarter_crossings(prof)
        val, _ = _quad(f, 0.0, math.pi, pts, tol)
        return 8.0 * val
    total = 0.0
    for hh, w, _ in _piece_weights(model):
        if truncate and hh > hmin + _QUARTER:
            continue
        total += 8.0 * w * fbm_g0(hh) * math.exp(2.0 * (hh - hmin) * log_h)
    return total


def _quarter_crossings(prof: SmoothProfile):
    """Directions where the profile crosses ``H_min + 1/4``."""
    from scipy.optimize import brentq

    level = prof.h_min + _QUARTER
    ts = prof.theta_star
    out = []
    for side in (1.0, -1.0):
        a, b = ts, ts + side * math.pi / 2
        fa, fb = float(prof(a)) - level, float(prof(b)) - level
        if fa * fb < 0:
            out.append(math.fmod(brentq(lambda t: float(prof(t)) - level, min(a, b), max(a, b)) + math.pi, math.pi))
    return out


def laplace_curve(model: AfbmSegment, h):
    """``sqrt(-log h) * I(h)``; tends to ``(4 - 2^{2H_min}) G`` as h -> 0."""
    hs = np.atleast_1d(np.asarray(h, dtype=float))
    out = np.array([math.sqrt(-math.log(x)) * laplace_integral(model, x) for x in hs])
    return float(out[0]) if np.ndim(h) == 0 else out


def afbm_nonlass_constants(model: AfbmSegment) -> TheoreticalConstants:
    """Laplace-method constants for a smooth profile with a unique minimum.

    ``G = 8 Lambda(theta*) sqrt(pi / H''(theta*))`` scales every FBM
    ingredient at ``H_min``; the slowly varying factor is ``1/sqrt(-log h)``.
    ``sigma1`` follows the printed first-order coefficient.
    """
    prof = model.profile
    if not isinstance(prof, SmoothProfile):
        raise RegimeError("non-l.a.s.s. constants need a smooth profile")
    ts, hmin, h2, h3 = prof.theta_star, prof.h_min, prof.h2, prof.h3
    lam0 = float(lambda_weight(ts, model))
    dlam0 = -2.0 * hmin * math.tan(ts - model.omega) * lam0
    G = 8.0 * lam0 * math.sqrt(math.pi / h2)
    g0 = fbm_g0(hmin)
    sigma0 = g0 * G / (16.0 * math.sqrt(math.pi))
    sigma1 = 2.0 / h2 * (dlam0 * g0 / 2.0 - h3 * lam0 / (3.0 * h2))

    def phi(h):
        hs = np.atleast_1d(np.asarray(h, dtype=float))
        vals = np.array(
            [math.sqrt(-math.log(x)) * laplace_integral(model, x, truncate=True) - g0 * G for x in hs]
        )
        return float(vals[0]) if np.ndim(h) == 0 else vals

    extras = {
        "G": G,
        "h_min": hmin,
        "theta_star": ts,
        "lambda_star": lam0,
        "dlambda_star": dlam0,
        "sigma0": sigma0,
        "sigma1": sigma1,
        "var_h_printed": G * _ratio_var_printed(*_fbm_pair(hmin), hmin),
    }
    return _build("afbm", hmin, G, slowly_varying="inverse-sqrt-log", extras=extras, phi=phi)


def afbm_constants(model: AfbmSegment) -> TheoreticalConstants:
    if isinstance(model.profile, SmoothProfile):
        return afbm_nonlass_constants(model)
    return afbm_lass_constants(model)


def laplace_expansion_fit(model: AfbmSegment, hs, q=3):
    """Least-squares coefficients ``a_i`` of ``sum_i a_i (-log h)^(-i/2)``.

    ``a_0`` estimates ``(4 - 2^{2H_min}) G``; higher ``a_i`` are the numerically
    fitted counterparts of ``16 Gamma((i+1)/2) sigma_i``.
    """
    hs = np.asarray(hs, dtype=float)
    y = laplace_curve(model, hs)
    x = (-np.log(hs)) ** -0.5
    A = np.vander(x, q + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def variogram(prof, t, tol=1e-12):
    """``v(t) = (1/8) int_0^{2 pi} C(1, H)^2 |t1 cos + t2 sin|^{2H} dtheta``."""
    t1, t2 = float(t[0]), float(t[1])
    r = math.hypot(t1, t2)
    if r == 0.0:
        return 0.0
    alpha = math.atan2(t2, t1)

    def f(th):
        hh = float(prof(th))
        c1 = c_norm(1, hh)
        return c1 * c1 * (r * abs(math.cos(th - alpha))) ** (2 * hh)

    pts = [math.fmod(alpha + math.pi / 2 + 2 * math.pi, math.pi), math.fmod(alpha + math.pi / 2 + 2 * math.pi, math.pi) + math.pi]
    if isinstance(prof, SmoothProfile):
        pts += [prof.theta_star, prof.theta_star + math.pi]
    elif isinstance(prof, PiecewiseProfile):
        pts += list(prof.breakpoints) + [b + math.pi for b in prof.breakpoints]
    val, _ = _quad(f, 0.0, 2.0 * math.pi, pts, tol)
    return val / 8.0


def variogram_limit(prof: SmoothProfile, t, form="laplace"):
    """Limit of ``sqrt(log(1/eps)) eps^{-2 H_min} v(eps t)`` as eps -> 0.

    ``form="laplace"`` uses ``C(1, H_min)^2 / 4``, the constant the Laplace
    method gives for the variogram integral; ``form="printed"`` uses ``/ 8``.
    """
    if not isinstance(prof, SmoothProfile):
        raise RegimeError("variogram limit needs a smooth profile")
    if form not in ("laplace", "printed"):
        raise DomainError("form must be 'laplace' or 'printed'")
    r = math.hypot(float(t[0]), float(t[1]))
    if r == 0.0:
        return 0.0
    alpha = math.atan2(float(t[1]), float(t[0]))
    hmin = prof.h_min
    c1 = c_norm(1, hmin)
    div = 4.0 if form == "laplace" else 8.0
    cosf = abs(math.cos(alpha - prof.theta_star))
    return c1 * c1 / div * r ** (2 * hmin) * cosf ** (2 * hmin) * math.sqrt(math.pi / prof.h2)


# ---------------------------------------------------------------------------
# Extrapolation
# ---------------------------------------------------------------------------


def richardson(values, ratio=2.0, orders=(1, 2)):
    """Repeated Richardson extrapolation of a sequence at n, ratio*n, ...

    The error is assumed to expand in ``n^{-orders[0]}``, ``n^{-orders[1]}``, ...;
    each pass removes one order and shortens the sequence by one.
    """
    v = [float(x) for x in values]
    for p in orders:
        if len(v) < 2:
            break
        f = ratio**p
        v = [(f * b - a) / (f - 1.0) for a, b in zip(v, v[1:])]
    return v[-1]
