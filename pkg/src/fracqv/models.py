"""Process families and their covariance kernels.

Three centered Gaussian models are supported, all observed on ``[0, 1]``:

* ``Fbm``: standard fractional Brownian motion.
* ``BifBm``: two-parameter (bifractional) Brownian motion observed on
  ``[T1, T2]`` and reindexed to the unit interval.
* ``AfbmSegment``: anisotropic fractional Brownian field restricted to a
  radial segment of the plane.  Its covariance is an angular integral whose
  weight depends on a directional Hurst profile.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate, special

from .errors import DomainError, ModelError, NumericalError

__all__ = [
    "ConstantProfile",
    "PiecewiseProfile",
    "SmoothProfile",
    "HurstProfile",
    "Fbm",
    "BifBm",
    "AfbmSegment",
    "ProcessModel",
    "CovGrid",
    "fbm_cov",
    "bifbm_cov",
    "bifbm_segment_cov",
    "c_norm",
    "lambda_weight",
    "afbm_segment_cov",
    "cov_grid",
    "model_from_dict",
    "model_to_dict",
]

QUAD_TOL = 1e-10
QUAD_LIMIT = 500
PSD_CHECK_MAX_N = 512
_BLOCK_ROWS = 512


def _check_index(name, value):
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")


# ---------------------------------------------------------------------------
# Directional Hurst profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantProfile:
    """H(theta) = hurst in every direction."""

    hurst: float

    def __post_init__(self):
        _check_index("hurst", self.hurst)

    @property
    def h_min(self) -> float:
        return self.hurst

    def __call__(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.hurst)

    def pieces(self):
        return [(0.0, math.pi, self.hurst)]


@dataclass(frozen=True)
class PiecewiseProfile:
    """Piecewise-constant profile on the half circle.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i + 1])``; the last
    value wraps around from ``breakpoints[-1]`` through ``pi`` back to
    ``breakpoints[0]``.
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if len(bps) == 0 or len(bps) != len(vals):
            raise DomainError("breakpoints and values must be non-empty and of equal length")
        if any(b < 0.0 or b >= math.pi for b in bps):
            raise DomainError("breakpoints must lie in [0, pi)")
        if any(b1 <= b0 for b0, b1 in zip(bps, bps[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        for v in vals:
            _check_index("profile value", v)

    @property
    def h_min(self) -> float:
        return min(self.values)

    def __call__(self, theta):
        th = np.mod(np.asarray(theta, dtype=float), math.pi)
        idx = np.searchsorted(self.breakpoints, th, side="right") - 1
        return np.asarray(self.values)[idx]  # idx == -1 picks the wrapped last piece

    def pieces(self):
        """Return ``(a, b, H)`` intervals covering ``[0, pi]``."""
        bps, vals = self.breakpoints, self.values
        out = []
        if bps[0] > 0.0:
            out.append((0.0, bps[0], vals[-1]))
        for i, (a, h) in enumerate(zip(bps, vals)):
            b = bps[i + 1] if i + 1 < len(bps) else math.pi
            out.append((a, b, h))
        return out

    def measure(self, predicate) -> float:
        """Lebesgue measure of ``{theta in [0, pi): predicate(H(theta))}``."""
        return sum(b - a for a, b, h in self.pieces() if predicate(h))


@dataclass(frozen=True)
class SmoothProfile:
    """Analytic profile with a unique non-degenerate minimum at ``theta_star``.

    Without ``func`` the profile is

        H(theta) = h_min + (h2 / 2) sin(s)**2 + (h3 / 6) sin(s)**3 cos(s)**3,

    with ``s = theta - theta_star``.  It is pi-periodic, has
    ``H''(theta_star) = h2`` and ``H'''(theta_star) = h3``, and is monotone on
    each side of the minimum provided ``|h3| < 8 h2``.

    A user-supplied vectorized ``func`` replaces the default family; the stored
    derivatives are then checked against finite differences.
    """

    theta_star: float
    h_min: float
    h2: float
    h3: float = 0.0
    func: Optional[Callable] = field(default=None, compare=True)

    def __post_init__(self):
        if not 0.0 <= self.theta_star < math.pi:
            raise DomainError("theta_star must lie in [0, pi)")
        _check_index("h_min", self.h_min)
        if not self.h2 > 0.0:
            raise DomainError("the second derivative at the minimum must be > 0")
        if self.func is None:
            if abs(self.h3) >= 8.0 * self.h2:
                raise DomainError("|h3| < 8 h2 is required for monotonicity")
            if self.h_min + self.h2 / 2.0 + abs(self.h3) / 48.0 >= 1.0:
                raise DomainError("profile would leave (0, 1)")
        else:
            self._validate_func()

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(th), dtype=float)
        s = th - self.theta_star
        sn, cs = np.sin(s), np.cos(s)
        return self.h_min + 0.5 * self.h2 * sn**2 + (self.h3 / 6.0) * (sn * cs) ** 3

    def _validate_func(self):
        ts = self.theta_star
        if not math.isclose(float(self.func(np.array([ts]))[0]), self.h_min, abs_tol=1e-9):
            raise DomainError("func(theta_star) differs from h_min")
        grid = np.linspace(0.0, math.pi, 721)[:-1]
        vals = np.asarray(self.func(grid), dtype=float)
        if np.any(vals <= 0.0) or np.any(vals >= 1.0):
            raise DomainError("profile values must lie in (0, 1)")
        if not np.allclose(self.func(grid + math.pi), vals, atol=1e-12):
            raise DomainError("profile must be pi-periodic")
        if np.any(vals < self.h_min - 1e-12):
            raise DomainError("theta_star is not the minimizer")
        # finite-difference check of the stored derivatives
        step = 1e-3
        pts = ts + step * np.arange(-2, 3)
        f = np.asarray(self.func(pts), dtype=float)
        d1 = (f[3] - f[1]) / (2 * step)
        d2 = (f[3] - 2 * f[2] + f[1]) / step**2
        d3 = (f[4] - 2 * f[3] + 2 * f[1] - f[0]) / (2 * step**3)
        scale = max(1.0, abs(self.h2))
        if abs(d1) > 1e-5 * scale:
            raise DomainError(f"H'(theta_star) = {d1:.3g} is not zero")
        if abs(d2 - self.h2) > 1e-4 * scale:
            raise DomainError(f"supplied H'' = {self.h2} but finite differences give {d2:.6g}")
        if abs(d3 - self.h3) > 1e-3 * max(1.0, abs(self.h3)):
            raise DomainError(f"supplied H''' = {self.h3} but finite differences give {d3:.6g}")


HurstProfile = Union[ConstantProfile, PiecewiseProfile, SmoothProfile]


# ---------------------------------------------------------------------------
# Process models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fbm:
    hurst: float

    def __post_init__(self):
        _check_index("hurst", self.hurst)

    tag = "fbm"


@dataclass(frozen=True)
class BifBm:
    hurst: float
    k: float
    t1: float
    t2: float

    def __post_init__(self):
        _check_index("hurst", self.hurst)
        _check_index("k", self.k)
        if not (self.t1 > 0.0 and self.t2 > self.t1):
            raise DomainError("observation window must satisfy 0 < t1 < t2")

    tag = "bifbm"

    @property
    def hk(self) -> float:
        return self.hurst * self.k

    def tau(self, t):
        return (self.t2 - self.t1) * np.asarray(t, dtype=float) + self.t1


@dataclass(frozen=True)
class AfbmSegment:
    """Anisotropic field on the segment ``L (t + eps) (cos omega, sin omega)``."""

    profile: HurstProfile
    length: float = 1.0
    eps: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not self.length > 0.0:
            raise DomainError("segment length must be > 0")
        if not self.eps >= 0.0:
            raise DomainError("eps must be >= 0")
        if not 0.0 <= self.omega < 2.0 * math.pi:
            raise DomainError("omega must lie in [0, 2 pi)")
        if isinstance(self.profile, SmoothProfile):
            gap = math.remainder(self.omega - self.profile.theta_star - math.pi / 2, math.pi)
            if abs(gap) < 1e-9:
                raise DomainError("omega must differ from theta_star + pi/2 (mod pi)")

    tag = "afbm"

    @property
    def h_min(self) -> float:
        return self.profile.h_min

    @property
    def singular_angle(self) -> float:
        """Direction in [0, pi) where |cos(theta - omega)| vanishes."""
        return math.fmod(self.omega + math.pi / 2, math.pi)


ProcessModel = Union[Fbm, BifBm, AfbmSegment]


# ---------------------------------------------------------------------------
# Pointwise kernels
# ---------------------------------------------------------------------------


def fbm_cov(s, t, hurst):
    """Covariance ``(|s|^2H + |t|^2H - |s - t|^2H) / 2`` of standard FBM."""
    _check_index("hurst", hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    two_h = 2.0 * hurst
    out = 0.5 * (np.abs(s) ** two_h + np.abs(t) ** two_h - np.abs(s - t) ** two_h)
    return out[()] if out.ndim == 0 else out


def bifbm_cov(s, t, hurst, k):
    """Covariance of two-parameter FBM, defined for ``s, t >= 0``.

    ``k = 1`` is accepted here and gives the FBM kernel exactly.
    """
    _check_index("hurst", hurst)
    if not 0.0 < k <= 1.0:
        raise DomainError(f"k must lie in (0, 1], got {k!r}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("bifbm_cov requires s, t >= 0")
    two_h = 2.0 * hurst
    out = ((s**two_h + t**two_h) ** k - np.abs(s - t) ** (two_h * k)) / 2.0**k
    return out[()] if out.ndim == 0 else out


def bifbm_segment_cov(s, t, model: BifBm):
    """Covariance of the reindexed process ``Y_t = B(tau(t))`` on [0, 1]."""
    return bifbm_cov(model.tau(s), model.tau(t), model.hurst, model.k)


def c_norm(d, hurst):
    """Normalizing constant of the harmonizable FBM representation in R^d."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    _check_index("hurst", hurst)
    num = math.pi ** ((d + 1) / 2.0) * special.gamma(hurst + 0.5)
    den = hurst * special.gamma(2 * hurst) * math.sin(hurst * math.pi) * special.gamma(hurst + d / 2.0)
    return math.sqrt(num / den)


def _c1_vec(h):
    h = np.asarray(h, dtype=float)
    num = math.pi * special.gamma(h + 0.5)
    den = h * special.gamma(2 * h) * np.sin(h * math.pi) * special.gamma(h + 0.5)
    return np.sqrt(num / den)


def lambda_weight(theta, model: AfbmSegment):
    """Angular weight of the segment covariance; pi-periodic in ``theta``."""
    theta = np.asarray(theta, dtype=float)
    h = model.profile(theta)
    base = model.length * np.abs(np.cos(theta - model.omega))
    out = _c1_vec(h) * base ** (2.0 * h) / (8.0 * c_norm(2, model.h_min) ** 2)
    return out[()] if out.ndim == 0 else out


def _quad(func, a, b, points, tol):
    """Adaptive Gauss-Kronrod on [a, b] with interior breakpoints."""
    inner = sorted(p for p in points if a < p < b)
    val, err, info, *rest = integrate.quad(
        func, a, b, points=inner or None, epsabs=tol, epsrel=0.0, limit=QUAD_LIMIT, full_output=1
    )
    if rest and err > tol:
        raise NumericalError(f"quadrature on [{a:.6g}, {b:.6g}] did not converge: {rest[0]}", estimate=err)
    return val, err


@functools.lru_cache(maxsize=256)
def _piece_weights(model: AfbmSegment, tol: float = QUAD_TOL):
    """Integrals of the angular weight over each constant piece of the profile."""
    sing = model.singular_angle
    out = []
    for a, b, h in model.profile.pieces():
        val, err = _quad(lambda th: float(lambda_weight(th, model)), a, b, [sing], tol / 8.0)
        out.append((h, val, err))
    return tuple(out)


def _smooth_breaks(model: AfbmSegment):
    return [model.singular_angle, model.profile.theta_star]


def afbm_segment_cov(s, t, model: AfbmSegment, tol: float = QUAD_TOL, full_output: bool = False):
    """Covariance of the anisotropic field restricted to a segment.

    Piecewise-constant and constant profiles reduce to a finite sum of
    per-piece angular integrals.  Smooth profiles are integrated adaptively
    with breakpoints at the cosine zero and at the minimizing direction.

    Returns the value, or ``(value, error_estimate)`` with ``full_output``.
    """
    a = abs(s + model.eps)
    b = abs(t + model.eps)
    c = abs(s - t)
    if isinstance(model.profile, SmoothProfile):
        prof = model.profile

        def integrand(th):
            h2 = 2.0 * float(prof(th))
            return float(lambda_weight(th, model)) * (a**h2 + b**h2 - c**h2)

        val, err = _quad(integrand, 0.0, math.pi, _smooth_breaks(model), tol / 4.0)
        val, err = 4.0 * val, 4.0 * err
    else:
        val = err = 0.0
        for h, w, e in _piece_weights(model, tol):
            bracket = a ** (2 * h) + b ** (2 * h) - c ** (2 * h)
            val += 4.0 * w * bracket
            err += 4.0 * e * abs(bracket)
    return (val, err) if full_output else val


def _afbm_radial(model: AfbmSegment, x, tol=QUAD_TOL):
    """``4 * int_0^pi Lambda(theta) |x|^{2 H(theta)} dtheta`` for a vector of x."""
    x = np.abs(np.asarray(x, dtype=float))
    if isinstance(model.profile, SmoothProfile):
        prof = model.profile

        def integrand(th):
            return float(lambda_weight(th, model)) * x ** (2.0 * float(prof(th)))

        pts = sorted(p for p in _smooth_breaks(model) if 0.0 < p < math.pi)
        val, err = integrate.quad_vec(
            integrand, 0.0, math.pi, epsabs=tol / 4.0, epsrel=0.0, points=pts or None, limit=QUAD_LIMIT
        )
        if err > tol:
            raise NumericalError("radial quadrature did not converge", estimate=4.0 * err)
        return 4.0 * val
    out = np.zeros_like(x)
    for h, w, _ in _piece_weights(model, tol):
        out += 4.0 * w * x ** (2 * h)
    return out


# ---------------------------------------------------------------------------
# Covariance grids
# ---------------------------------------------------------------------------


@dataclass
class CovGrid:
    """Covariance of ``X_{k/n}``, ``k = 0..n``, as an (n+1)x(n+1) matrix.

    Models with stationary increments have ``R(s, t) = F(s) + F(t) - G(|s - t|)``;
    for them ``lags`` holds ``G(k/n)``, from which second-increment covariances
    follow without the cancellation of differencing O(1) entries.
    """

    n: int
    entries: np.ndarray
    model: ProcessModel
    lags: Optional[np.ndarray] = None

    @property
    def times(self):
        return np.arange(self.n + 1) / self.n

    def coarsen(self) -> "CovGrid":
        """The grid on ``{k/(n/2)}`` as a view of every other point."""
        if self.n % 2:
            raise DomainError("coarsening needs an even resolution")
        lags = None if self.lags is None else self.lags[::2]
        return CovGrid(self.n // 2, self.entries[::2, ::2], self.model, lags)


def _assemble(n, pair_fn):
    """Fill R[j, k] = pair_fn(rows, lag_matrix) block by block."""
    R = np.empty((n + 1, n + 1))
    idx = np.arange(n + 1)
    for start in range(0, n + 1, _BLOCK_ROWS):
        rows = idx[start : start + _BLOCK_ROWS]
        lag = np.abs(rows[:, None] - idx[None, :])
        R[rows] = pair_fn(rows, lag)
    return R


def _fbm_entries(n, hurst):
    two_h = 2.0 * hurst
    v = (np.arange(n + 1) / n) ** two_h
    return _assemble(n, lambda rows, lag: 0.5 * (np.add.outer(v[rows], v) - v[lag])), 0.5 * v


def _bifbm_entries(n, model: BifBm):
    two_h = 2.0 * model.hurst
    a = model.tau(np.arange(n + 1) / n) ** two_h
    w = ((model.t2 - model.t1) * np.arange(n + 1) / n) ** (two_h * model.k)
    scale = 2.0**-model.k
    return _assemble(n, lambda rows, lag: scale * (np.add.outer(a[rows], a) ** model.k - w[lag]))


def _afbm_entries(n, model: AfbmSegment):
    # R(s, t) = F(s) + F(t) - G(|s - t|) because the field has stationary increments
    grid = np.arange(n + 1) / n
    f = _afbm_radial(model, grid + model.eps)
    g = _afbm_radial(model, grid)
    return _assemble(n, lambda rows, lag: np.add.outer(f[rows], f) - g[lag]), g


def cov_grid(model: ProcessModel, n: int, check_psd: Optional[bool] = None) -> CovGrid:
    """Tabulate the model covariance on ``{k/n : k = 0..n}``.

    The eigenvalue invariant is checked by default for ``n <= 512``; beyond
    that the factorization in :mod:`fracqv.sampling` acts as the check.
    """
    if n < 4:
        raise DomainError("grid resolution must be >= 4")
    lags = None
    if isinstance(model, Fbm):
        R, lags = _fbm_entries(n, model.hurst)
    elif isinstance(model, BifBm):
        R = _bifbm_entries(n, model)
    elif isinstance(model, AfbmSegment):
        R, lags = _afbm_entries(n, model)
    else:
        raise DomainError(f"unknown model {model!r}")
    diag = np.diag(R)
    if np.any(diag < 0.0):
        raise ModelError("covariance grid has a negative variance")
    if check_psd is None:
        check_psd = n <= PSD_CHECK_MAX_N
    if check_psd:
        lam = np.linalg.eigvalsh(R)[0]
        if lam < -1e-8 * diag.max():
            raise ModelError(f"covariance grid is not positive semidefinite (min eigenvalue {lam:.3g})")
    return CovGrid(n=n, entries=R, model=model, lags=lags)


# ---------------------------------------------------------------------------
# Config documents
# ---------------------------------------------------------------------------


def _profile_from_dict(d):
    kind = d.get("kind")
    if kind == "constant":
        return ConstantProfile(float(d["hurst"]))
    if kind == "piecewise":
        return PiecewiseProfile(tuple(d["breakpoints"]), tuple(d["values"]))
    if kind == "smooth":
        return SmoothProfile(float(d["theta_star"]), float(d["h_min"]), float(d["h2"]), float(d.get("h3", 0.0)))
    raise DomainError(f"unknown profile kind {kind!r}")


def _profile_to_dict(p):
    if isinstance(p, ConstantProfile):
        return {"kind": "constant", "hurst": p.hurst}
    if isinstance(p, PiecewiseProfile):
        return {"kind": "piecewise", "breakpoints": list(p.breakpoints), "values": list(p.values)}
    if p.func is not None:
        raise DomainError("profiles with a custom function cannot be serialized")
    return {"kind": "smooth", "theta_star": p.theta_star, "h_min": p.h_min, "h2": p.h2, "h3": p.h3}


_MODEL_KEYS = {
    "fbm": {"model", "hurst"},
    "bifbm": {"model", "hurst", "k", "t1", "t2"},
    "afbm": {"model", "profile", "length", "eps", "omega"},
}


def model_from_dict(d: dict) -> ProcessModel:
    """Build a model from its JSON description (see docs/schema.md)."""
    kind = d.get("model")
    if kind not in _MODEL_KEYS:
        raise DomainError(f"unknown model {kind!r}")
    extra = set(d) - _MODEL_KEYS[kind]
    if extra:
        raise DomainError(f"unexpected fields for {kind}: {sorted(extra)}")
    try:
        if kind == "fbm":
            return Fbm(float(d["hurst"]))
        if kind == "bifbm":
            return BifBm(float(d["hurst"]), float(d["k"]), float(d["t1"]), float(d["t2"]))
        return AfbmSegment(
            _profile_from_dict(d["profile"]),
            float(d.get("length", 1.0)),
            float(d.get("eps", 0.0)),
            float(d.get("omega", 0.0)),
        )
    except KeyError as exc:
        raise DomainError(f"missing field {exc.args[0]!r} for model {kind}") from None


def model_to_dict(model: ProcessModel) -> dict:
    if isinstance(model, Fbm):
        return {"model": "fbm", "hurst": model.hurst}
    if isinstance(model, BifBm):
        return {"model": "bifbm", "hurst": model.hurst, "k": model.k, "t1": model.t1, "t2": model.t2}
    return {
        "model": "afbm",
        "profile": _profile_to_dict(model.profile),
        "length": model.length,
        "eps": model.eps,
        "omega": model.omega,
    }
