"""Second-order quadratic variations and their exact Gaussian moments.

For a centered Gaussian path every moment of ``V_n`` up to order two is a
polynomial in the increment covariances ``d_jk``, so mean, variance and the
covariance of ``(V_n, V_2n)`` are computed exactly from a covariance grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DomainError
from .models import CovGrid
from .sampling import PathSample

__all__ = [
    "SecondIncrements",
    "IncrementCovariance",
    "second_increments",
    "vn",
    "vn_batch",
    "subsample",
    "increment_cov",
    "exact_mean_vn",
    "exact_var_vn",
    "cov_vn_v2n_terms",
    "exact_cov_vn_v2n",
]


@dataclass(frozen=True)
class SecondIncrements:
    """``Delta X_k = X_{(k+1)/n} + X_{(k-1)/n} - 2 X_{k/n}`` for ``k = 1..n-1``."""

    n: int
    values: np.ndarray


@dataclass(frozen=True)
class IncrementCovariance:
    """``d_jk = E[Delta X_j Delta X_k]`` for ``j, k = 1..n-1`` (0-based storage)."""

    n: int
    matrix: np.ndarray


def _values(path):
    if isinstance(path, PathSample):
        return path.n, path.values
    v = np.asarray(path, dtype=float)
    return v.shape[-1] - 1, v


def _fsum_rows(a):
    a = np.atleast_2d(a)
    return np.array([math.fsum(row) for row in a])


def second_increments(path) -> SecondIncrements:
    """Second differences of a path given as ``PathSample`` or value array."""
    n, v = _values(path)
    if n < 3:
        raise DomainError("second increments need n >= 3")
    return SecondIncrements(n, v[..., 2:] + v[..., :-2] - 2.0 * v[..., 1:-1])


def vn(path) -> float:
    """``V_n = sum_k (Delta X_k)^2`` with exactly rounded summation."""
    d = second_increments(path).values
    return math.fsum(d * d)


def vn_batch(paths) -> np.ndarray:
    """``V_n`` for every row of a 2-D array of paths."""
    d = second_increments(np.atleast_2d(paths)).values
    return _fsum_rows(d * d)


def subsample(path):
    """Coarse path on ``{k/n}`` from a path on ``{k/(2n)}``."""
    n2, v = _values(path)
    if n2 % 2:
        raise DomainError("subsampling needs an even resolution")
    coarse = v[..., ::2]
    if isinstance(path, PathSample):
        return PathSample(n2 // 2, coarse, dict(path.provenance))
    return coarse


_W5 = np.array([1.0, -4.0, 6.0, -4.0, 1.0])


def increment_cov(grid: CovGrid) -> IncrementCovariance:
    """Tensor second difference of the grid, i.e. the 9-point stencil.

    When the grid carries lag values ``G`` the stencil collapses to
    ``d_jk = -sum_m w_m G(|j - k + m|)`` with weights (1, -4, 6, -4, 1),
    which is the same quantity evaluated without cancellation.
    """
    n = grid.n
    if n < 3:
        raise DomainError("increment covariance needs n >= 3")
    if grid.lags is not None:
        G = np.asarray(grid.lags, dtype=float)
        lag = np.arange(n - 1)
        col = -(G[np.abs(lag[:, None] + np.arange(-2, 3)[None, :])] @ _W5)
        return IncrementCovariance(n, linalg.toeplitz(col))
    R = grid.entries
    rows = R[2:] + R[:-2] - 2.0 * R[1:-1]
    d = rows[:, 2:] + rows[:, :-2] - 2.0 * rows[:, 1:-1]
    return IncrementCovariance(n, d)


def exact_mean_vn(dcov: IncrementCovariance) -> float:
    return math.fsum(np.diag(dcov.matrix))


def _sum_products(a, b):
    return math.fsum(np.einsum("ij,ij->i", a, b))


def exact_var_vn(dcov: IncrementCovariance) -> float:
    """``Var V_n = 2 sum_k d_kk^2 + 4 sum_{k<j} d_jk^2 = 2 sum_{j,k} d_jk^2``."""
    d = dcov.matrix
    return 2.0 * _sum_products(d, d)


def cov_vn_v2n_terms(fine_dcov: IncrementCovariance):
    """The six sums ``S_1 .. S_6`` whose total is ``Cov(V_n, V_2n)``.

    ``fine_dcov`` lives on the level-2n grid.  Rows ``2k+1``, ``2k-1`` and
    ``2k`` (1-based, ``k = 1..n-1``) are strided slices of its matrix.
    """
    n2 = fine_dcov.n
    if n2 % 2 or n2 < 6:
        raise DomainError("fine level must be 2n with n >= 3")
    d = fine_dcov.matrix
    up = d[2 : n2 - 1 : 2]  # 2k+1
    down = d[0 : n2 - 3 : 2]  # 2k-1
    mid = d[1 : n2 - 2 : 2]  # 2k
    return (
        2.0 * _sum_products(up, up),
        2.0 * _sum_products(down, down),
        8.0 * _sum_products(mid, mid),
        4.0 * _sum_products(down, up),
        8.0 * _sum_products(up, mid),
        8.0 * _sum_products(down, mid),
    )


def exact_cov_vn_v2n(fine_dcov: IncrementCovariance) -> float:
    return math.fsum(cov_vn_v2n_terms(fine_dcov))
