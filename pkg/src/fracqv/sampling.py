"""Exact Gaussian path simulation from a covariance grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg, special

from .errors import DomainError, ModelError
from .models import CovGrid

__all__ = [
    "CovFactor",
    "PathSample",
    "factorize",
    "replication_stream",
    "standard_normals",
    "sample_path",
    "sample_paths",
    "reconstruction_error",
    "write_path_csv",
    "read_path_csv",
]

JITTER_BASE = 1e-12
JITTER_STEPS = 4
_U_OFFSET = 2.0**-54
_BLOCK = 512


@dataclass(frozen=True)
class CovFactor:
    """Lower-triangular ``F`` with ``F F^T = grid + jitter * I``."""

    lower: np.ndarray
    jitter: float
    n: int

    @property
    def size(self) -> int:
        return self.lower.shape[0]


@dataclass
class PathSample:
    """Values ``X_{k/n}`` for ``k = 0..n`` and where they came from."""

    n: int
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n + 1,):
            raise DomainError(f"expected {self.n + 1} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("path values must be finite")

    @property
    def times(self):
        return np.arange(self.n + 1) / self.n


def _symmetrize_from_upper(a):
    """Copy the upper triangle of ``a`` onto its lower triangle, in row blocks."""
    size = a.shape[0]
    for start in range(0, size, _BLOCK):
        stop = min(start + _BLOCK, size)
        a[start:stop, :start] = a[:start, start:stop].T
        blk = a[start:stop, start:stop]
        blk[...] = np.triu(blk) + np.triu(blk, 1).T


def _clear_upper(a):
    size = a.shape[0]
    for start in range(0, size, _BLOCK):
        stop = min(start + _BLOCK, size)
        a[start:stop, stop:] = 0.0
        blk = a[start:stop, start:stop]
        blk[...] = np.tril(blk)


def factorize(grid: CovGrid, overwrite: bool = False) -> CovFactor:
    """Cholesky factor of the grid, with escalating jitter when needed.

    A row of zero variance (``X_0 = 0`` for FBM) must vanish identically; it
    is factored with a placeholder pivot that is zeroed afterwards, which
    leaves the rest of the factor untouched.  With ``overwrite`` the grid
    buffer becomes the factor, so large grids need no second copy.
    """
    R = grid.entries
    diag = np.diag(R).copy()
    scale = float(diag.max()) if diag.size else 0.0
    if scale <= 0.0:
        return CovFactor(np.zeros_like(R), 0.0, grid.n)
    dead = np.flatnonzero(diag == 0.0)
    if dead.size and np.any(R[dead] != 0.0):
        raise ModelError("a zero-variance row has nonzero covariances")
    work = R if overwrite else R.copy()
    if not work.flags.c_contiguous:
        work = np.ascontiguousarray(work)
    live = diag > 0.0
    base = np.where(live, diag, scale)
    (potrf,) = linalg.get_lapack_funcs(("potrf",), (work,))

    jitter = 0.0
    for attempt in range(JITTER_STEPS + 1):
        if attempt > 0:
            jitter = JITTER_BASE * scale * 10.0 ** (attempt - 1)
            _symmetrize_from_upper(work)
        np.fill_diagonal(work, np.where(live, base + jitter, base))
        # the transpose is Fortran-ordered, so LAPACK works in place; its
        # upper factor U is stored exactly where L = U^T sits in C order
        _, info = potrf(work.T, lower=False, overwrite_a=True, clean=False)
        if info == 0:
            break
        if info < 0:
            raise ModelError(f"invalid argument {-info} passed to the factorization")
    else:
        raise ModelError(f"covariance grid is not positive definite even with jitter {jitter:.3g}")
    _clear_upper(work)
    work[dead, dead] = 0.0
    return CovFactor(work, jitter, grid.n)


def reconstruction_error(factor: CovFactor, grid: CovGrid) -> float:
    """Relative Frobenius error of ``F F^T`` against the jittered grid."""
    F = factor.lower
    target = grid.entries.copy()
    live = np.diag(grid.entries) > 0.0
    target[live, live] += factor.jitter
    denom = np.linalg.norm(grid.entries)
    if denom == 0.0:
        return float(np.linalg.norm(F @ F.T))
    return float(np.linalg.norm(F @ F.T - target) / denom)


_STREAM_SHIFT = 40


def replication_stream(seed: int, rep: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based stream keyed on ``(seed, stream, rep)``.

    Each replication gets its own key, so draws never depend on how
    replications are scheduled across workers.  ``stream`` separates
    independent experiments sharing one seed.
    """
    if seed < 0 or rep < 0 or stream < 0 or rep >= 1 << _STREAM_SHIFT:
        raise DomainError("seed, stream and replication index must be nonnegative")
    key = [int(seed), (int(stream) << _STREAM_SHIFT) | int(rep)]
    return np.random.Generator(np.random.Philox(key=key))


def standard_normals(stream: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals by inversion of uniforms in (0, 1)."""
    u = stream.random(size) + _U_OFFSET  # keeps ndtri away from 0
    return special.ndtri(u)


def sample_path(
    factor: CovFactor,
    stream: np.random.Generator,
    mean: Optional[Callable] = None,
    provenance: Optional[dict] = None,
) -> PathSample:
    """Draw ``F z`` with ``z`` i.i.d. standard normal.

    ``mean`` is an optional function of time added after sampling.
    """
    z = standard_normals(stream, factor.size)
    values = factor.lower @ z
    if mean is not None:
        values = values + np.asarray(mean(np.arange(factor.n + 1) / factor.n), dtype=float)
    return PathSample(factor.n, values, dict(provenance or {}))


def sample_paths(factor: CovFactor, seed: int, count: int, start: int = 0, mean=None, stream: int = 0) -> np.ndarray:
    """Stack of ``count`` paths for replications ``start .. start + count - 1``."""
    z = np.empty((factor.size, count))
    for j in range(count):
        z[:, j] = standard_normals(replication_stream(seed, start + j, stream), factor.size)
    out = (factor.lower @ z).T
    if mean is not None:
        out += np.asarray(mean(np.arange(factor.n + 1) / factor.n), dtype=float)
    return out


def write_path_csv(path: PathSample, target) -> None:
    """Write ``t,value`` rows with 17 significant digits."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(path.times, path.values):
            w.writerow([f"{t:.17g}", f"{v:.17g}"])
    finally:
        if own:
            fh.close()


def read_path_csv(source) -> PathSample:
    """Read a ``t,value`` CSV on a uniform grid starting at 0."""
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    fh = open(source, newline="") if own else source
    try:
        rows = list(csv.reader(fh))
    finally:
        if own:
            fh.close()
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise DomainError("path CSV must start with the header 't,value'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DomainError(f"malformed path CSV row: {exc}") from None
    if data.shape[0] < 4:
        raise DomainError("path CSV needs at least 4 rows")
    n = data.shape[0] - 1
    if not np.allclose(data[:, 0], np.arange(n + 1) / n, atol=1e-12):
        raise DomainError("path CSV times must be the uniform grid k/n, k = 0..n")
    return PathSample(n, data[:, 1], {"source": str(source) if own else "stream"})
