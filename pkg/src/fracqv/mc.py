"""Seeded, parallel Monte Carlo over simulated paths.

Replications are grouped in fixed-size chunks.  A chunk's output depends only
on the replication indices it covers, and chunks are assembled in index
order, so reports are bit-identical for any number of workers.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import asymptotics as asy
from . import estimators as est
from .errors import DomainError
from .models import AfbmSegment, BifBm, Fbm, ProcessModel, cov_grid, model_to_dict
from .quadvar import exact_cov_vn_v2n, exact_mean_vn, exact_var_vn, increment_cov, vn_batch
from .sampling import factorize, sample_paths

__all__ = [
    "ExperimentConfig",
    "McReport",
    "default_threads",
    "run_experiment",
    "normality_diagnostic",
    "KS_CRITICAL",
]

CHUNK = 50
KS_CRITICAL = 1.63
EXACT_MAX_FINE_N = 8192
THREADS_ENV = "FRACQV_THREADS"


def default_threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        val = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if val < 1:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return val


@dataclass
class ExperimentConfig:
    """What to simulate and how many times.

    With ``bivariate`` each replication samples one path at ``2n`` and
    subsamples it to ``n``; otherwise only the ``n`` grid is simulated and
    estimators are skipped.  ``exact_moments`` controls the Isserlis targets
    (``None`` computes them when the fine grid has at most 8192 intervals).
    """

    model: ProcessModel
    n_values: Sequence[int]
    replications: int
    seed: int = 0
    bivariate: bool = True
    estimators: bool = True
    exact_moments: Optional[bool] = None
    raw_csv: Optional[str] = None
    report_json: Optional[str] = None

    def __post_init__(self):
        self.n_values = [int(n) for n in self.n_values]
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if not self.n_values:
            raise DomainError("at least one n is required")
        if any(n < 8 for n in self.n_values):
            raise DomainError("every n must be >= 8")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")

    def to_dict(self):
        return {
            "model": model_to_dict(self.model),
            "n_values": list(self.n_values),
            "replications": self.replications,
            "seed": self.seed,
            "bivariate": self.bivariate,
            "estimators": self.estimators,
            "exact_moments": self.exact_moments,
        }


@dataclass
class McReport:
    config: dict
    results: list = field(default_factory=list)

    def to_dict(self):
        return {"config": self.config, "results": self.results}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def normality_diagnostic(samples):
    """Kolmogorov-Smirnov distance to N(0, 1); passes below ``1.63 / sqrt(M)``."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise DomainError("normality diagnostic needs at least 100 samples")
    d = float(stats.kstest(x, "norm").statistic)
    return d, bool(d < KS_CRITICAL / math.sqrt(x.size))


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def _constants(model):
    if isinstance(model, Fbm):
        return asy.fbm_constants(model.hurst)
    if isinstance(model, BifBm):
        return asy.bifbm_constants(model.hurst, model.k, model.t1, model.t2)
    return asy.afbm_constants(model)


def _norm(tc, n):
    """Factor turning ``V_n`` into the normalized variation."""
    f = float(n) ** (2.0 * tc.index - 1.0)
    if tc.slowly_varying == "inverse-sqrt-log":
        f *= math.sqrt(math.log(n))
    return f


def _root(tc, n):
    return math.sqrt(n * math.log(n)) if tc.slowly_varying == "inverse-sqrt-log" else math.sqrt(n)


def _fsum_mean(x):
    return math.fsum(x) / len(x) if len(x) else float("nan")


def _moments(x):
    """Mean, unbiased variance and standard error of the variance."""
    x = np.asarray(x, dtype=float)
    m = x.size
    mean = _fsum_mean(x)
    if m < 2:
        return mean, float("nan"), float("nan")
    c = x - mean
    var = math.fsum(c * c) / (m - 1)
    m4 = math.fsum(c**4) / m
    se_var = math.sqrt(max(m4 - var * var, 0.0) / m)
    return mean, var, se_var


def _cov(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.size
    if m < 2:
        return float("nan"), float("nan")
    cx, cy = x - _fsum_mean(x), y - _fsum_mean(y)
    p = cx * cy
    cov = math.fsum(p) / (m - 1)
    se = math.sqrt(max(math.fsum(p * p) / m - cov * cov, 0.0) / m)
    return cov, se


def _z(emp, target, se):
    if not (math.isfinite(emp) and math.isfinite(target)) or not se > 0.0:
        return float("nan")
    return (emp - target) / se


def _exact_targets(model, n, bivariate):
    fine = 2 * n if bivariate else n
    grid = cov_grid(model, fine, check_psd=False)
    out = {}
    if bivariate:
        d2 = increment_cov(grid)
        coarse = grid.coarsen()
        d1 = increment_cov(coarse)
        out["mean_vn"] = exact_mean_vn(d1)
        out["var_vn"] = exact_var_vn(d1)
        out["mean_v2n"] = exact_mean_vn(d2)
        out["var_v2n"] = exact_var_vn(d2)
        out["cov_vn_v2n"] = exact_cov_vn_v2n(d2)
        del d1, d2
    else:
        d1 = increment_cov(grid)
        out["mean_vn"] = exact_mean_vn(d1)
        out["var_vn"] = exact_var_vn(d1)
    return grid, out


def _chunk_task(factor, seed, stream, bounds, bivariate):
    start, stop = bounds
    paths = sample_paths(factor, seed, stop - start, start=start, stream=stream)
    if bivariate:
        return vn_batch(paths[:, ::2]), vn_batch(paths)
    return vn_batch(paths), None


def _estimates(model, n, vn, v2n):
    """Vectorized point estimates; invalid replications give ``nan``."""
    ok = (vn > 0.0) & (v2n > 0.0)
    r = np.full(vn.shape, np.nan)
    r[ok] = 0.5 - np.log(v2n[ok] / vn[ok]) / (2.0 * est.LOG2)
    if isinstance(model, Fbm):
        return {"h": r}, ok
    if isinstance(model, AfbmSegment):
        return {"h_min": r}, ok
    k = np.full(vn.shape, np.nan)
    good = ok & (r < 1.0)
    k[good] = [est.k_estimator(a, b, n, model.t1, model.t2) for a, b in zip(vn[good], r[good])]
    h = np.full(vn.shape, np.nan)
    nz = good & (k != 0.0)
    h[nz] = r[nz] / k[nz]
    return {"hk": r, "k": k, "h": h}, ok


def _truths(model, tc, n):
    if isinstance(model, Fbm):
        return {"h": (model.hurst, 0.0, "ratio")}
    if isinstance(model, BifBm):
        return {"hk": (model.hk, 0.0, "ratio"), "k": (model.k, 0.0, "k"), "h": (model.hurst, 0.0, "h")}
    return {"h_min": (model.h_min, est.afbm_bias_term(tc, n), "ratio")}


def _estimator_summary(model, tc, n, values, ok):
    out = {}
    for name, (truth, bias_term, kind) in _truths(model, tc, n).items():
        x = values[name]
        finite = np.isfinite(x)
        xs = x[finite]
        mean, var, _ = _moments(xs)
        m = xs.size
        se_delta = est.stderr_for(kind, tc, n, "delta")
        se_printed = est.stderr_for(kind, tc, n, "printed")
        bias = mean - truth - bias_term
        mc_se = math.sqrt(var / m) if m > 1 else float("nan")
        centred = xs - truth - bias_term
        cover = float(np.mean(np.abs(centred) <= 1.96 * se_delta)) if m else float("nan")
        in_unit = (xs > 0.0) & (xs < 1.0)
        out[name] = {
            "truth": truth,
            "bias_term": bias_term,
            "count": m,
            "invalid": int(ok.size - m),
            "out_of_unit": int(m - np.count_nonzero(in_unit)),
            "mean": mean,
            "variance": var,
            "bias": bias,
            "bias_mc_se": mc_se,
            "bias_z": _z(bias, 0.0, mc_se),
            "stderr_delta": se_delta,
            "stderr_printed": se_printed,
            "variance_ratio_delta": var / se_delta**2 if se_delta > 0 else float("nan"),
            "variance_ratio_printed": var / se_printed**2 if se_printed > 0 else float("nan"),
            "coverage95_delta": cover,
        }
    return out


def _run_one(cfg: ExperimentConfig, tc, index, n, threads):
    model = cfg.model
    bivariate = cfg.bivariate
    fine = 2 * n if bivariate else n
    want_exact = cfg.exact_moments
    if want_exact is None:
        want_exact = fine <= EXACT_MAX_FINE_N
    if want_exact:
        grid, exact = _exact_targets(model, n, bivariate)
    else:
        grid, exact = cov_grid(model, fine, check_psd=fine <= 512), {}
    factor = factorize(grid, overwrite=True)
    del grid

    M = cfg.replications
    bounds = [(s, min(s + CHUNK, M)) for s in range(0, M, CHUNK)]
    task = functools.partial(_chunk_task, factor, cfg.seed, index, bivariate=bivariate)
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(task, bounds))
    else:
        parts = [task(b) for b in bounds]
    vn = np.concatenate([p[0] for p in parts])
    v2n = np.concatenate([p[1] for p in parts]) if bivariate else None

    a, root = _norm(tc, n), _root(tc, n)
    x = a * vn
    res = {"n": n, "replications": M, "jitter": factor.jitter}
    mean, var, se_var = _moments(x)
    res["normalized_vn"] = {
        "mean": mean,
        "variance": var,
        "mean_mc_se": math.sqrt(var / M) if M > 1 else float("nan"),
        "limit": tc.limit,
        "mean_z_limit": _z(mean, tc.limit, math.sqrt(var / M) if M > 1 else float("nan")),
    }
    s = root * (x - tc.limit)
    s_mean, s_var, s_se = _moments(s)
    res["clt"] = {
        "mean": s_mean,
        "variance": s_var,
        "variance_mc_se": s_se,
        "sigma_sq": tc.sigma_sq,
        "variance_z_sigma_sq": _z(s_var, tc.sigma_sq, s_se),
        "variance_ratio_sigma_sq": s_var / tc.sigma_sq,
    }
    if exact:
        ex_mean = a * exact["mean_vn"]
        ex_var = a * a * exact["var_vn"]
        res["normalized_vn"]["exact_mean"] = ex_mean
        res["normalized_vn"]["exact_variance"] = ex_var
        res["normalized_vn"]["mean_z_exact"] = _z(mean, ex_mean, math.sqrt(var / M) if M > 1 else float("nan"))
        res["normalized_vn"]["variance_z_exact"] = _z(var, ex_var, se_var)
        res["clt"]["exact_variance"] = root * root * ex_var
        if M >= 100 and ex_var > 0:
            d, ok = normality_diagnostic((x - ex_mean) / math.sqrt(ex_var))
            res["normality"] = {"ks_distance": d, "critical": KS_CRITICAL / math.sqrt(M), "pass": ok}
    if bivariate:
        b, root2 = _norm(tc, 2 * n), root
        y = b * v2n
        t = root2 * (y - tc.limit)
        cov, cov_se = _cov(s, t)
        target = tc.Sigma[0][1]
        res["bivariate"] = {
            "cov": cov,
            "cov_mc_se": cov_se,
            "sigma_01": target,
            "cov_z_sigma_01": _z(cov, target, cov_se),
        }
        if exact:
            ex_cov = root * root2 * a * b * exact["cov_vn_v2n"]
            res["bivariate"]["exact_cov"] = ex_cov
            res["bivariate"]["cov_z_exact"] = _z(cov, ex_cov, cov_se)
        if cfg.estimators:
            values, ok = _estimates(model, n, vn, v2n)
            res["invalid_replications"] = int(ok.size - np.count_nonzero(ok))
            res["estimators"] = _estimator_summary(model, tc, n, values, ok)
            raw = {"vn": vn, "v2n": v2n, **values}
        else:
            raw = {"vn": vn, "v2n": v2n}
    else:
        raw = {"vn": vn}
    return res, raw


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> McReport:
    """Simulate, compute variations and estimators, and aggregate.

    The report is a pure function of ``config``; ``threads`` only changes
    wall time.
    """
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise DomainError("threads must be >= 1")
    tc = _constants(config.model)
    report = McReport(config=config.to_dict())
    raws = []
    for index, n in enumerate(config.n_values):
        res, raw = _run_one(config, tc, index, n, threads)
        report.results.append(res)
        raws.append((n, raw))
    if config.raw_csv:
        _write_raw(config.raw_csv, raws)
    if config.report_json:
        with open(config.report_json, "w") as fh:
            fh.write(report.to_json())
    return report


def _write_raw(target, raws):
    keys = []
    for _, raw in raws:
        keys += [k for k in raw if k not in keys]
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "n"] + keys)
        for n, raw in raws:
            size = len(raw["vn"])
            for r in range(size):
                row = [r, n]
                for k in keys:
                    row.append(f"{raw[k][r]:.17g}" if k in raw else "")
                w.writerow(row)
