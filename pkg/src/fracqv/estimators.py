"""Point estimators built from the pair ``(V_n, V_2n)`` and their standard errors.

Standard errors come in two forms.  ``"delta"`` applies the delta method to
the limiting covariance ``Sigma`` of the normalized pair at the given ``n``.
``"printed"`` evaluates the closed-form variance displays as published; they
disagree with the delta method and are kept for reference (see the README).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from .errors import DomainError, InvalidSampleError, RegimeError
from .models import AfbmSegment, BifBm, Fbm

__all__ = [
    "ratio_estimator",
    "k_estimator",
    "h_from_hk_k",
    "stderr_for",
    "afbm_bias_term",
    "afbm_bias_sqrt_n_limit",
    "EstimateReport",
    "estimate_report",
]

LOG2 = math.log(2.0)


def ratio_estimator(vn, v2n):
    """``1/2 - log(V_2n / V_n) / (2 log 2)``."""
    if not (vn > 0.0 and v2n > 0.0):
        raise InvalidSampleError(f"variations must be positive, got V_n={vn!r}, V_2n={v2n!r}")
    return 0.5 - math.log(v2n / vn) / (2.0 * LOG2)


def k_estimator(vn, hk_hat, n, t1, t2):
    """Estimate ``K`` of two-parameter FBM from ``V_n`` and an estimate of ``HK``.

    The value is returned even when it falls outside (0, 1); callers flag it.
    """
    if not vn > 0.0:
        raise InvalidSampleError(f"V_n must be positive, got {vn!r}")
    if hk_hat >= 1.0:
        raise DomainError("hk_hat >= 1 makes 4 - 2^(2 hk_hat) nonpositive")
    if not (t2 > t1 > 0.0):
        raise DomainError("observation window must satisfy 0 < t1 < t2")
    arg = (
        (2.0 * hk_hat - 1.0) * math.log(n)
        + math.log(vn)
        - math.log(4.0 - 2.0 ** (2.0 * hk_hat))
        - 2.0 * hk_hat * math.log(t2 - t1)
    )
    return 1.0 - arg / LOG2


def h_from_hk_k(hk_hat, k_hat):
    if k_hat == 0.0:
        raise DomainError("k_hat = 0 leaves H undefined")
    return hk_hat / k_hat


# ---------------------------------------------------------------------------
# Standard errors
# ---------------------------------------------------------------------------


def _quad_form(g, S):
    S = np.asarray(S, dtype=float)
    g = np.asarray(g, dtype=float)
    return float(g @ S @ g)


def _ratio_grad(x0):
    return np.array([1.0, -1.0]) / (2.0 * x0 * LOG2)


def _bifbm_grads(tc, n):
    ex = tc.extras
    hk, k = ex["hk"], ex["k"]
    span = ex["t2"] - ex["t1"]
    x0 = tc.limit
    g_hk = _ratio_grad(x0)
    slope = (2.0 * math.log(n) + 2.0 * 2.0 ** (2 * hk) * LOG2 / asy.fbm_g0(hk) - 2.0 * math.log(span)) / LOG2
    g_k = np.array([-1.0 / (x0 * LOG2), 0.0]) - slope * g_hk
    g_h = g_hk / k - hk / k**2 * g_k
    return {"ratio": g_hk, "k": g_k, "h": g_h}


def _effective_n(tc, n):
    return n * math.log(n) if tc.slowly_varying == "inverse-sqrt-log" else float(n)


def stderr_for(kind, constants: asy.TheoreticalConstants, n, form="delta"):
    """Asymptotic standard error of an estimator at sample size ``n``.

    ``kind`` is ``"ratio"`` (the ratio estimator of H, HK or H_min), ``"k"`` or
    ``"h"`` (two-parameter FBM only).  Returns ``nan`` when the variance
    evaluates negative, which signals a regime violation.
    """
    if kind not in ("ratio", "k", "h"):
        raise DomainError(f"unknown estimator kind {kind!r}")
    if form not in ("delta", "printed"):
        raise DomainError("form must be 'delta' or 'printed'")
    if n < 4:
        raise DomainError("n must be >= 4")
    tc = constants
    if kind != "ratio" and tc.model != "bifbm":
        raise DomainError(f"estimator {kind!r} exists only for two-parameter FBM")
    if form == "printed":
        key = {"ratio": "var_hk_printed" if tc.model == "bifbm" else "var_h_printed"}.get(kind, f"var_{kind}_printed")
        var = tc.extras[key] / n
    elif tc.model == "bifbm":
        var = _quad_form(_bifbm_grads(tc, n)[kind], tc.Sigma) / n
    else:
        var = _quad_form(_ratio_grad(tc.limit), tc.Sigma) / _effective_n(tc, n)
    return math.sqrt(var) if var >= 0.0 else float("nan")


# ---------------------------------------------------------------------------
# Bias of the anisotropic estimator
# ---------------------------------------------------------------------------


def _level(tc, h):
    """Normalized mean level at mesh ``h`` that drives the bias."""
    if tc.slowly_varying == "inverse-sqrt-log":
        # truncated Laplace integral, without the sqrt(-log h) normalization
        return (tc.phi(h) + tc.limit) / math.sqrt(-math.log(h))
    return tc.limit + tc.phi(h)


def afbm_bias_term(constants: asy.TheoreticalConstants, n):
    """Leading bias ``E[H_min_hat] - H_min`` of the ratio estimator.

    Zero in Case I.  Otherwise
    ``-log(level(1/(2n)) / level(1/n)) / (2 log 2)`` where the level is the
    mean of the normalized variation.
    """
    tc = constants
    if tc.model != "afbm":
        raise DomainError("bias terms apply to the anisotropic segment only")
    if tc.extras.get("case") == "I":
        return 0.0
    return -math.log(_level(tc, 1.0 / (2 * n)) / _level(tc, 1.0 / n)) / (2.0 * LOG2)


def afbm_bias_sqrt_n_limit(constants: asy.TheoreticalConstants):
    """Limit of ``sqrt(n) * afbm_bias_term`` for piecewise profiles.

    Finite only when every intermediate direction sits exactly at
    ``H_min + 1/4``; otherwise ``inf`` is returned and the regime is flagged.
    """
    tc = constants
    if tc.extras.get("case") is None:
        raise RegimeError("the sqrt(n) bias limit is defined for piecewise profiles")
    if tc.extras["case"] == "I":
        return 0.0
    if not tc.extras["bias_sqrt_n_finite"]:
        return math.inf
    b = tc.phi(1.0)  # phi(h) = b sqrt(h)
    return (b / tc.limit) * (math.sqrt(2.0) - 1.0) / (2.0 * math.sqrt(2.0) * LOG2)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EstimateReport:
    """Point estimates, standard errors, bias terms and validity flags."""

    model: str
    n: int
    vn: float
    v2n: float
    estimates: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)
    bias: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    stderr_source: str = "plug-in"

    def to_dict(self):
        return {
            "model": self.model,
            "n": self.n,
            "vn": self.vn,
            "v2n": self.v2n,
            "estimates": dict(self.estimates),
            "stderr": dict(self.stderr),
            "bias": dict(self.bias),
            "flags": dict(self.flags),
            "stderr_source": self.stderr_source,
        }


def _in_unit(x):
    return x is not None and math.isfinite(x) and 0.0 < x < 1.0


def estimate_report(model, n, vn, v2n, plug_in=True, form="delta") -> EstimateReport:
    """Run every estimator that applies to ``model`` on one ``(V_n, V_2n)`` pair.

    With ``plug_in`` the standard errors use estimated parameters whenever
    they are valid and fall back to the model's true parameters otherwise.
    """
    tag = getattr(model, "tag", None)
    rep = EstimateReport(model=tag or "unknown", n=int(n), vn=float(vn), v2n=float(v2n))
    ratio_ok = vn > 0.0 and v2n > 0.0
    rep.flags["ratio_positive"] = bool(ratio_ok)
    if not ratio_ok:
        raise InvalidSampleError(f"variations must be positive, got V_n={vn!r}, V_2n={v2n!r}")
    r = ratio_estimator(vn, v2n)
    rep.stderr_source = "plug-in" if plug_in else "true"

    if isinstance(model, Fbm):
        rep.estimates["h"] = r
        rep.flags["h_in_unit"] = _in_unit(r)
        use = r if plug_in and _in_unit(r) else model.hurst
        if plug_in and not _in_unit(r):
            rep.stderr_source = "true"
        rep.stderr["h"] = stderr_for("ratio", asy.fbm_constants(use), n, form)
    elif isinstance(model, BifBm):
        rep.estimates["hk"] = r
        rep.flags["hk_in_unit"] = _in_unit(r)
        k_hat = h_hat = None
        if r < 1.0:
            k_hat = k_estimator(vn, r, n, model.t1, model.t2)
            rep.estimates["k"] = k_hat
            if k_hat != 0.0:
                h_hat = h_from_hk_k(r, k_hat)
                rep.estimates["h"] = h_hat
        rep.flags["k_in_unit"] = _in_unit(k_hat)
        rep.flags["h_in_unit"] = _in_unit(k_hat) and _in_unit(h_hat)
        if plug_in and rep.flags["hk_in_unit"] and rep.flags["h_in_unit"]:
            tc = asy.bifbm_constants(h_hat, k_hat, model.t1, model.t2)
        else:
            if plug_in:
                rep.stderr_source = "true"
            tc = asy.bifbm_constants(model.hurst, model.k, model.t1, model.t2)
        for key, kind in (("hk", "ratio"), ("k", "k"), ("h", "h")):
            rep.stderr[key] = stderr_for(kind, tc, n, form)
    elif isinstance(model, AfbmSegment):
        tc = asy.afbm_constants(model)
        rep.estimates["h_min"] = r
        rep.flags["h_min_in_unit"] = _in_unit(r)
        if form == "delta" and plug_in and _in_unit(r):
            # the delta-method variance of the ratio estimator does not depend
            # on the angular scale, so the FBM constants at the estimate suffice
            se = stderr_for("ratio", asy.fbm_constants(r), n)
            if tc.slowly_varying == "inverse-sqrt-log":
                se /= math.sqrt(math.log(n))
            rep.stderr["h_min"] = se
        else:
            if plug_in:
                rep.stderr_source = "true"
            rep.stderr["h_min"] = stderr_for("ratio", tc, n, form)
        b = afbm_bias_term(tc, n)
        rep.bias["h_min"] = b
        rep.estimates["h_min_debiased"] = r - b
        rep.flags["case"] = tc.extras.get("case", "non-lass")
        if tc.extras.get("case") == "II" and not tc.extras["bias_sqrt_n_finite"]:
            rep.flags["regime_warning"] = "sqrt(n) bias diverges; the ratio estimator is not root-n centred"
    else:
        raise DomainError(f"unsupported model {model!r}")
    rep.flags["stderr_valid"] = all(math.isfinite(v) for v in rep.stderr.values())
    return rep
