"""Command-line front end.

Exit status is 0 on success, 1 on usage errors (unknown flags, malformed or
conflicting configuration) and 2 when a model, numerical or sample error is
raised by the library.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import estimators as est
from .errors import FracqvError, InvalidSampleError
from .mc import ExperimentConfig, THREADS_ENV, default_threads, run_experiment
from .models import BifBm, Fbm, afbm_segment_cov, bifbm_segment_cov, cov_grid, fbm_cov, model_from_dict, model_to_dict
from .quadvar import exact_cov_vn_v2n, exact_mean_vn, exact_var_vn, increment_cov, vn
from .sampling import PathSample, factorize, read_path_csv, replication_stream, sample_path, write_path_csv

__all__ = ["main", "build_parser", "UsageError"]

MODEL_FLAGS = ("hurst", "k", "t1", "t2", "length", "eps", "omega")
CONFIG_KEYS = {
    "model",
    "n",
    "n_values",
    "replications",
    "seed",
    "rep",
    "bivariate",
    "estimators",
    "exact_moments",
    "form",
    "plug_in",
}


class UsageError(Exception):
    """Bad command line or configuration; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message} (see '{self.prog} --help')")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--config", help="JSON file with a 'model' object and experiment fields")
    g.add_argument("--model", choices=("fbm", "bifbm", "afbm"), help="process family")
    g.add_argument("--hurst", type=float, help="Hurst index H (fbm, bifbm)")
    g.add_argument("--k", type=float, help="second index K (bifbm)")
    g.add_argument("--t1", type=float, help="window start T1 > 0 (bifbm)")
    g.add_argument("--t2", type=float, help="window end T2 > T1 (bifbm)")
    g.add_argument("--profile", help="directional Hurst profile as inline JSON (afbm)")
    g.add_argument("--length", type=float, help="segment length L (afbm, default 1)")
    g.add_argument("--eps", type=float, help="segment offset (afbm, default 0)")
    g.add_argument("--omega", type=float, help="segment direction in radians (afbm, default 0)")


def _add_output(p, formats=("json",)):
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    p.add_argument("--format", choices=formats, default=formats[0], help="output format")


def build_parser():
    p = _Parser(prog="fracqv", description="Quadratic variations of fractional Gaussian processes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("constants", help="asymptotic constants of V_n as JSON")
    _add_model_flags(c)
    c.add_argument("--n", type=int, help="also report estimator standard errors at this n")
    _add_output(c)

    c = sub.add_parser("cov", help="covariance at a point or on the uniform grid")
    _add_model_flags(c)
    c.add_argument("--n", type=int, help="grid resolution (grid dump)")
    c.add_argument("--s", type=float, help="first time (pointwise value)")
    c.add_argument("--t", type=float, help="second time (pointwise value)")
    _add_output(c, ("json", "csv"))

    c = sub.add_parser("simulate", help="one exact sample path as CSV")
    _add_model_flags(c)
    c.add_argument("--n", type=int, help="number of grid intervals")
    c.add_argument("--seed", type=int, help="master seed")
    c.add_argument("--rep", type=int, help="replication index (default 0)")
    _add_output(c, ("csv", "json"))

    for name, text in (
        ("quadvar", "V_n and V_2n of a path on the 2n grid"),
        ("estimate", "Hurst-type estimates from a path on the 2n grid"),
    ):
        c = sub.add_parser(name, help=text)
        _add_model_flags(c)
        c.add_argument("--input", help="path CSV with header t,value and an even number of intervals")
        c.add_argument("--n", type=int, help="coarse resolution n when simulating instead of reading")
        c.add_argument("--seed", type=int, help="seed when simulating")
        c.add_argument("--rep", type=int, help="replication index when simulating (default 0)")
        if name == "quadvar":
            c.add_argument("--exact", action="store_true", help="add exact Gaussian moments for the model")
        else:
            c.add_argument("--form", choices=("delta", "printed"), help="standard error form (default delta)")
            c.add_argument("--no-plug-in", dest="plug_in", action="store_const", const=False,
                           help="use true model parameters in standard errors")
        _add_output(c)

    c = sub.add_parser("mc", help="seeded Monte Carlo experiment")
    _add_model_flags(c)
    c.add_argument("--n", type=int, nargs="+", help="coarse resolutions n")
    c.add_argument("--replications", "-M", type=int, help="replication count")
    c.add_argument("--seed", type=int, help="master seed")
    c.add_argument("--univariate", dest="bivariate", action="store_const", const=False,
                   help="simulate on the n grid only and skip estimators")
    c.add_argument("--no-estimators", dest="estimators", action="store_const", const=False,
                   help="skip estimator statistics")
    c.add_argument("--exact-moments", dest="exact_moments", choices=("auto", "yes", "no"),
                   help="Isserlis targets (default auto)")
    c.add_argument("--raw-csv", help="write per-replication statistics here")
    c.add_argument("--threads", type=int, help=f"worker threads (default from {THREADS_ENV}, else 1)")
    _add_output(c)
    return p


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed config {path!r}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config fields: {sorted(unknown)}")
    if "model" in cfg and not isinstance(cfg["model"], dict):
        raise UsageError("config field 'model' must be an object")
    return cfg


def _merge(cfg, key, flag_value, label=None):
    """Flag and config value for one field; disagreement is an error."""
    have = key in cfg
    if flag_value is None:
        return cfg.get(key)
    if have and cfg[key] != flag_value:
        raise UsageError(f"--{label or key} {flag_value!r} conflicts with config value {cfg[key]!r}")
    return flag_value


def _model_spec(args, cfg, default=None):
    spec = dict(cfg.get("model", {}))
    kind = _merge(spec, "model", args.model)
    if kind is None:
        if default is None:
            raise UsageError("a model is required (--model or a config file)")
        kind = default["model"]
        spec = {**default, **spec}
    spec["model"] = kind
    for name in MODEL_FLAGS:
        val = _merge(spec, name, getattr(args, name))
        if val is not None:
            spec[name] = val
    if args.profile is not None:
        try:
            prof = json.loads(args.profile)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--profile is not valid JSON: {exc}") from None
        spec["profile"] = _merge(spec, "profile", prof)
    return spec


def _model(args, cfg, default=None):
    return model_from_dict(_model_spec(args, cfg, default))


def _need(value, flag):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(text, target):
    if target is None:
        sys.stdout.write(text)
        return
    try:
        with open(target, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {target!r}: {exc.strerror}") from None


def _emit_json(obj, target):
    _emit(json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n", target)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _constants_for(model):
    if isinstance(model, Fbm):
        return asy.fbm_constants(model.hurst)
    if isinstance(model, BifBm):
        return asy.bifbm_constants(model.hurst, model.k, model.t1, model.t2)
    return asy.afbm_constants(model)


def _cmd_constants(args, cfg):
    model = _model(args, cfg)
    tc = _constants_for(model)
    out = {"model_spec": model_to_dict(model), **tc.to_dict()}
    n = _merge(cfg, "n", args.n)
    if n is not None:
        kinds = ("ratio", "k", "h") if isinstance(model, BifBm) else ("ratio",)
        out["stderr"] = {
            form: {kind: est.stderr_for(kind, tc, n, form) for kind in kinds} for form in ("delta", "printed")
        }
        out["stderr_n"] = n
    _emit_json(out, args.output)


def _pointwise(model, s, t):
    if isinstance(model, Fbm):
        return fbm_cov(s, t, model.hurst)
    if isinstance(model, BifBm):
        return bifbm_segment_cov(s, t, model)
    return afbm_segment_cov(s, t, model)


def _cmd_cov(args, cfg):
    model = _model(args, cfg)
    n = _merge(cfg, "n", args.n)
    if args.s is not None or args.t is not None:
        if n is not None:
            raise UsageError("give either --s/--t or --n, not both")
        s, t = _need(args.s, "--s"), _need(args.t, "--t")
        val = float(_pointwise(model, s, t))
        if args.format == "csv":
            _emit(f"s,t,cov\n{s:.17g},{t:.17g},{val:.17g}\n", args.output)
        else:
            _emit_json({"model_spec": model_to_dict(model), "s": s, "t": t, "cov": val}, args.output)
        return
    grid = cov_grid(model, _need(n, "--n"))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in grid.entries:
            w.writerow([f"{x:.17g}" for x in row])
        _emit(buf.getvalue(), args.output)
    else:
        _emit_json(
            {"model_spec": model_to_dict(model), "n": grid.n, "times": grid.times, "entries": grid.entries},
            args.output,
        )


def _simulate(model, n, seed, rep):
    factor = factorize(cov_grid(model, n), overwrite=True)
    prov = {"model_spec": model_to_dict(model), "seed": seed, "rep": rep, "jitter": factor.jitter}
    return sample_path(factor, replication_stream(seed, rep), provenance=prov)


def _cmd_simulate(args, cfg):
    model = _model(args, cfg)
    n = _need(_merge(cfg, "n", args.n), "--n")
    seed = _need(_merge(cfg, "seed", args.seed), "--seed")
    rep = _merge(cfg, "rep", args.rep) or 0
    path = _simulate(model, n, seed, rep)
    if args.format == "csv":
        buf = io.StringIO()
        write_path_csv(path, buf)
        _emit(buf.getvalue(), args.output)
    else:
        _emit_json({"n": path.n, "times": path.times, "values": path.values, "provenance": path.provenance},
                   args.output)


def _fine_path(args, cfg, model_default=None):
    """Model (or ``None``) and a path on the 2n grid, read or simulated."""
    has_model = args.model is not None or "model" in cfg
    if args.input is not None:
        if args.n is not None or args.seed is not None or args.rep is not None:
            raise UsageError("--input excludes --n, --seed and --rep")
        try:
            path = read_path_csv(args.input)
        except OSError as exc:
            raise UsageError(f"cannot read {args.input!r}: {exc.strerror}") from None
        model = _model(args, cfg, model_default) if has_model or model_default else None
    else:
        model = _model(args, cfg)
        n = _need(_merge(cfg, "n", args.n), "--n")
        seed = _need(_merge(cfg, "seed", args.seed), "--seed")
        rep = _merge(cfg, "rep", args.rep) or 0
        path = _simulate(model, 2 * n, seed, rep)
    if path.n % 2:
        raise UsageError(f"the path needs an even number of intervals, got {path.n}")
    return model, path


def _pair(path: PathSample):
    coarse = PathSample(path.n // 2, path.values[::2])
    return coarse.n, vn(coarse), vn(path)


def _check_nondegenerate(path: PathSample, *variations):
    """Treat variations at the rounding level of the path values as zero."""
    scale = float(np.max(np.abs(path.values))) if path.values.size else 0.0
    floor = path.n * (16.0 * np.finfo(float).eps * scale) ** 2
    for v in variations:
        if v <= floor:
            raise InvalidSampleError(
                f"quadratic variation {v:.3g} is at rounding level; the path is affine and the ratio is undefined"
            )


def _cmd_quadvar(args, cfg):
    model, path = _fine_path(args, cfg)
    n, v1, v2 = _pair(path)
    out = {"n": n, "vn": v1, "v2n": v2}
    if args.exact:
        if model is None:
            raise UsageError("--exact needs a model")
        grid = cov_grid(model, 2 * n)
        d2 = increment_cov(grid)
        d1 = increment_cov(grid.coarsen())
        out["exact"] = {
            "mean_vn": exact_mean_vn(d1),
            "var_vn": exact_var_vn(d1),
            "mean_v2n": exact_mean_vn(d2),
            "var_v2n": exact_var_vn(d2),
            "cov_vn_v2n": exact_cov_vn_v2n(d2),
        }
        out["model_spec"] = model_to_dict(model)
    _emit_json(out, args.output)


# used when a path is estimated without a model: the standard FBM estimator
_ESTIMATE_DEFAULT = {"model": "fbm", "hurst": 0.5}


def _cmd_estimate(args, cfg):
    model, path = _fine_path(args, cfg, _ESTIMATE_DEFAULT)
    n, v1, v2 = _pair(path)
    _check_nondegenerate(path, v1, v2)
    form = _merge(cfg, "form", args.form) or "delta"
    plug_in = _merge(cfg, "plug_in", args.plug_in)
    rep = est.estimate_report(model, n, v1, v2, plug_in=True if plug_in is None else plug_in, form=form)
    _emit_json({"model_spec": model_to_dict(model), **rep.to_dict()}, args.output)


def _cmd_mc(args, cfg):
    model = _model(args, cfg)
    n_values = _merge(cfg, "n_values", args.n, "n")
    exact = {"auto": None, "yes": True, "no": False}.get(args.exact_moments, args.exact_moments)
    if args.exact_moments is None:
        exact = cfg.get("exact_moments")
    elif "exact_moments" in cfg and cfg["exact_moments"] != exact:
        raise UsageError(f"--exact-moments {args.exact_moments} conflicts with config")
    bivariate = _merge(cfg, "bivariate", args.bivariate)
    estimators = _merge(cfg, "estimators", args.estimators)
    config = ExperimentConfig(
        model=model,
        n_values=_need(n_values, "--n"),
        replications=_need(_merge(cfg, "replications", args.replications), "--replications"),
        seed=_merge(cfg, "seed", args.seed) or 0,
        bivariate=True if bivariate is None else bivariate,
        estimators=True if estimators is None else estimators,
        exact_moments=exact,
        raw_csv=args.raw_csv,
    )
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    report = run_experiment(config, threads=threads)
    _emit_json(report.to_dict(), args.output)


_COMMANDS = {
    "constants": _cmd_constants,
    "cov": _cmd_cov,
    "simulate": _cmd_simulate,
    "quadvar": _cmd_quadvar,
    "estimate": _cmd_estimate,
    "mc": _cmd_mc,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args.config)
        _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"fracqv: error: {exc}", file=sys.stderr)
        return 1
    except (FracqvError, ValueError, ArithmeticError) as exc:
        print(f"fracqv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
