import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from fracqv import cli
from fracqv.estimators import estimate_report
from fracqv.models import Fbm
from fracqv.quadvar import vn
from fracqv.sampling import read_path_csv

GOLDEN = Path(__file__).parent / "golden"

CASES = {
    "constants_fbm.json": ["constants", "--model", "fbm", "--hurst", "0.5", "--n", "1024"],
    "constants_bifbm.json": ["constants", "--model", "bifbm", "--hurst", "0.6", "--k", "0.5", "--t1", "1", "--t2", "2"],
    "constants_afbm.json": [
        "constants", "--model", "afbm", "--omega", "0.7853981633974483",
        "--profile", '{"kind": "piecewise", "breakpoints": [0, 1.5707963267948966], "values": [0.4, 0.65]}',
    ],
    "cov_point.json": ["cov", "--model", "fbm", "--hurst", "0.7", "--s", "1", "--t", "0.5"],
    "cov_grid.csv": ["cov", "--model", "bifbm", "--hurst", "0.6", "--k", "0.5", "--t1", "1", "--t2", "2", "--n", "6", "--format", "csv"],
    "simulate_fbm.csv": ["simulate", "--model", "fbm", "--hurst", "0.7", "--n", "32", "--seed", "42"],
    "quadvar_fbm.json": ["quadvar", "--model", "fbm", "--hurst", "0.3", "--n", "16", "--seed", "1", "--exact"],
    "estimate_bifbm.json": ["estimate", "--model", "bifbm", "--hurst", "0.6", "--k", "0.5", "--t1", "1", "--t2", "2", "--n", "64", "--seed", "3"],
    "mc_fbm.json": ["mc", "--model", "fbm", "--hurst", "0.7", "--n", "16", "32", "-M", "60", "--seed", "5"],
}


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _close(a, b, path="$"):
    if isinstance(a, dict):
        assert set(a) == set(b), path
        for k in a:
            _close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) and isinstance(b, (int, float)):
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12), path
    else:
        assert a == b, path


def _parse(name, text):
    if name.endswith(".json"):
        return json.loads(text)
    return [[float(x) if x[:1] in "-.0123456789" else x for x in row] for row in csv.reader(io.StringIO(text))]


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name, capsys):
    code, out, err = run(CASES[name], capsys)
    assert code == 0, err
    golden = GOLDEN / name
    _close(_parse(name, golden.read_text()), _parse(name, out))


def test_constants_sigma_sq(capsys):
    code, out, _ = run(["constants", "--model", "fbm", "--hurst", "0.5"], capsys)
    assert code == 0
    assert json.loads(out)["sigma_sq"] == 12


def test_simulate_is_byte_identical(capsys, tmp_path):
    argv = ["simulate", "--model", "fbm", "--hurst", "0.7", "--n", "1024", "--seed", "42"]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert cli.main(argv + ["-o", str(a)]) == 0
    assert cli.main(argv + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_round_trip_simulate_estimate(capsys, tmp_path):
    p = tmp_path / "p.csv"
    assert cli.main(["simulate", "--model", "fbm", "--hurst", "0.7", "--n", "256", "--seed", "8", "-o", str(p)]) == 0
    code, out, _ = run(["estimate", "--input", str(p), "--model", "fbm", "--hurst", "0.7"], capsys)
    assert code == 0
    path = read_path_csv(p)
    direct = estimate_report(Fbm(0.7), 128, vn(path.values[::2]), vn(path.values)).to_dict()
    report = json.loads(out)
    report.pop("model_spec")
    assert report == json.loads(json.dumps(direct))


def test_estimate_on_ramp_exits_2(capsys, tmp_path):
    p = tmp_path / "ramp.csv"
    t = [k / 60 for k in range(61)]
    p.write_text("t,value\n" + "".join(f"{a!r},{0.1 + 0.3 * a!r}\n" for a in t))
    code, _, err = run(["estimate", "--input", str(p)], capsys)
    assert code == 2
    assert "InvalidSampleError" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["constants", "--bogus"],
        [],
        ["frobnicate"],
        ["constants"],
        ["simulate", "--model", "fbm", "--hurst", "0.5", "--n", "16"],
        ["constants", "--model", "afbm", "--profile", "{not json"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert "error" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["constants", "--model", "fbm", "--hurst", "1.5"],
        ["cov", "--model", "bifbm", "--hurst", "0.5", "--k", "0.5", "--t1", "2", "--t2", "1", "--n", "8"],
    ],
)
def test_model_errors_exit_2(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"model": "fbm", "hurst": 0.7}, "n_values": [16], "replications": 20, "seed": 5}))
    code, out, _ = run(["mc", "--config", str(cfg)], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["config"]["replications"] == 20
    # agreeing flags are fine, disagreeing flags are an error
    assert run(["mc", "--config", str(cfg), "--seed", "5"], capsys)[0] == 0
    code, _, err = run(["mc", "--config", str(cfg), "--seed", "6"], capsys)
    assert code == 1 and "conflicts" in err
    code, _, err = run(["mc", "--config", str(cfg), "--hurst", "0.3"], capsys)
    assert code == 1


def test_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{oops")
    assert run(["constants", "--config", str(cfg)], capsys)[0] == 1
    cfg.write_text(json.dumps({"model": {"model": "fbm", "hurst": 0.5}, "colour": "red"}))
    assert run(["constants", "--config", str(cfg)], capsys)[0] == 1


def test_mc_threads_flag_identical(capsys):
    base = ["mc", "--model", "bifbm", "--hurst", "0.6", "--k", "0.5", "--t1", "1", "--t2", "2", "--n", "16", "-M", "120"]
    outs = [run(base + ["--threads", str(t)], capsys)[1] for t in (1, 4)]
    assert outs[0] == outs[1]


def test_help_documents_flags(capsys):
    for sub in ("constants", "cov", "simulate", "quadvar", "estimate", "mc"):
        code, out, _ = run([sub, "--help"], capsys)
        assert code == 0
        parser = cli.build_parser()
        sp = parser._subparsers._group_actions[0].choices[sub]
        for action in sp._actions:
            for opt in action.option_strings:
                if opt.startswith("--"):
                    assert opt in out


def test_json_output_file(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert cli.main(["constants", "--model", "fbm", "--hurst", "0.3", "-o", str(out)]) == 0
    assert math.isclose(json.loads(out.read_text())["index"], 0.3)
