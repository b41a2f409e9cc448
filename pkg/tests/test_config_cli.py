import csv
import json

import numpy as np
import pytest

from quadminimax.cli import main
from quadminimax.config import parse_config
from quadminimax.errors import ConfigError
from quadminimax.instances import random_instance
from quadminimax.solver import CandidatePoint


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_config(path, d):
    path.write_text(json.dumps(d))
    return path


def moments_cfg(envs, weights=None, intercepts=None, **extra):
    d = {"environments": [{"moments": {"G": np.atleast_2d(e.G).tolist(), "Z": e.Z.tolist(),
                                       "y2": e.y2}} for e in envs]}
    if weights is not None:
        d["weights"] = np.asarray(weights).tolist()
    if intercepts is not None:
        d["intercepts"] = np.asarray(intercepts).tolist()
    d.update(extra)
    return d


# ------------------------------------------------------------------ config

def test_parse_defaults(data_dir):
    cfg = parse_config(json.loads((data_dir / "classic.json").read_text()), data_dir)
    assert cfg.mode == "complete" and cfg.epsilon is None and cfg.bisections == 60
    assert [m.y2 for m in cfg.load_moments()] == [0.0, 4.0]
    cfg = parse_config({"environments": [{"moments": {"G": [[1]], "Z": [1], "y2": 2}}] * 2})
    assert np.array_equal(cfg.weights, np.eye(2)) and np.array_equal(cfg.intercepts, [0, 0])


@pytest.mark.parametrize("bad", [
    {"environments": []},
    {"environments": [{"csv": "a.csv", "target": "y"}]},
    {"environments": [{"moments": {"G": [[1]], "Z": [0], "y2": 1}}], "colour": 1},
    {"environments": [{"moments": {"G": [[1]], "Z": [0], "y2": 1}}], "weights": [[1, 1]]},
    {"environments": [{"moments": {"G": [[1]], "Z": [0], "y2": 1}}], "mode": "fast"},
    {"environments": [{"moments": {"G": [[1]], "Z": [0], "y2": 1}}], "epsilon": -1},
    {"environments": [{"moments": {"G": [[1]], "Z": [0], "y2": 1}}],
     "tolerances": {"tau_magic": 1}},
])
def test_parse_rejects(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


# ------------------------------------------------------------------ fit

def test_fit_classic(data_dir, tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(["fit", "--config", data_dir / "classic.json", "--out", out], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["status"] == "ok" and rep["timing_ms"] is None
    assert rep["chosen_betas"] == [[pytest.approx(1.0, abs=1e-9)]]
    assert rep["min_value"] == pytest.approx(1.0, abs=1e-9)
    for key in ("version", "config_echo", "candidates", "chosen", "epsilon_set", "diagnostics"):
        assert key in rep
    assert set(rep["diagnostics"]) >= {"pairs", "warnings"}
    cand = rep["candidates"][rep["chosen"][0]]
    assert set(cand) >= {"beta", "source", "f_value", "active", "admissible"}
    assert cand["active"] == [1, 2]


def test_fit_is_byte_identical(data_dir, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["fit", "--config", data_dir / "classic.json", "--out", path], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_fit_timing(data_dir, capsys):
    code, out, _ = run(["fit", "--config", data_dir / "classic.json", "--timing"], capsys)
    assert code == 0 and json.loads(out)["timing_ms"] >= 0


def test_fit_single_environment_is_ols(tmp_path, capsys):
    G = np.array([[2.0, 0.3], [0.3, 1.0]])
    Z = np.array([1.0, -0.5])
    cfg = write_config(tmp_path / "c.json", {"environments": [
        {"moments": {"G": G.tolist(), "Z": Z.tolist(), "y2": 3.0}}]})
    code, out, _ = run(["fit", "--config", cfg], capsys)
    assert code == 0
    assert json.loads(out)["chosen_betas"][0] == pytest.approx(np.linalg.solve(G, Z).tolist())


def test_fit_mixed_sign_row_is_input_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {
        "environments": [{"moments": {"G": [[1]], "Z": [0], "y2": 1}}] * 2,
        "weights": [[1, 0], [1, -1]]})
    code, _, err = run(["fit", "--config", cfg], capsys)
    assert code == 1 and "weight row 2" in err


def test_fit_input_errors(tmp_path, capsys):
    assert run(["fit", "--config", tmp_path / "missing.json"], capsys)[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["fit", "--config", bad], capsys)[0] == 1
    cfg = write_config(tmp_path / "c.json", {"environments": [
        {"csv": "nope.csv", "target": "y", "covariates": ["x"]}]})
    assert run(["fit", "--config", cfg], capsys)[0] == 1


def test_fit_pairwise_mode_triangle_is_degenerate(tmp_path, capsys):
    from quadminimax.consistency import classic_triple_point
    exp = classic_triple_point()
    cfg = write_config(tmp_path / "c.json", moments_cfg(exp.population, mode="pairwise"))
    code, out, err = run(["fit", "--config", cfg], capsys)
    assert code == 2 and "degenerate" in err
    rep = json.loads(out)
    assert rep["status"] == "NoAdmissibleCandidate" and rep["chosen"] == []


def test_report_roundtrip(data_dir, capsys):
    _, out, _ = run(["fit", "--config", data_dir / "classic.json"], capsys)
    rep = json.loads(out)
    assert json.loads(json.dumps(rep)) == rep
    for c in rep["candidates"]:
        assert CandidatePoint.from_dict(c).to_dict() == c


# ------------------------------------------------------------------ check

def test_check_classic(data_dir, capsys):
    code, out, _ = run(["check", "--config", data_dir / "classic.json"], capsys)
    res = json.loads(out)
    assert code == 0 and res["passed"] and abs(res["value_gap"]) < 1e-5


def test_check_mixed_p1(tmp_path, capsys):
    from quadminimax.consistency import mixed_weights
    exp = mixed_weights()
    cfg = write_config(tmp_path / "c.json", moments_cfg(exp.population, exp.scheme.w,
                                                         exp.scheme.kappa))
    code, out, _ = run(["check", "--config", cfg], capsys)
    res = json.loads(out)
    assert code == 0 and [o["method"] for o in res["oracles"]] == ["Grid"]
    assert -res["value_gap"] <= res["tolerance"]


def test_check_mixed_p4_unavailable(tmp_path, capsys):
    _, envs, scheme = random_instance(np.random.default_rng(0), 4, 2, 2, mixed=True)
    cfg = write_config(tmp_path / "c.json", moments_cfg(envs, scheme.w, scheme.kappa))
    code, _, err = run(["check", "--config", cfg], capsys)
    assert code == 3 and "no applicable oracle" in err


# ------------------------------------------------------------------ roots

def test_roots_coeffs(capsys):
    code, out, _ = run(["roots", "--coeffs=-2,0,1", "--json"], capsys)
    assert code == 0 and json.loads(out)["roots"] == pytest.approx([-2 ** 0.5, 2 ** 0.5])
    code, out, _ = run(["roots", "--coeffs", "1,0,1"], capsys)
    assert code == 0 and "no real roots" in out
    assert run(["roots", "--coeffs", "0,0"], capsys)[0] == 1
    assert run(["roots", "--coeffs", "a,b"], capsys)[0] == 1
    assert run(["roots", "--coeffs=1,-2,1"], capsys)[0] == 2


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["fit"])
    assert info.value.code == 1


def test_roots_pair(data_dir, capsys):
    code, out, _ = run(["roots", "--pair", "1,2", "--config", data_dir / "classic.json",
                        "--json"], capsys)
    res = json.loads(out)
    assert code == 0 and res["ptilde"] == pytest.approx([-4, 8])
    assert res["lambdas"] == [pytest.approx(0.5)] and res["betas"] == [[pytest.approx(1.0)]]
    code, out, _ = run(["roots", "--pair", "1,2", "--config", data_dir / "classic.json"], capsys)
    assert code == 0 and "lambda = 0.5" in out
    assert run(["roots", "--pair", "1,3", "--config", data_dir / "classic.json"], capsys)[0] == 1
    assert run(["roots", "--pair", "1,2"], capsys)[0] == 1


# ------------------------------------------------------------------ simulate

def _sem(tmp_path, **kw):
    d = {"p": 1, "coefficients": {"mean": [[0, 0], [0, 0]]}, "noise": {"kind": "zero"},
         "shifts": [[1, 2], [0, -1], [3, 0]], "seed": 3}
    d.update(kw)
    path = tmp_path / "sem.json"
    path.write_text(json.dumps(d))
    return path


def test_simulate_constant_rows(tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["simulate", "--spec", _sem(tmp_path), "--out-dir", out, "--n", 4], capsys)[0] == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["files"] == ["env_1.csv", "env_2.csv", "env_3.csv"] and man["n"] == 4
    with open(out / "env_1.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["y", "x1"] and all(r == ["1.0", "2.0"] for r in rows[1:])
    assert len(rows) == 5


def test_simulate_is_byte_identical(tmp_path, capsys):
    spec = _sem(tmp_path, noise={"kind": "normal"}, coefficients={"mean": [[0, 0.4], [0, 0]],
                                                                  "scale": 0.1})
    for d in ("a", "b"):
        assert run(["simulate", "--spec", spec, "--out-dir", tmp_path / d, "--n", 50],
                   capsys)[0] == 0
    for name in ("env_1.csv", "env_2.csv", "env_3.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_then_fit(tmp_path, capsys):
    spec = _sem(tmp_path, noise={"kind": "normal"})
    out = tmp_path / "data"
    run(["simulate", "--spec", spec, "--out-dir", out, "--n", 500], capsys)
    cfg = write_config(out / "fit.json", {"environments": [
        {"csv": f"env_{i}.csv", "target": "y", "covariates": ["x1"]} for i in (1, 2, 3)]})
    code, out_, _ = run(["fit", "--config", cfg], capsys)
    assert code == 0 and len(json.loads(out_)["chosen"]) == 1


def test_simulate_bad_spec(tmp_path, capsys):
    assert run(["simulate", "--spec", _sem(tmp_path, shifts=[[1, 2, 3]]), "--out-dir",
                tmp_path / "o"], capsys)[0] == 1


# ------------------------------------------------------------------ consistency

def test_consistency_subcommand(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    code, _, _ = run(["consistency", "--fixture", "classic_two_env", "--reps", 2,
                      "--schedule", "100,1000", "--out", out], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["n"] for r in rows] == ["100", "1000"]
    assert run(["consistency", "--fixture", "nope"], capsys)[0] == 1
