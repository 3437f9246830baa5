import json
import math
import os

import numpy as np
import pytest

from maxmargin.errors import SolverFailure
from maxmargin.harness import cli, runner
from maxmargin.harness.config import ConfigError, from_dict, load_config, override
from maxmargin.harness.report import ReportKeyError, compare_report, read_csv
from maxmargin.harness.runner import run
from maxmargin.harness.selftest import run_selftest


def _iso(tmp_path, **extra):
    raw = {"experiment": "isotropic_curve", "model": {"beta": [1.0, 8.0]},
           "grid": {"psi": [0.05, 2.0, 4.0]}, "sim": {"p": 120, "replicates": 3},
           "output": {"path": str(tmp_path)}}
    raw.update(extra)
    return raw


def _strip_created(path):
    with open(path, encoding="utf-8") as fh:
        return [ln for ln in fh if not ln.startswith("# created:")]


# configuration -------------------------------------------------------------

@pytest.mark.parametrize("mutate, msg", [
    (lambda r: r["grid"].update(psi=[]), "empty grid"),
    (lambda r: r.update(experiment="fig9"), "unknown experiment"),
    (lambda r: r["grid"].update(psi=[-1.0]), "positive"),
    (lambda r: r["sim"].update(replicates=0), "at least 1"),
    (lambda r: r["sim"].update(seeds=[1, 2]), "length"),
    (lambda r: r["sim"].update(bogus=1), "unknown keys"),
    (lambda r: r["grid"].update(psi=[100.0]), "fewer than 2"),
    (lambda r: r.update(workers=0), "workers"),
])
def test_config_validation(tmp_path, mutate, msg):
    raw = _iso(tmp_path)
    mutate(raw)
    with pytest.raises(ConfigError, match=msg):
        from_dict(raw)


def test_misspecified_needs_psi0(tmp_path):
    with pytest.raises(ConfigError, match="psi0"):
        from_dict({"experiment": "misspecified_curve", "grid": {"psi": [1.0]}})


def test_config_seed_expansion_and_overrides(tmp_path):
    cfg = from_dict(_iso(tmp_path))
    assert cfg.sim.seed_list() == [0, 1000, 2000]
    cfg2 = override(cfg, seed=7, workers=2, quad_order=96, output_path="elsewhere")
    assert cfg2.sim.seed_list() == [7, 1007, 2007]
    assert cfg2.workers == 2 and cfg2.output_path == "elsewhere"
    assert cfg2.numerics.gh_order == 96 and cfg2.numerics.mp_order == 96
    explicit = from_dict(_iso(tmp_path, sim={"p": 120, "replicates": 2, "seeds": [5, 9]}))
    assert explicit.sim.seed_list() == [5, 9]


def test_rf_grid_forms(tmp_path):
    a = from_dict({"experiment": "rf_surface", "grid": {"psi1": [1.0, 2.0], "psi2": [2.0]}})
    b = from_dict({"experiment": "rf_surface", "grid": {"pairs": [[1.0, 2.0], [2.0, 2.0]]}})
    assert a.grid == b.grid == ((1.0, 2.0), (2.0, 2.0))


def test_load_config_and_env_override(tmp_path, monkeypatch):
    path = tmp_path / "c.toml"
    path.write_text('experiment = "isotropic_curve"\n[grid]\npsi = [2.0]\n[output]\npath = "a"\n')
    assert load_config(path).output_path == "a"
    monkeypatch.setenv("MAXMARGIN_OUT", str(tmp_path / "b"))
    assert load_config(path).output_path == str(tmp_path / "b")
    path.write_text("experiment = [")
    with pytest.raises(ConfigError):
        load_config(path)


# runs ------------------------------------------------------------------------

def test_run_layout_and_markers(tmp_path):
    res = run(from_dict(_iso(tmp_path)))
    assert res.status == 0
    asym = read_csv(res.files["asymptotic"])
    assert [r["status"] for r in asym] == ["below_threshold", "ok", "ok"] * 2
    summary = read_csv(res.files["compare"])
    for col in ("psi", "kappa_star", "kappa_n_mean", "kappa_n_sem", "err_star", "err_n_mean",
                "err_n_sem"):
        assert col in summary[0]
    below = [r for r in summary if r["psi"] == "0.05"]
    assert all(r["marker"] == "non-separable" and r["dev_kappa"] == "nan" for r in below)
    above = [r for r in summary if r["psi"] != "0.05"]
    assert all(r["marker"] == "" and float(r["dev_kappa"]) >= 0 for r in above)
    with open(res.files["asymptotic"], encoding="utf-8") as fh:
        head = [ln for ln in fh if ln.startswith("#")]
    assert head[0].startswith("# maxmargin ") and any("gh_order=" in ln for ln in head)
    assert head[-1].startswith("# created:")


@pytest.mark.property
def test_rerun_and_worker_determinism(tmp_path):
    a = run(from_dict(_iso(tmp_path / "a")))
    b = run(from_dict(_iso(tmp_path / "b")))
    c = run(from_dict(_iso(tmp_path / "c", workers=2)))
    for leg in ("asymptotic", "simulation", "compare"):
        ref = _strip_created(a.files[leg])
        assert ref == _strip_created(b.files[leg])
        assert ref == _strip_created(c.files[leg])


def test_solver_failure_recorded_per_point(tmp_path, monkeypatch):
    real = runner.kappa_star

    def flaky(model, mu, psi, *args, **kw):
        if psi == 4.0:
            raise SolverFailure("forced")
        return real(model, mu, psi, *args, **kw)

    monkeypatch.setattr(runner, "kappa_star", flaky)
    raw = _iso(tmp_path)
    raw["sim"]["enabled"] = False
    res = run(from_dict(raw), legs=("predict",))
    assert res.status == 1
    rows = read_csv(res.files["asymptotic"])
    assert len(rows) == 6
    assert sum(r["status"].startswith("failed") for r in rows) == 2
    with open(res.files["errors"], encoding="utf-8") as fh:
        report = json.load(fh)
    assert len(report) == 2 and "forced" in report[0]["status"]


def test_other_experiments_run(tmp_path):
    cfgs = [
        {"experiment": "misspecified_curve", "model": {"beta": 8.0, "psi0": 2.0},
         "grid": {"psi": [1.0, 3.0]}, "sim": {"p": 100, "replicates": 2}},
        {"experiment": "rf_surface", "model": {"beta": 1.0}, "grid": {"pairs": [[2.0, 1.0]]},
         "sim": {"d": 40, "replicates": 2, "n_test": 2000}},
        {"experiment": "wide_limit_check", "grid": {"psi2": [2.0], "psi1_wide": [20.0]}},
        {"experiment": "soft_margin_check", "model": {"beta": 4.0}, "grid": {"psi2": [2.0]},
         "sim": {"d": 40, "replicates": 2}},
        {"experiment": "coordinate_law_check", "grid": {"psi": [4.0]},
         "sim": {"p": 200, "replicates": 1}},
        {"experiment": "margin_bound_compare", "grid": {"psi": [2.0, 4.0]}},
    ]
    for raw in cfgs:
        raw["output"] = {"path": str(tmp_path / raw["experiment"])}
        res = run(from_dict(raw))
        assert res.status == 0, raw["experiment"]
        rows = read_csv(res.files["asymptotic"])
        assert rows and all(r["status"] == "ok" for r in rows)
    rows = read_csv(tmp_path / "margin_bound_compare" / "margin_bound_compare_asymptotic.csv")
    assert all(r["bound_vacuous"] == "true" for r in rows)
    ks = read_csv(tmp_path / "coordinate_law_check" / "coordinate_law_check_simulation.csv")
    assert 0 < float(ks[0]["ks"]) < 1


# compare report --------------------------------------------------------------

def test_self_comparison_is_zero(tmp_path):
    raw = _iso(tmp_path)
    raw["sim"]["enabled"] = False
    res = run(from_dict(raw), legs=("predict",))
    rows = compare_report(res.files["asymptotic"], res.files["asymptotic"])
    ok = [r for r in rows if not r["marker"]]
    assert len(ok) == 4
    assert all(r["dev_kappa"] == 0.0 and r["dev_err"] == 0.0 for r in ok)
    assert all(r["marker"] == "non-separable" for r in rows if r["marker"])


def test_key_mismatch(tmp_path):
    a = _iso(tmp_path / "a")
    b = _iso(tmp_path / "b")
    b["grid"]["psi"] = [2.0, 5.0]
    ra = run(from_dict(a), legs=("predict",))
    rb = run(from_dict(b), legs=("predict",))
    with pytest.raises(ReportKeyError):
        compare_report(ra.files["asymptotic"], rb.files["asymptotic"])


def test_all_non_separable_replicates_marked():
    asym = ("model,beta,psi,psi1,psi2,kappa_star,err_star,status\n"
            "isotropic,1.0,2.0,,,0.5,0.4,ok\n")
    sim = ("model,beta,psi,psi1,psi2,kappa_n,err_n,separable,status\n"
           "isotropic,1.0,2.0,,,,,false,non_separable\n")
    (row,) = compare_report(asym, sim)
    assert row["marker"] == "non-separable" and math.isnan(row["dev_kappa"])


# command line ----------------------------------------------------------------

def _write_cfg(tmp_path, raw):
    lines = [f'experiment = "{raw["experiment"]}"', "[model]", f'beta = {raw["model"]["beta"]}',
             "[grid]", f'psi = {raw["grid"]["psi"]}', "[sim]"]
    lines += [f"{k} = {v}" for k, v in raw["sim"].items()]
    path = tmp_path / "cfg.toml"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_cli_experiment(tmp_path, capsys):
    path = _write_cfg(tmp_path, _iso(tmp_path))
    out = tmp_path / "out"
    rc = cli.main(["experiment", "--config", str(path), "--out", str(out), "--seed", "3"])
    assert rc == 0
    assert "kappa_n_mean" in capsys.readouterr().out
    assert sorted(os.listdir(out)) == ["isotropic_curve_asymptotic.csv",
                                       "isotropic_curve_compare.csv",
                                       "isotropic_curve_simulation.csv"]
    seeds = {r["seed"] for r in read_csv(out / "isotropic_curve_simulation.csv")}
    assert seeds == {"3", "1003", "2003"}


def test_cli_predict_and_simulate_only(tmp_path):
    path = _write_cfg(tmp_path, _iso(tmp_path))
    assert cli.main(["predict", "--config", str(path), "--out", str(tmp_path / "p")]) == 0
    assert os.listdir(tmp_path / "p") == ["isotropic_curve_asymptotic.csv"]
    assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "s")]) == 0
    assert os.listdir(tmp_path / "s") == ["isotropic_curve_simulation.csv"]


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "nope"\n')
    assert cli.main(["predict", "--config", str(bad)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config"
    assert cli.main(["predict", "--config", str(tmp_path / "missing.toml")]) == 2
    good = _write_cfg(tmp_path, _iso(tmp_path))
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["predict", "--config", str(good), "--out", str(blocker / "sub")]) == 2
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])


def test_selftest_passes():
    lines = []
    assert run_selftest(lines.append)
    assert len(lines) == 9 and all(ln.startswith("[PASS]") for ln in lines)
