"""Experiment orchestration: prediction and simulation legs written to CSV.

Every leg is a list of independent tasks. Tasks are plain functions of their
arguments (each simulation task carries its own seed), so results do not
depend on the number of workers; they are gathered in grid order.
"""
from __future__ import annotations

import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import __version__
from ..asymptotics import (kappa_star, limit_coordinate_law, margin_bound,
                           misspecified_prediction)
from ..errors import BelowThresholdError, MaxMarginError, NonSeparableError
from ..labels import LabelModel
from ..measures import ActivationCoeffs, SpectralMeasure, activation_coeffs, rf_model
from ..simulation.datasets import resolve_activation, sample_isotropic, sample_misspecified, sample_rf
from ..simulation.maxmargin import max_margin
from ..simulation.metrics import (empirical_coordinate_law, exact_test_error, mc_test_error,
                                  sliced_ks)
from ..simulation.softmargin import soft_margin
from ..wide import wide_limit
from .config import ExperimentConfig
from .report import compare_report, write_summary

KEY_COLUMNS = ["model", "beta", "psi", "psi1", "psi2"]
PREDICTION_COLUMNS = KEY_COLUMNS + [
    "psi0", "psi_star0", "psi_down_at_kstar", "kappa_star", "nu_star", "err_star",
    "c1", "c2", "s", "margin_bound", "bound_vacuous", "kappa_bar_wide", "err_wide", "status"]
REPLICATE_COLUMNS = KEY_COLUMNS + [
    "n", "p", "d", "seed", "kappa_n", "err_n", "err_n_se", "ks", "separable", "iterations", "status"]
NAN = float("nan")
COORD_LAW_SAMPLES = 20_000


@dataclass
class RunResult:
    status: int
    files: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


# ---------------------------------------------------------------- helpers

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _coeffs(cfg: ExperimentConfig) -> ActivationCoeffs:
    if cfg.gamma1 is not None or cfg.gamma_star is not None:
        base = activation_coeffs(resolve_activation(cfg.activation))
        return ActivationCoeffs(0.0, cfg.gamma1 if cfg.gamma1 is not None else base.gamma1,
                                cfg.gamma_star if cfg.gamma_star is not None else base.gamma_star)
    return activation_coeffs(resolve_activation(cfg.activation)).centered()


def _key(model, beta, psi=None, psi1=None, psi2=None):
    return {"model": model, "beta": beta, "psi": psi, "psi1": psi1, "psi2": psi2}


def _prediction_fields(pred, measure):
    row = pred.row(measure)
    row["bound_vacuous"] = row["margin_bound"] / 4.0 >= 1.0
    return row


def _failure(exc):
    if isinstance(exc, BelowThresholdError):
        return "below_threshold"
    if isinstance(exc, NonSeparableError):
        return "non_separable"
    return f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")


# ---------------------------------------------------------------- prediction tasks

def _predict_task(args):
    exp, beta, point, cfg_bits = args
    numerics = cfg_bits["numerics"]
    base = LabelModel.logistic(beta)
    rows = []
    try:
        if exp in ("isotropic_curve", "coordinate_law_check", "margin_bound_compare"):
            row = _key("isotropic", beta, point)
            mu = SpectralMeasure.isotropic()
            row.update(_prediction_fields(kappa_star(base, mu, point, numerics), mu))
            rows.append(row)
        elif exp == "misspecified_curve":
            row = _key("misspecified", beta, point)
            row["psi0"] = cfg_bits["psi0"]
            pred = misspecified_prediction(base, cfg_bits["psi0"], point, numerics)
            row.update(_prediction_fields(pred, SpectralMeasure.isotropic()))
            rows.append(row)
        elif exp == "rf_surface":
            psi1, psi2 = point
            row = _key("rf", beta, psi1 / psi2, psi1, psi2)
            mu, model = rf_model(psi1, cfg_bits["coeffs"], base, numerics)
            row.update(_prediction_fields(kappa_star(model, mu, psi1 / psi2, numerics), mu))
            rows.append(row)
        elif exp in ("wide_limit_check", "soft_margin_check"):
            psi2 = point
            wl = wide_limit(psi2, cfg_bits["coeffs"], base, numerics)
            if exp == "soft_margin_check":
                row = _key("soft_margin", beta, None, None, psi2)
                # the soft margin in input space converges to kappa_bar / sqrt(psi2)
                row.update(kappa_star=wl.kappa_bar_wide / math.sqrt(psi2), err_star=wl.err_wide,
                           nu_star=wl.nu_wide, kappa_bar_wide=wl.kappa_bar_wide,
                           err_wide=wl.err_wide)
                rows.append(row)
            else:
                for psi1 in cfg_bits["psi1_wide"]:
                    row = _key("rf", beta, psi1 / psi2, psi1, psi2)
                    row.update(kappa_bar_wide=wl.kappa_bar_wide, err_wide=wl.err_wide)
                    try:
                        mu, model = rf_model(psi1, cfg_bits["coeffs"], base, numerics)
                        row.update(_prediction_fields(
                            kappa_star(model, mu, psi1 / psi2, numerics), mu))
                        row["status"] = "ok"
                    except MaxMarginError as exc:
                        row["status"] = _failure(exc)
                    rows.append(row)
                return rows
        for r in rows:
            r.setdefault("status", "ok")
    except MaxMarginError as exc:
        if not rows:
            rows.append(_fallback_key(exp, beta, point, cfg_bits))
        rows[-1]["status"] = _failure(exc)
    return rows


def _fallback_key(exp, beta, point, cfg_bits):
    if exp == "rf_surface":
        return _key("rf", beta, point[0] / point[1], point[0], point[1])
    if exp == "soft_margin_check":
        return _key("soft_margin", beta, None, None, point)
    if exp == "wide_limit_check":
        return _key("rf", beta, None, None, point)
    row = _key("misspecified" if exp == "misspecified_curve" else "isotropic", beta, point)
    if exp == "misspecified_curve":
        row["psi0"] = cfg_bits["psi0"]
    return row


# ---------------------------------------------------------------- simulation tasks

def _simulate_task(args):
    exp, beta, point, seed, cfg_bits = args
    sim = cfg_bits["sim"]
    row = {"seed": seed, "separable": True, "status": "ok"}
    try:
        if exp in ("isotropic_curve", "coordinate_law_check"):
            n = max(int(round(sim["p"] / point)), 2)
            row.update(_key("isotropic", beta, point), n=n, p=sim["p"])
            ds = sample_isotropic(n, sim["p"], beta, seed)
            sol = max_margin(ds, seed)
            row.update(kappa_n=sol.margin, err_n=exact_test_error(ds, sol.direction),
                       iterations=sol.iterations)
            if exp == "coordinate_law_check":
                mu = SpectralMeasure.isotropic()
                x, w, h = limit_coordinate_law(LabelModel.logistic(beta), mu, point,
                                               COORD_LAW_SAMPLES, seed, cfg_bits["numerics"])
                _, wb, co = empirical_coordinate_law(ds, sol)
                row["ks"] = sliced_ks(np.c_[wb, co], np.c_[w, h], seed=seed)
        elif exp == "misspecified_curve":
            p0 = sim["p0"] if sim["p0"] is not None else sim["p"]
            n = max(int(round(p0 / cfg_bits["psi0"])), 2)
            p = max(int(round(point * n)), 1)
            row.update(_key("misspecified", beta, point), n=n, p=p)
            ds = sample_misspecified(n, p, p0, beta, seed)
            sol = max_margin(ds, seed)
            row.update(kappa_n=sol.margin, err_n=exact_test_error(ds, sol.direction),
                       iterations=sol.iterations)
        elif exp == "rf_surface":
            psi1, psi2 = point
            d = sim["d"]
            n, p = int(round(psi2 * d)), int(round(psi1 * d))
            row.update(_key("rf", beta, psi1 / psi2, psi1, psi2), n=n, p=p, d=d)
            nonlinear = sim["generator"] == "rf_nonlinear"
            ds = sample_rf(n, p, d, beta, seed, nonlinear, cfg_bits["activation"])
            sol = max_margin(ds, seed)
            row.update(kappa_n=sol.margin, iterations=sol.iterations)
            if nonlinear:
                err, se = mc_test_error(ds, sol.direction, sim["n_test"], seed)
                row.update(err_n=err, err_n_se=se)
            else:
                row["err_n"] = exact_test_error(ds, sol.direction)
        elif exp == "soft_margin_check":
            psi2, d = point, sim["d"]
            n = int(round(psi2 * d))
            row.update(_key("soft_margin", beta, None, None, psi2), n=n, d=d)
            # the base data (z, y) of a random-features model are isotropic in d dimensions
            ds = sample_isotropic(n, d, beta, seed)
            c = cfg_bits["coeffs"]
            k_sm, direction = soft_margin(ds.features, ds.labels, c.gamma1, c.gamma_star)
            row.update(kappa_n=k_sm, err_n=exact_test_error(ds, direction))
        else:
            raise ValueError(f"experiment {exp!r} has no simulation leg")
    except NonSeparableError:
        row.update(separable=False, status="non_separable")
    except MaxMarginError as exc:
        row["status"] = _failure(exc)
    return row


# ---------------------------------------------------------------- orchestration

def _map(func, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order, independent of completion order
        return list(pool.map(func, tasks, chunksize=1))


def _cfg_bits(cfg: ExperimentConfig):
    needs_coeffs = cfg.experiment in ("rf_surface", "wide_limit_check", "soft_margin_check")
    return {
        "numerics": cfg.numerics, "psi0": cfg.psi0, "psi1_wide": cfg.psi1_wide,
        "coeffs": _coeffs(cfg) if needs_coeffs else None, "activation": cfg.activation,
        "sim": asdict(cfg.sim),
    }


def header_lines(cfg: ExperimentConfig, leg: str) -> list[str]:
    """Metadata block. Only the last line (timestamp) varies between identical runs."""
    echo = {k: v for k, v in cfg.raw.items() if k not in ("output", "workers")}
    effective = {"sim": asdict(cfg.sim), "numerics": asdict(cfg.numerics),
                 "tolerances": asdict(cfg.tolerances)}
    return [
        f"maxmargin {__version__}",
        f"experiment: {cfg.experiment}",
        f"leg: {leg}",
        "config: " + json.dumps(echo, sort_keys=True),
        "effective: " + json.dumps(effective, sort_keys=True, default=list),
        f"quadrature: gaussian={cfg.numerics.g_rule} panels={cfg.numerics.g_panels} "
        f"gh_order={cfg.numerics.gh_order} mp_order={cfg.numerics.mp_order}",
        "created: " + time.strftime("%Y-%m-%dT%H:%M:%S"),
    ]


def write_csv(path, columns, rows, header=()):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(r.get(c)) for c in columns])


def prediction_rows(cfg: ExperimentConfig):
    bits = _cfg_bits(cfg)
    tasks = [(cfg.experiment, b, pt, bits) for b, pt in cfg.points()]
    return [r for rows in _map(_predict_task, tasks, cfg.workers) for r in rows]


def simulation_rows(cfg: ExperimentConfig):
    bits = _cfg_bits(cfg)
    tasks = [(cfg.experiment, b, pt, s, bits)
             for b, pt in cfg.points() for s in cfg.sim.seed_list()]
    return _map(_simulate_task, tasks, cfg.workers)


HAS_SIM_LEG = ("isotropic_curve", "misspecified_curve", "rf_surface", "soft_margin_check",
               "coordinate_law_check")


def run(cfg: ExperimentConfig, legs=("predict", "simulate"), log=sys.stderr) -> RunResult:
    """Run the requested legs and write one CSV per leg into ``cfg.output_path``.

    Returns a :class:`RunResult` whose status is 0 on success and 1 if any
    grid point or replicate failed for a reason other than being below the
    interpolation threshold.
    """
    out = cfg.output_path
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise OSError(f"output path {out!r} is not writable")
    result = RunResult(0)
    stem = cfg.experiment
    if "predict" in legs:
        rows = prediction_rows(cfg)
        path = os.path.join(out, f"{stem}_asymptotic.csv")
        write_csv(path, PREDICTION_COLUMNS, rows, header_lines(cfg, "asymptotic"))
        result.files["asymptotic"] = path
        result.failures += [r for r in rows if r["status"].startswith("failed")]
        print(f"wrote {path} ({len(rows)} rows)", file=log)
    if "simulate" in legs and cfg.sim.enabled and cfg.experiment in HAS_SIM_LEG:
        rows = simulation_rows(cfg)
        path = os.path.join(out, f"{stem}_simulation.csv")
        write_csv(path, REPLICATE_COLUMNS, rows, header_lines(cfg, "simulation"))
        result.files["simulation"] = path
        result.failures += [r for r in rows if r["status"].startswith("failed")]
        print(f"wrote {path} ({len(rows)} rows)", file=log)
    if "asymptotic" in result.files and "simulation" in result.files:
        summary = compare_report(result.files["asymptotic"], result.files["simulation"],
                                 cfg.tolerances)
        path = os.path.join(out, f"{stem}_compare.csv")
        write_summary(path, summary, header_lines(cfg, "compare"))
        result.files["compare"] = path
        print(f"wrote {path} ({len(summary)} rows)", file=log)
    if result.failures:
        result.status = 1
        report = os.path.join(out, f"{stem}_errors.json")
        with open(report, "w", encoding="utf-8") as fh:
            json.dump([{k: _fmt(v) for k, v in r.items()} for r in result.failures], fh, indent=1)
        result.files["errors"] = report
        print(f"{len(result.failures)} failures, see {report}", file=log)
    return result
