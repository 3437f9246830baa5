"""Side-by-side comparison of asymptotic predictions and simulation replicates."""
from __future__ import annotations

import csv
import io
import math
from collections import OrderedDict

import numpy as np

from .config import Tolerances

KEY = ("model", "beta", "psi", "psi1", "psi2")
SUMMARY_COLUMNS = list(KEY) + [
    "kappa_star", "kappa_n_mean", "kappa_n_sem", "err_star", "err_n_mean", "err_n_sem",
    "ks_mean", "replicates", "separable", "dev_kappa", "dev_err", "within_tol", "marker"]


class ReportKeyError(ValueError):
    """Grid keys of the two tables do not match."""


def read_csv(path_or_text) -> list[dict]:
    """Read a CSV written by the runner, skipping ``#`` header lines."""
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def _num(v):
    if v is None or v == "":
        return math.nan
    return float(v)


def _key(row):
    return tuple(row.get(k, "") for k in KEY)


def _mean_sem(vals):
    v = np.asarray([x for x in vals if not math.isnan(x)])
    if v.size == 0:
        return math.nan, math.nan
    sem = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), sem


def compare_report(asymptotic_csv, simulation_csv, tolerances: Tolerances | None = None):
    """Per-grid-point deviations ``|kappa_n - kappa*|`` and ``|Err_n - Err*|``.

    The simulation table may also be an asymptotic table, in which case its
    ``kappa_star`` and ``err_star`` columns play the role of the empirical
    values (self-comparison gives zero deviations).

    Points below the interpolation threshold, or whose replicates were all
    non-separable, get the marker ``non-separable`` and no deviation.

    Raises
    ------
    ReportKeyError
        If the two tables do not cover the same grid keys.
    """
    tol = tolerances or Tolerances()
    asym = read_csv(asymptotic_csv)
    sim = read_csv(simulation_csv)
    groups: "OrderedDict[tuple, list]" = OrderedDict()
    for r in sim:
        groups.setdefault(_key(r), []).append(r)
    a_keys = [_key(r) for r in asym]
    if set(a_keys) != set(groups):
        missing = sorted(set(a_keys) ^ set(groups))
        raise ReportKeyError(f"grid keys differ between tables: {missing[:5]}")
    out = []
    for r in asym:
        reps = groups[_key(r)]
        emp_k = "kappa_n" if "kappa_n" in reps[0] else "kappa_star"
        emp_e = "err_n" if "err_n" in reps[0] else "err_star"
        sep = [x for x in reps if x.get("separable", "true") == "true"
               and x.get("status", "ok") == "ok"]
        km, ks = _mean_sem([_num(x[emp_k]) for x in sep])
        em, es = _mean_sem([_num(x[emp_e]) for x in sep])
        ksm, _ = _mean_sem([_num(x.get("ks")) for x in sep])
        row = {k: r.get(k, "") for k in KEY}
        row.update(kappa_star=_num(r["kappa_star"]), err_star=_num(r["err_star"]),
                   kappa_n_mean=km, kappa_n_sem=ks, err_n_mean=em, err_n_sem=es, ks_mean=ksm,
                   replicates=len(reps), separable=len(sep))
        if r.get("status", "ok") == "below_threshold" or not sep:
            row.update(dev_kappa=math.nan, dev_err=math.nan, within_tol="", marker="non-separable")
        elif r.get("status", "ok") != "ok":
            row.update(dev_kappa=math.nan, dev_err=math.nan, within_tol="", marker="failed")
        else:
            dk = abs(km - row["kappa_star"])
            de = abs(em - row["err_star"])
            ok = dk <= tol.kappa and de <= tol.err and not (ksm > tol.ks)
            row.update(dev_kappa=dk, dev_err=de, within_tol="true" if ok else "false", marker="")
        out.append(row)
    return out


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_summary(path, rows, header=()):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in SUMMARY_COLUMNS])


def format_table(rows) -> str:
    """Plain-text table for the terminal."""
    cols = ["model", "beta", "psi", "psi1", "psi2", "kappa_star", "kappa_n_mean", "err_star",
            "err_n_mean", "dev_kappa", "dev_err", "marker"]
    cells = [[c for c in cols]]
    for r in rows:
        cells.append([f"{r[c]:.4f}" if isinstance(r.get(c), float) else str(r.get(c, ""))
                      for c in cols])
    widths = [max(len(row[j]) for row in cells) for j in range(len(cols))]
    return "\n".join("  ".join(s.rjust(w) for s, w in zip(row, widths)) for row in cells)
