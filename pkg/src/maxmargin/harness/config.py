"""Experiment configuration: a single TOML file with nested sections.

Example::

    experiment = "isotropic_curve"

    [model]
    beta = [1.0, 2.0, 8.0]

    [grid]
    psi = [1.5, 2.0, 3.0, 4.0, 6.0]

    [sim]
    p = 800
    replicates = 20
    seed = 0

    [numerics]
    mp_order = 200

    [output]
    path = "out/isotropic"

See the README for every field.
"""
from __future__ import annotations

import copy
import itertools
import os
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..quadrature import Numerics

EXPERIMENTS = (
    "isotropic_curve", "misspecified_curve", "rf_surface", "wide_limit_check",
    "soft_margin_check", "coordinate_law_check", "margin_bound_compare",
)
# experiments whose grid is over (psi1, psi2) pairs or psi2 alone
_RF_GRID = ("rf_surface",)
_PSI2_GRID = ("wide_limit_check", "soft_margin_check")
GENERATORS = ("rf_nonlinear", "rf_noisy_linear")
OUTPUT_ENV = "MAXMARGIN_OUT"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class SimSettings:
    enabled: bool = True
    p: int = 800                    # isotropic and misspecified feature count
    p0: Optional[int] = None        # misspecified: full signal dimension
    d: int = 200                    # random-features input dimension
    replicates: int = 20
    seed: int = 0
    seeds: Optional[tuple] = None
    generator: str = "rf_nonlinear"
    n_test: int = 20_000            # Monte Carlo test points for nonlinear features

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return [self.seed + 1000 * r for r in range(self.replicates)]


@dataclass(frozen=True)
class Tolerances:
    kappa: float = 0.05
    err: float = 0.02
    ks: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    betas: tuple
    grid: tuple                     # psi values, psi2 values or (psi1, psi2) pairs
    sim: SimSettings = field(default_factory=SimSettings)
    numerics: Numerics = field(default_factory=Numerics)
    tolerances: Tolerances = field(default_factory=Tolerances)
    psi0: Optional[float] = None
    activation: str = "relu"
    gamma1: Optional[float] = None
    gamma_star: Optional[float] = None
    psi1_wide: tuple = (50.0,)      # wide_limit_check: finite psi1 values compared to the limit
    output_path: str = "out"
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def points(self):
        """Grid points crossed with the beta values, in deterministic order."""
        return list(itertools.product(self.betas, self.grid))


def _as_tuple(v):
    if v is None:
        return ()
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def _require_keys(section: dict, allowed: set, name: str):
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed configuration mapping."""
    raw = copy.deepcopy(raw)
    _require_keys(raw, {"experiment", "model", "grid", "sim", "numerics", "tolerances",
                        "output", "workers"}, "top level")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}")

    model = raw.get("model", {})
    _require_keys(model, {"beta", "psi0", "activation", "gamma1", "gamma_star"}, "model")
    betas = tuple(float(b) for b in _as_tuple(model.get("beta", 1.0)))
    if not betas or any(b <= 0 for b in betas):
        raise ConfigError("model.beta must be positive")

    grid = raw.get("grid", {})
    _require_keys(grid, {"psi", "psi1", "psi2", "pairs", "psi1_wide"}, "grid")
    if exp in _RF_GRID:
        if "pairs" in grid:
            pts = tuple((float(a), float(b)) for a, b in grid["pairs"])
        else:
            pts = tuple(itertools.product([float(v) for v in _as_tuple(grid.get("psi1"))],
                                          [float(v) for v in _as_tuple(grid.get("psi2"))]))
        bad = [pt for pt in pts if pt[0] <= 0 or pt[1] <= 0]
    elif exp in _PSI2_GRID:
        pts = tuple(float(v) for v in _as_tuple(grid.get("psi2")))
        bad = [v for v in pts if v <= 0]
    else:
        pts = tuple(float(v) for v in _as_tuple(grid.get("psi")))
        bad = [v for v in pts if v <= 0]
    if not pts:
        raise ConfigError("empty grid")
    if bad:
        raise ConfigError(f"grid points must be positive: {bad}")

    s = raw.get("sim", {})
    _require_keys(s, {"enabled", "p", "p0", "d", "replicates", "seed", "seeds", "generator",
                      "n_test"}, "sim")
    sim = SimSettings(
        enabled=bool(s.get("enabled", True)), p=int(s.get("p", 800)),
        p0=None if s.get("p0") is None else int(s["p0"]), d=int(s.get("d", 200)),
        replicates=int(s.get("replicates", 20)), seed=int(s.get("seed", 0)),
        seeds=None if s.get("seeds") is None else tuple(int(v) for v in s["seeds"]),
        generator=s.get("generator", "rf_nonlinear"), n_test=int(s.get("n_test", 20_000)))
    if sim.replicates < 1:
        raise ConfigError("sim.replicates must be at least 1")
    if sim.seeds is not None and len(sim.seeds) != sim.replicates:
        raise ConfigError("sim.seeds must have length sim.replicates")
    if sim.generator not in GENERATORS:
        raise ConfigError(f"sim.generator must be one of {GENERATORS}")
    if sim.p < 1 or sim.d < 1 or sim.n_test < 2:
        raise ConfigError("sim dimensions must be positive")

    psi0 = model.get("psi0")
    if exp == "misspecified_curve":
        if psi0 is None or float(psi0) <= 0:
            raise ConfigError("misspecified_curve needs a positive model.psi0")
        psi0 = float(psi0)

    if sim.enabled:
        _check_sample_sizes(exp, pts, sim, psi0)

    nm = raw.get("numerics", {})
    _require_keys(nm, {"gh_order", "mp_order", "g_panels", "g_rule"}, "numerics")
    try:
        numerics = Numerics(int(nm.get("gh_order", 64)), int(nm.get("mp_order", 200)),
                            int(nm.get("g_panels", 240)), nm.get("g_rule", "composite"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    tl = raw.get("tolerances", {})
    _require_keys(tl, {"kappa", "err", "ks"}, "tolerances")
    tol = Tolerances(float(tl.get("kappa", 0.05)), float(tl.get("err", 0.02)),
                     float(tl.get("ks", 0.05)))

    out = raw.get("output", {})
    _require_keys(out, {"path"}, "output")
    path = os.environ.get(OUTPUT_ENV) or out.get("path", "out")

    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be at least 1")

    act = model.get("activation", "relu")
    if act not in ("relu", "tanh", "abs", "sigma2"):
        raise ConfigError(f"unknown activation {act!r}")

    return ExperimentConfig(
        experiment=exp, betas=betas, grid=pts, sim=sim, numerics=numerics, tolerances=tol,
        psi0=psi0, activation=act,
        gamma1=None if model.get("gamma1") is None else float(model["gamma1"]),
        gamma_star=None if model.get("gamma_star") is None else float(model["gamma_star"]),
        psi1_wide=tuple(float(v) for v in _as_tuple(grid.get("psi1_wide", 50.0))),
        output_path=str(path), workers=workers, raw=raw)


def _check_sample_sizes(exp, pts, sim, psi0):
    if exp in ("isotropic_curve", "coordinate_law_check"):
        ns = [round(sim.p / v) for v in pts]
    elif exp == "misspecified_curve":
        p0 = sim.p0 if sim.p0 is not None else sim.p
        ns = [round(p0 / psi0)]
    elif exp in _RF_GRID:
        ns = [round(pt[1] * sim.d) for pt in pts]
    elif exp in _PSI2_GRID:
        ns = [round(v * sim.d) for v in pts]
    else:
        return
    if min(ns) < 2:
        raise ConfigError("grid implies fewer than 2 samples for the simulation leg")


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    return from_dict(raw)


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Return a copy with CLI overrides applied (seed, workers, quad_order, output_path)."""
    from dataclasses import replace
    out = cfg
    if changes.get("seed") is not None:
        out = replace(out, sim=replace(out.sim, seed=int(changes["seed"]), seeds=None))
    if changes.get("workers") is not None:
        if changes["workers"] < 1:
            raise ConfigError("workers must be at least 1")
        out = replace(out, workers=int(changes["workers"]))
    if changes.get("quad_order") is not None:
        q = int(changes["quad_order"])
        try:
            out = replace(out, numerics=Numerics(q, q, out.numerics.g_panels, out.numerics.g_rule))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if changes.get("output_path") is not None:
        out = replace(out, output_path=str(changes["output_path"]))
    return out
