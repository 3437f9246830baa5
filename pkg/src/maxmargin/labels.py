"""Conditional label laws P(Y = +1 | G = g) and the error function Q.

A :class:`LabelModel` is one of

* ``logistic``: ``flip(g) = 1 / (1 + exp(-beta * rho * g))``
* ``pure_noise``: ``flip(g) = 1/2``
* ``misspecified``: ``flip(g) = E base.flip(sqrt(gamma) g + sqrt(1 - gamma) G')``
* ``rf_effective``: ``flip(g) = E base.flip(sqrt(1 - tau^2) g + tau G')``

Nested mixtures are collapsed into a single Gaussian smoothing of the root
link, so evaluation cost does not grow with nesting depth.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import expit, ndtr

from .quadrature import DEFAULT_NUMERICS, Numerics, QuadratureRule

KINDS = ("logistic", "pure_noise", "misspecified", "rf_effective")

# below this, 1 - nu^2 is treated as zero and Q uses its limit form
NU_EDGE = 1e-12


@dataclass(frozen=True)
class LabelModel:
    kind: str
    beta: float = 1.0
    rho: float = 1.0
    base: Optional["LabelModel"] = None
    gamma: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown label model kind {self.kind!r}")
        if not np.isfinite(self.rho) or self.rho < 0:
            raise ValueError("rho must be a finite non-negative number")
        if self.kind == "logistic" and not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError("logistic beta must be positive and finite")
        if self.kind in ("misspecified", "rf_effective"):
            if self.base is None:
                raise ValueError(f"{self.kind} model needs a base model")
            if self.kind == "misspecified" and not (0.0 <= self.gamma <= 1.0):
                raise ValueError("gamma must lie in [0, 1]")
            if self.kind == "rf_effective" and not (0.0 <= self.tau <= 1.0):
                raise ValueError("tau must lie in [0, 1]")

    # constructors ---------------------------------------------------------
    @classmethod
    def logistic(cls, beta: float, rho: float = 1.0) -> "LabelModel":
        return cls("logistic", beta=float(beta), rho=float(rho))

    @classmethod
    def pure_noise(cls) -> "LabelModel":
        return cls("pure_noise")

    @classmethod
    def misspecified(cls, base: "LabelModel", gamma: float) -> "LabelModel":
        return cls("misspecified", base=base, gamma=float(gamma), rho=base.rho)

    @classmethod
    def rf_effective(cls, base: "LabelModel", tau: float, rho: float = 1.0) -> "LabelModel":
        return cls("rf_effective", base=base, tau=float(tau), rho=float(rho))

    def with_rho(self, rho: float) -> "LabelModel":
        """Same link with a different signal strength (only logistic links use it)."""
        if self.kind in ("misspecified", "rf_effective"):
            return replace(self, base=self.base.with_rho(rho), rho=float(rho))
        return replace(self, rho=float(rho))

    # evaluation ------------------------------------------------------------
    def canonical(self):
        """Return ``(root, a, b)`` with ``flip(g) = E root.flip(a g + b G')``."""
        if self.kind in ("logistic", "pure_noise"):
            return self, 1.0, 0.0
        if self.kind == "misspecified":
            a, b = np.sqrt(self.gamma), np.sqrt(1.0 - self.gamma)
        else:
            a, b = np.sqrt(1.0 - self.tau**2), self.tau
        root, a0, b0 = self.base.canonical()
        return root, a0 * a, np.sqrt(b0**2 + (a0 * b) ** 2)

    def is_sign_symmetric(self) -> bool:
        return True  # every supported link satisfies flip(-g) = 1 - flip(g)

    def flip(self, g, numerics: Numerics = DEFAULT_NUMERICS):
        root, a, b = self.canonical()
        g = np.asarray(g, dtype=float)
        if root.kind == "pure_noise":
            return np.full_like(g, 0.5)
        slope = root.beta * root.rho
        if b == 0.0:
            return expit(slope * a * g)
        rule = numerics.gaussian()
        flat = g.ravel()
        out = np.empty_like(flat)
        chunk = max(1, 2_000_000 // len(rule))
        for start in range(0, flat.size, chunk):
            arg = a * flat[start:start + chunk, None] + b * rule.nodes[None, :]
            out[start:start + chunk] = expit(slope * arg) @ rule.weights
        return out.reshape(g.shape)

    def flip_at_nodes(self, rule: QuadratureRule, numerics: Numerics = DEFAULT_NUMERICS) -> np.ndarray:
        """``flip`` evaluated at the nodes of ``rule`` (cached)."""
        return _flip_nodes(self, rule, numerics)

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "logistic":
            return {"kind": "logistic", "beta": self.beta, "rho": self.rho}
        if self.kind == "pure_noise":
            return {"kind": "pure_noise"}
        out = {"kind": self.kind, "base": self.base.to_dict(), "rho": self.rho}
        out["gamma" if self.kind == "misspecified" else "tau"] = (
            self.gamma if self.kind == "misspecified" else self.tau
        )
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LabelModel":
        kind = data.get("kind")
        if kind == "logistic":
            return cls.logistic(data["beta"], data.get("rho", 1.0))
        if kind == "pure_noise":
            return cls.pure_noise()
        if kind == "misspecified":
            return cls.misspecified(cls.from_dict(data["base"]), data["gamma"])
        if kind == "rf_effective":
            return cls.rf_effective(cls.from_dict(data["base"]), data["tau"], data.get("rho", 1.0))
        raise ValueError(f"unknown label model kind {kind!r}")


@lru_cache(maxsize=256)
def _flip_nodes(model: LabelModel, rule: QuadratureRule, numerics: Numerics) -> np.ndarray:
    out = model.flip(rule.nodes, numerics)
    out.flags.writeable = False
    return out


def flip_probability(model: LabelModel, g, numerics: Numerics = DEFAULT_NUMERICS):
    """P(Y = +1 | G = g)."""
    out = model.flip(g, numerics)
    return float(out) if np.ndim(out) == 0 else out


def q_error(model: LabelModel, nu: float, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Classification error ``P(nu Y G + sqrt(1 - nu^2) Z <= 0)``.

    The signal strength ``r`` of the error function is the model's ``rho``;
    use ``model.with_rho(r)`` to evaluate at another value.
    """
    nu = float(nu)
    if not np.isfinite(nu) or abs(nu) > 1.0:
        raise ValueError(f"nu must lie in [-1, 1], got {nu!r}")
    rule = numerics.gaussian()
    g = rule.nodes
    f = model.flip_at_nodes(rule, numerics)
    rest = 1.0 - nu * nu
    if rest < NU_EDGE:
        # sign of nu*Y*G decides; G = 0 has no mass
        s = np.sign(nu)
        wrong = np.where(s * g > 0, 1.0 - f, f)
        return float(rule.weights @ wrong)
    t = nu * g / np.sqrt(rest)
    return float(rule.weights @ (f * ndtr(-t) + (1.0 - f) * ndtr(t)))
