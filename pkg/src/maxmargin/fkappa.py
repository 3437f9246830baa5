"""The functional F_kappa(c1, c2) = sqrt(E[(kappa - c1 Y G - c2 Z)_+^2]).

The expectation over Z is done in closed form, leaving a smooth
one-dimensional integral over G that is handled by quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateModelError
from .labels import LabelModel
from .quadrature import DEFAULT_NUMERICS, Numerics

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
DEGENERATE_F = 1e-14


def _cdf_pdf(a, c):
    """Phi(a/c) and c * phi(a/c), with the c = 0 limits."""
    a = np.asarray(a, dtype=float)
    if c > 0:
        with np.errstate(over="ignore"):  # a / c -> +-inf gives the right limits
            t = a / c
            return ndtr(t), c * _INV_SQRT_2PI * np.exp(-0.5 * t * t)
    return (a > 0).astype(float), np.zeros_like(a)


def inner_positive_part_sq(a, c: float):
    """E_Z[(a - c Z)_+^2] for Z ~ N(0, 1), c >= 0."""
    if c < 0:
        raise ValueError("c must be non-negative")
    cdf, cpdf = _cdf_pdf(a, c)
    a = np.asarray(a, dtype=float)
    out = (a * a + c * c) * cdf + a * cpdf
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FkEvaluation:
    """Value and first partials of F_kappa at (c1, c2).

    ``pos_prob`` is P(kappa - c1 Y G - c2 Z > 0); it equals
    ``d_c2 * value / c2`` and stays well defined at c2 = 0.
    """

    value: float
    d_c1: float
    d_c2: float
    d_kappa: float
    pos_prob: float
    kappa: float
    c1: float
    c2: float


def f_kappa(model: LabelModel, kappa: float, c1: float, c2: float,
            numerics: Numerics = DEFAULT_NUMERICS) -> FkEvaluation:
    """Evaluate F_kappa(c1, c2) and its partial derivatives.

    Parameters
    ----------
    model : LabelModel
        Law of Y given G.
    kappa, c1, c2 : float
        Evaluation point, ``c2 >= 0``.

    Raises
    ------
    ValueError
        If ``c2 < 0``.
    DegenerateModelError
        If F is numerically zero.
    """
    if c2 < 0:
        raise ValueError(f"c2 must be non-negative, got {c2!r}")
    rule = numerics.gaussian()
    f = model.flip_at_nodes(rule, numerics)
    return _evaluate(f, rule.nodes, rule.weights, float(kappa), float(c1), float(c2))


def _evaluate(f, g, w, kappa, c1, c2) -> FkEvaluation:
    u = kappa - c1 * g   # Y = +1
    v = kappa + c1 * g   # Y = -1
    cu, pu = _cdf_pdf(u, c2)
    cv, pv = _cdf_pdf(v, c2)
    iu = (u * u + c2 * c2) * cu + u * pu
    iv = (v * v + c2 * c2) * cv + v * pv
    # d/da of the inner expectation, halved
    hu = u * cu + pu
    hv = v * cv + pv
    fm = 1.0 - f
    f2 = float(w @ (f * iu + fm * iv))
    if not f2 > DEGENERATE_F**2:
        raise DegenerateModelError(
            f"F_kappa vanishes at kappa={kappa}, c1={c1}, c2={c2}; the label model is degenerate")
    val = float(np.sqrt(f2))
    pos = float(w @ (f * cu + fm * cv))
    d1 = float(w @ (g * (fm * hv - f * hu))) / val
    dk = float(w @ (f * hu + fm * hv)) / val
    return FkEvaluation(val, d1, c2 * pos / val, dk, pos, kappa, c1, c2)


def f_value(model: LabelModel, kappa: float, c1: float, c2: float,
            numerics: Numerics = DEFAULT_NUMERICS) -> float:
    return f_kappa(model, kappa, c1, c2, numerics).value


class FkappaKernel:
    """Repeated evaluations of F for a fixed model and rule.

    Holds the flip values at the quadrature nodes so that inner solver loops
    do not pay the cache lookup.
    """

    def __init__(self, model: LabelModel, numerics: Numerics = DEFAULT_NUMERICS):
        self.model = model
        self.numerics = numerics
        rule = numerics.gaussian()
        self._g = rule.nodes
        self._w = rule.weights
        self._f = model.flip_at_nodes(rule, numerics)

    def __call__(self, kappa: float, c1: float, c2: float) -> FkEvaluation:
        if c2 < 0:
            raise ValueError(f"c2 must be non-negative, got {c2!r}")
        return _evaluate(self._f, self._g, self._w, float(kappa), float(c1), float(c2))

    def second_partials(self, kappa: float, c1: float, c2: float, step: float = 1e-5):
        """Central differences of the analytic first partials.

        Returns ``(d11, d22)``. At ``c2 = 0`` the c2-difference is one-sided
        using evenness of F in c2.
        """
        p = self(kappa, c1 + step, c2)
        m = self(kappa, c1 - step, c2)
        d11 = (p.d_c1 - m.d_c1) / (2 * step)
        if c2 >= step:
            d22 = (self(kappa, c1, c2 + step).d_c2 - self(kappa, c1, c2 - step).d_c2) / (2 * step)
        else:
            d22 = (self(kappa, c1, c2 + step).d_c2 + self(kappa, c1, abs(c2 - step)).d_c2) / (2 * step)
        return d11, d22
