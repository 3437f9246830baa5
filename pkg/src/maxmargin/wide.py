"""Wide random-features limit (number of features per dimension -> infinity).

For fixed samples-per-dimension ``psi2`` the normalized margin converges to
the zero of

    T_inf(k) = min_{d1^2 + d2^2 <= 1, d2 >= 0}
               F_k(sqrt(psi2) g1 d1, sqrt(psi2) g1 d2) - g1 d2 - g* sqrt(1 - d1^2 - d2^2)

where F uses the noiseless-features label law (no extra smoothing).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import BoundaryDegeneracyError, SolverFailure
from .fkappa import FkappaKernel
from .labels import LabelModel, q_error
from .measures import ActivationCoeffs
from .quadrature import DEFAULT_NUMERICS, Numerics

STATIONARITY_TOL = 1e-7


@dataclass(frozen=True)
class WideLimit:
    kappa_bar_wide: float
    d1: float
    d2: float
    nu_wide: float
    err_wide: float
    psi2: float
    gamma1: float
    gamma_star: float
    grad_norm: float = 0.0


class WideObjective:
    """R(kappa_bar, d1, d2) with analytic gradient."""

    def __init__(self, model: LabelModel, psi2: float, gamma1: float, gamma_star: float,
                 numerics: Numerics = DEFAULT_NUMERICS):
        self.kern = FkappaKernel(model, numerics)
        self.scale = np.sqrt(psi2) * gamma1
        self.g1, self.gs = gamma1, gamma_star

    def __call__(self, kappa, d):
        d1, d2 = d
        rest = 1.0 - d1 * d1 - d2 * d2
        if rest <= 0 or d2 < 0:
            return np.inf, None
        e = self.kern(kappa, self.scale * d1, self.scale * d2)
        root = np.sqrt(rest)
        val = e.value - self.g1 * d2 - self.gs * root
        grad = np.array([self.scale * e.d_c1 + self.gs * d1 / root,
                         self.scale * e.d_c2 - self.g1 + self.gs * d2 / root])
        return val, grad

    def minimize(self, kappa, start=(0.0, 0.5), max_iter=200):
        """Damped Newton on the strictly convex objective, kept inside the half-disk."""
        d = np.array(start, dtype=float)
        val, grad = self(kappa, d)
        h = 1e-6
        for _ in range(max_iter):
            if np.linalg.norm(grad) <= 1e-11:
                break
            hess = np.empty((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                gp = self(kappa, d + e)[1]
                gm = self(kappa, d - e)[1]
                if gp is None or gm is None:
                    hess = np.eye(2) * max(1.0, np.linalg.norm(grad))
                    break
                hess[:, j] = (gp - gm) / (2 * h)
            hess = 0.5 * (hess + hess.T)
            try:
                step = -np.linalg.solve(hess, grad)
                if step @ grad >= 0:
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                step = -grad
            t = 1.0
            for _ in range(60):
                cand = d + t * step
                cval, cgrad = self(kappa, cand)
                if cval <= val + 1e-4 * t * (step @ grad) or (
                        cgrad is not None and abs(cval - val) < 1e-15 and
                        np.linalg.norm(cgrad) < np.linalg.norm(grad)):
                    break
                t *= 0.5
            else:
                break
            d, val, grad = cand, cval, cgrad
        if 1.0 - d @ d < 1e-9:
            raise BoundaryDegeneracyError(
                "wide-limit minimizer reached the unit circle", {"kappa": kappa, "d": d.tolist()})
        return d, val, grad


def wide_limit(psi2: float, coeffs: ActivationCoeffs, base_model: LabelModel,
               numerics: Numerics = DEFAULT_NUMERICS) -> WideLimit:
    """Normalized margin and test error in the wide random-features limit."""
    if psi2 <= 0:
        raise ValueError("psi2 must be positive")
    obj = WideObjective(base_model, psi2, coeffs.gamma1, coeffs.gamma_star, numerics)
    cache = {}

    def t_inf(k):
        start = cache[min(cache, key=lambda q: abs(q - k))][0] if cache else (0.0, 0.5)
        d, val, grad = obj.minimize(k, start)
        cache[k] = (d, val, grad)
        return val

    lo, hi = 1e-6, 1.0
    if t_inf(lo) >= 0:
        raise SolverFailure("T_inf is non-negative at the lower bracket", {"kappa": lo})
    while t_inf(hi) <= 0:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise SolverFailure("could not bracket the zero of T_inf")
    k = brentq(t_inf, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    d, val, grad = obj.minimize(k, cache[min(cache, key=lambda q: abs(q - k))][0])
    gnorm = float(np.linalg.norm(grad))
    if gnorm > STATIONARITY_TOL:
        raise SolverFailure("wide-limit minimizer is not stationary", {"grad_norm": gnorm})
    nu = d[0] / np.hypot(d[0], d[1])
    return WideLimit(float(k), float(d[0]), float(d[1]), float(nu),
                     q_error(base_model, nu, numerics), float(psi2),
                     coeffs.gamma1, coeffs.gamma_star, gnorm)
