"""Soft-margin linear classifier in the input space of a random-features model.

The soft margin of ``(Z, y)`` with constants ``(g1, gs)`` is the value of

    max_{theta, u}  min_i [g1 y_i <theta, z_i> + gs u_i]   s.t.  ||theta||^2 + ||u||^2 / d = 1.

After minimizing over ``u`` in closed form, ``kappa_sm >= k / sqrt(psi2)``
holds exactly when

    omega(k) = min_{||theta|| <= 1}  ||(k psi2^{-1/2} - g1 y * Z theta)_+|| / sqrt(d)
                                     - gs sqrt(1 - ||theta||^2)

is non-positive. ``omega`` is convex in theta and increasing in k, so the
soft margin is found by a bracketing root search on k.

The same problem is a hard-margin problem on the augmented features
``(g1 z_i, gs sqrt(d) y_i e_i)``; :func:`soft_margin_augmented` solves it that
way and serves as an independent check.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from ..errors import SolverFailure
from .maxmargin import max_margin_xy

BALL = 1.0 - 1e-12


class OmegaObjective:
    def __init__(self, z, y, gamma1, gamma_star):
        self.b = gamma1 * (np.asarray(y, dtype=float)[:, None] * np.asarray(z, dtype=float))
        self.n, self.d = self.b.shape
        self.psi2 = self.n / self.d
        self.gs = gamma_star
        self.sqd = np.sqrt(self.d)

    def value_grad(self, kappa, theta):
        v = kappa / np.sqrt(self.psi2) - self.b @ theta
        vp = np.maximum(v, 0.0)
        nv = np.linalg.norm(vp)
        rest = max(1.0 - theta @ theta, 0.0)
        root = np.sqrt(rest)
        val = nv / self.sqd - self.gs * root
        grad = self.gs * theta / max(root, 1e-300)
        if nv > 0:
            grad = grad - (self.b.T @ vp) / (self.sqd * nv)
        return val, grad

    def minimize(self, kappa, theta0=None, max_iter=100_000, tol=1e-12):
        """Accelerated projected gradient with backtracking and adaptive restart.

        Returns ``(theta, value)``.
        """
        theta = np.zeros(self.d) if theta0 is None else _project(np.array(theta0, dtype=float))
        val, grad = self.value_grad(kappa, theta)
        lip = 1.0
        yk, t = theta.copy(), 1.0
        best = (val, theta)
        stall = 0
        for it in range(max_iter):
            fy, gy = self.value_grad(kappa, yk)
            while True:
                cand = _project(yk - gy / lip)
                fc, _ = self.value_grad(kappa, cand)
                diff = cand - yk
                if fc <= fy + gy @ diff + 0.5 * lip * (diff @ diff) + 1e-15:
                    break
                lip *= 2.0
                if lip > 1e16:
                    break
            step = np.linalg.norm(cand - theta)
            if fc > val:
                # restart momentum when the objective goes up
                yk, t = theta.copy(), 1.0
                lip *= 2.0
                stall += 1
                if stall > 200:
                    break
                continue
            stall = 0
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            yk = cand + ((t - 1) / t_next) * (cand - theta)
            theta, val, t = cand, fc, t_next
            if val < best[0]:
                best = (val, theta)
            lip *= 0.9
            if step * lip < tol or step < 1e-14:
                return theta, val
        if stall > 200 or it == max_iter - 1:
            gap = _stationarity(self, kappa, best[1])
            if gap > 1e-6:
                raise SolverFailure("soft-margin inner problem did not converge",
                                    {"kappa": kappa, "stationarity": gap})
        return best[1], best[0]


def _project(theta):
    nrm = np.linalg.norm(theta)
    return theta if nrm <= BALL else theta * (BALL / nrm)


def _stationarity(obj, kappa, theta):
    _, g = obj.value_grad(kappa, theta)
    return float(np.linalg.norm(_project(theta - g) - theta))


def soft_margin(z, y, gamma1: float, gamma_star: float, xtol: float = 1e-7):
    """Soft margin ``kappa_sm`` and the unit direction in input space.

    Returns ``(kappa_sm, direction)``.
    """
    obj = OmegaObjective(z, y, gamma1, gamma_star)
    cache = {}

    def omega(k):
        start = cache[min(cache, key=lambda q: abs(q - k))][0] if cache else None
        theta, val = obj.minimize(k, start)
        cache[k] = (theta, val)
        return val

    lo, hi = 0.0, 1.0
    if omega(lo) >= 0:
        raise SolverFailure("omega is non-negative at kappa = 0")
    while omega(hi) <= 0:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise SolverFailure("could not bracket the soft margin")
    k = brentq(omega, lo, hi, xtol=xtol)
    theta, _ = obj.minimize(k, cache[min(cache, key=lambda q: abs(q - k))][0])
    return k / np.sqrt(obj.psi2), theta / np.linalg.norm(theta)


def soft_margin_augmented(z, y, gamma1: float, gamma_star: float):
    """Soft margin through the equivalent hard-margin problem on augmented features.

    Returns ``(kappa_sm, direction, solution)``.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = z.shape
    aug = np.hstack([gamma1 * z, gamma_star * np.sqrt(d) * np.diag(y)])
    sol = max_margin_xy(aug, y)
    theta = sol.direction[:d]
    return sol.margin, theta / np.linalg.norm(theta), sol
