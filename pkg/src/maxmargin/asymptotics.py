"""Asymptotic margin and test error of the max-margin classifier.

The central object is the three-equation fixed-point system in
``(c1, c2, s)``. With

    a = dF/dc1 - c1 * (dF/dc2) / c2,    b = (dF/dc2) / c2,
    D = b sqrt(X) + sqrt(psi) s / sqrt(X),

the residuals are

    R1 = c1 + E[a W^2 sqrt(X) / D]
    R2 = c1^2 + c2^2 - E[(psi X + a^2 W^2 X) / D^2]
    R3 = 1 - E[(psi + a^2 W^2) / D^2]

and ``T(psi, kappa) = (F - c1 dF/dc1 - c2 dF/dc2) / sqrt(psi) - s``. The
asymptotic margin is the smallest zero of ``T(psi, .)``.

``b`` is computed as ``P(kappa - c1 Y G - c2 Z > 0) / F`` which avoids the
division by ``c2``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import ndtr

from .errors import (BelowThresholdError, DegenerateModelError, DomainError, NoInteriorMinimumError,
                     SolverFailure)
from .fkappa import FkappaKernel, FkEvaluation
from .labels import LabelModel, q_error
from .measures import SpectralMeasure
from .quadrature import DEFAULT_NUMERICS, Numerics

RESIDUAL_TOL = 1e-9
KAPPA_XTOL = 1e-10
C2_GUARD = 1e-10
DOMAIN_MARGIN = 1e-6
MAX_NEWTON = 500


@dataclass(frozen=True)
class FixedPoint:
    c1: float
    c2: float
    s: float
    residuals: tuple
    psi: float
    kappa: float
    iterations: int = 0
    fk: Optional[FkEvaluation] = None

    @property
    def nu(self) -> float:
        return self.c1 / np.hypot(self.c1, self.c2)


@dataclass(frozen=True)
class AsymptoticPrediction:
    psi: float
    psi_star0: float
    psi_down: float
    kappa_star: float
    nu_star: float
    err_star: float
    fixed_point: FixedPoint

    def row(self, measure: SpectralMeasure) -> dict:
        fp = self.fixed_point
        return {
            "psi": self.psi, "psi_star0": self.psi_star0, "psi_down_at_kstar": self.psi_down,
            "kappa_star": self.kappa_star, "nu_star": self.nu_star, "err_star": self.err_star,
            "c1": fp.c1, "c2": fp.c2, "s": fp.s, "margin_bound": margin_bound(self, measure),
        }


def _kernel(model: LabelModel, numerics: Numerics) -> FkappaKernel:
    return FkappaKernel(model, numerics)


# thresholds ---------------------------------------------------------------

def psi_star_0(model: LabelModel, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Interpolation threshold ``min_c F_0(c, 1)^2``.

    The minimizer is bracketed by the sign change of dF/dc1 (F_0(., 1) is
    strictly convex) starting from [-10, 10]; the bracket is widened up to
    |c| = 1e6.
    """
    return _psi_star_0_argmin(model, numerics)[0]


def _psi_star_0_argmin(model, numerics):
    kern = _kernel(model, numerics)

    def d1(c):
        try:
            return kern(0.0, c, 1.0).d_c1
        except DegenerateModelError:
            # F_0(c, 1) underflows only when the labels are numerically noiseless
            raise NoInteriorMinimumError(
                f"F_0(c, 1) vanishes at c={c}; labels look noiseless at this resolution") from None

    lo, hi = -10.0, 10.0
    while d1(lo) > 0:
        lo *= 4.0
        if lo < -1e6:
            raise NoInteriorMinimumError("F_0(c, 1) keeps decreasing as c -> -infinity")
    while d1(hi) < 0:
        hi *= 4.0
        if hi > 1e6:
            raise NoInteriorMinimumError(
                "F_0(c, 1) keeps decreasing as c -> +infinity (labels look noiseless at this resolution)")
    c = brentq(d1, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    return kern(0.0, c, 1.0).value ** 2, c


def psi_plus_minus(model: LabelModel, measure: SpectralMeasure, kappa: float,
                   numerics: Numerics = DEFAULT_NUMERICS):
    """The pair ``(psi_+(kappa), psi_-(kappa))``.

    Each is zero when dF/dc1 at ``(+-zeta, 0)`` is positive and otherwise
    ``(dF/dc2)^2 - omega^2 (dF/dc1)^2`` at that point. Since F is even in
    ``c2``, ``dF/dc2`` vanishes there and both values are non-positive.
    """
    kern = _kernel(model, numerics)
    out = []
    for sign in (1.0, -1.0):
        e = kern(kappa, sign * measure.zeta, 0.0)
        out.append(0.0 if e.d_c1 > 0 else e.d_c2**2 - measure.omega**2 * e.d_c1**2)
    return tuple(out)


def psi_down(model: LabelModel, measure: SpectralMeasure, kappa: float,
             numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Lower end ``max(psi*(0), psi_+, psi_-)`` of the solvable psi-range at ``kappa``."""
    pp, pm = psi_plus_minus(model, measure, kappa, numerics)
    return max(psi_star_0(model, numerics), pp, pm)


# fixed point ----------------------------------------------------------------

class FixedPointSystem:
    """Residual map of the fixed-point system at fixed (psi, kappa)."""

    def __init__(self, model: LabelModel, measure: SpectralMeasure, psi: float, kappa: float,
                 numerics: Numerics = DEFAULT_NUMERICS):
        self.model, self.measure = model, measure
        self.psi, self.kappa = float(psi), float(kappa)
        self.numerics = numerics
        self.kern = _kernel(model, numerics)
        keep = measure.mass > 0
        self._m = measure.mass[keep]
        self._x = measure.x[keep]
        self._w2 = measure.w2[keep]
        self._sx = np.sqrt(self._x)
        self._sp = np.sqrt(self.psi)

    def coefficients(self, c1, c2):
        e = self.kern(self.kappa, c1, c2)
        b = e.pos_prob / e.value
        return e, e.d_c1 - c1 * b, b

    def residuals(self, c1, c2, s):
        _, a, b = self.coefficients(c1, c2)
        return self._residuals_ab(c1, c2, s, a, b)

    def _residuals_ab(self, c1, c2, s, a, b):
        m, x, w2, sx = self._m, self._x, self._w2, self._sx
        d = b * sx + self._sp * s / sx
        d2 = d * d
        aw = a * a * w2
        r1 = c1 + a * (m @ (w2 * sx / d))
        r2 = c1 * c1 + c2 * c2 - m @ ((self.psi + aw) * x / d2)
        r3 = 1.0 - m @ ((self.psi + aw) / d2)
        return np.array([r1, r2, r3])

    def residuals_u(self, u):
        return self.residuals(u[0], np.exp(u[1]), np.exp(u[2]))

    def t_value(self, fp: FixedPoint) -> float:
        e = fp.fk if fp.fk is not None else self.kern(self.kappa, fp.c1, fp.c2)
        return (e.value - fp.c1 * e.d_c1 - fp.c2 * e.d_c2) / self._sp - fp.s

    # solvers -----------------------------------------------------------------
    def newton(self, start, max_iter=MAX_NEWTON, tol=RESIDUAL_TOL):
        u = np.array([start[0], np.log(start[1]), np.log(start[2])], dtype=float)
        r = self.residuals_u(u)
        nr = np.max(np.abs(r))
        h = 1e-7
        for it in range(1, max_iter + 1):
            jac = np.empty((3, 3))
            for j in range(3):
                up, um = u.copy(), u.copy()
                up[j] += h
                um[j] -= h
                jac[:, j] = (self.residuals_u(up) - self.residuals_u(um)) / (2 * h)
            try:
                step = -np.linalg.solve(jac, r)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(jac, r, rcond=None)[0]
            # keep log-steps moderate so exp() stays sane
            big = np.max(np.abs(step[1:]))
            if big > 2.0:
                step *= 2.0 / big
            t = 1.0
            accepted = False
            for _ in range(40):
                cand = u + t * step
                if np.exp(cand[1]) >= C2_GUARD:
                    try:
                        rc = self.residuals_u(cand)
                    except (FloatingPointError, ValueError, ZeroDivisionError):
                        rc = None
                    if rc is not None and np.all(np.isfinite(rc)):
                        nc = np.max(np.abs(rc))
                        if nc <= (1.0 - 1e-4 * t) * nr or nc < 1e-14:
                            accepted = True
                            break
                t *= 0.5
            if not accepted:
                return u, r, it, False
            u, r, nr = cand, rc, nc
            small_step = np.max(np.abs(t * step)) <= 1e-10
            if nr <= 1e-12 or (nr <= tol and small_step):
                return u, r, it, True
        return u, r, max_iter, nr <= tol

    def picard(self, start, max_iter=2000, damping=0.5):
        """Damped substitution: s from the third equation, then c1, c2 from the first two."""
        c1, c2, s = map(float, start)
        for _ in range(max_iter):
            _, a, b = self.coefficients(c1, c2)
            g = lambda ls: self._residuals_ab(c1, c2, np.exp(ls), a, b)[2]
            lo, hi = np.log(s) - 1.0, np.log(s) + 1.0
            while g(lo) > 0 and lo > -60:
                lo -= 2.0
            while g(hi) < 0 and hi < 60:
                hi += 2.0
            if g(lo) > 0 or g(hi) < 0:
                break
            s = np.exp(brentq(g, lo, hi, xtol=1e-14))
            m, x, w2, sx = self._m, self._x, self._w2, self._sx
            d = b * sx + self._sp * s / sx
            c1_new = -a * (m @ (w2 * sx / d))
            q = m @ ((self.psi + a * a * w2) * x / (d * d)) - c1_new**2
            c2_new = np.sqrt(max(q, C2_GUARD**2 * 100))
            step = max(abs(c1_new - c1), abs(c2_new - c2))
            c1 += damping * (c1_new - c1)
            c2 += damping * (c2_new - c2)
            if step < 1e-7:
                break
        return c1, c2, s

    def default_starts(self):
        z = self.measure.zeta
        yield (0.5 * z, 0.5, 0.5)
        for c1, c2, s in itertools.product((0.0, z), (0.2, 1.0), (0.1, 1.0)):
            if (c1, c2, s) != (0.5 * z, 0.5, 0.5):
                yield (c1, c2, s)

    def solve(self, initial=None) -> FixedPoint:
        starts = ([tuple(initial)] if initial is not None else []) + list(self.default_starts())
        trace = []
        for start in starts:
            u, r, it, ok = self.newton(start)
            if not ok:
                # substitution then Newton polish from wherever it lands
                p = self.picard(start)
                if p[1] > C2_GUARD and p[2] > 0:
                    u, r, it2, ok = self.newton(p)
                    it += it2
            trace.append((start, float(np.max(np.abs(r))), it))
            if ok:
                c1, c2, s = u[0], float(np.exp(u[1])), float(np.exp(u[2]))
                return FixedPoint(float(c1), c2, s, tuple(map(float, r)), self.psi, self.kappa,
                                  it, self.kern(self.kappa, c1, c2))
        raise SolverFailure(
            f"fixed-point solver did not converge at psi={self.psi}, kappa={self.kappa}",
            {"attempts": trace})


def solve_fixed_point(model: LabelModel, measure: SpectralMeasure, psi: float, kappa: float,
                      numerics: Numerics = DEFAULT_NUMERICS, initial=None,
                      check_domain: bool = True) -> FixedPoint:
    """Solve the fixed-point system at (psi, kappa).

    Raises
    ------
    DomainError
        If ``psi <= psi_down(kappa) + 1e-6``.
    SolverFailure
        If no start converges.
    """
    if check_domain:
        low = psi_down(model, measure, kappa, numerics)
        if psi <= low + DOMAIN_MARGIN:
            raise DomainError(f"psi={psi} is not above psi_down({kappa})={low}")
    return FixedPointSystem(model, measure, psi, kappa, numerics).solve(initial)


def t_value(model: LabelModel, measure: SpectralMeasure, psi: float, kappa: float,
            numerics: Numerics = DEFAULT_NUMERICS, fixed_point: Optional[FixedPoint] = None) -> float:
    """T(psi, kappa) assembled from the fixed point."""
    sys_ = FixedPointSystem(model, measure, psi, kappa, numerics)
    fp = fixed_point if fixed_point is not None else solve_fixed_point(model, measure, psi, kappa, numerics)
    return sys_.t_value(fp)


class _TFunction:
    """kappa -> T(psi, kappa) with warm starts from the nearest solved kappa."""

    def __init__(self, model, measure, psi, numerics, low):
        self.model, self.measure, self.psi, self.numerics = model, measure, psi, numerics
        self.low = low
        self.solved: dict[float, FixedPoint] = {}

    def __call__(self, kappa):
        kappa = float(kappa)
        if self.psi <= self.low + DOMAIN_MARGIN:
            # outside the solvable range T is positive (it tends to a positive limit there)
            return 1.0
        init = None
        if self.solved:
            near = min(self.solved, key=lambda k: abs(k - kappa))
            fp = self.solved[near]
            init = (fp.c1, fp.c2, fp.s)
        sys_ = FixedPointSystem(self.model, self.measure, self.psi, kappa, self.numerics)
        fp = sys_.solve(init)
        self.solved[kappa] = fp
        return sys_.t_value(fp)


def kappa_star(model: LabelModel, measure: SpectralMeasure, psi: float,
               numerics: Numerics = DEFAULT_NUMERICS) -> AsymptoticPrediction:
    """Asymptotic max-margin and test error at overparametrization ``psi``.

    Raises
    ------
    BelowThresholdError
        If ``psi <= psi*(0)``.
    SolverFailure
        If the root of T cannot be bracketed.
    """
    psi = float(psi)
    ps0 = psi_star_0(model, numerics)
    if psi <= ps0:
        raise BelowThresholdError(f"psi={psi} is at or below the interpolation threshold {ps0}")
    # psi_+ and psi_- never exceed psi*(0) (see psi_plus_minus), so psi_down = psi*(0)
    tfun = _TFunction(model, measure, psi, numerics, ps0)
    lo = 1e-4
    t_lo = tfun(lo)
    if t_lo >= 0:
        t0 = tfun(0.0)
        if t0 >= 0:
            kstar = 0.0
        else:
            kstar = brentq(tfun, 0.0, lo, xtol=KAPPA_XTOL, rtol=4 * np.finfo(float).eps)
    else:
        hi = max(2 * lo, 0.5 * np.sqrt(psi * measure.mean_x()))
        t_hi = tfun(hi)
        grow = 0
        while t_hi <= 0:
            lo, hi = hi, 2 * hi
            t_hi = tfun(hi)
            grow += 1
            if grow > 60:
                raise SolverFailure("could not bracket the zero of T", {"psi": psi, "kappa_hi": hi})
        kstar = brentq(tfun, lo, hi, xtol=KAPPA_XTOL, rtol=4 * np.finfo(float).eps)
    if kstar not in tfun.solved:
        tfun(kstar)
    fp = tfun.solved[kstar]
    nu = fp.nu
    return AsymptoticPrediction(psi, ps0, ps0, float(kstar), float(nu),
                                q_error(model, nu, numerics), fp)


def margin_bound(prediction: AsymptoticPrediction, measure: SpectralMeasure) -> float:
    """Classical margin bound ``4 r sqrt(psi) / kappa*`` with ``r^2 = E X``."""
    if prediction.kappa_star <= 0:
        return float("inf")
    r = np.sqrt(measure.mean_x())
    return 4.0 * r * np.sqrt(prediction.psi) / prediction.kappa_star


def limit_coordinate_law(model: LabelModel, measure: SpectralMeasure, psi: float, n_samples: int,
                         seed: int, numerics: Numerics = DEFAULT_NUMERICS,
                         prediction: Optional[AsymptoticPrediction] = None):
    """Samples of (X, W, H) from the limiting coordinate law at kappa*(psi).

    ``H = -(sqrt(psi) G + a W) / D`` with ``(a, D)`` from the fixed point.
    """
    pred = prediction if prediction is not None else kappa_star(model, measure, psi, numerics)
    fp = pred.fixed_point
    sys_ = FixedPointSystem(model, measure, psi, pred.kappa_star, numerics)
    _, a, b = sys_.coefficients(fp.c1, fp.c2)
    rng = np.random.default_rng(seed)
    x, w = measure.sample(n_samples, rng)
    g = rng.standard_normal(n_samples)
    d = b * np.sqrt(x) + np.sqrt(psi) * fp.s / np.sqrt(x)
    h = -(np.sqrt(psi) * g + a * w) / d
    return x, w, h


# isotropic closed route -------------------------------------------------------

def _fvalues_many(kern: FkappaKernel, kappa, c1, c2, chunk: int = 128):
    """F values at many (c1, c2) pairs at once."""
    g, w, f = kern._g, kern._w, kern._f
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    out = np.empty(c1.shape[0])
    for lo in range(0, c1.size, chunk):
        a1 = c1[lo:lo + chunk, None]
        a2 = c2[lo:lo + chunk, None]
        safe = np.where(a2 > 0, a2, 1.0)
        total = 0.0
        for sign, prob in ((1.0, f), (-1.0, 1.0 - f)):
            u = kappa - sign * a1 * g
            t = u / safe
            cdf = np.where(a2 > 0, ndtr(t), (u > 0).astype(float))
            cpdf = np.where(a2 > 0, a2 * np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi), 0.0)
            total = total + ((u * u + a2 * a2) * cdf + u * cpdf) @ (prob * w)
        out[lo:lo + chunk] = total
    return np.sqrt(out)


def isotropic_objective(kern: FkappaKernel, psi: float, kappa: float, c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    c2 = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    return _fvalues_many(kern, kappa, c, c2) - np.sqrt(psi) * c2


def isotropic_min(kern: FkappaKernel, psi: float, kappa: float, grid: int = 2001):
    """Global minimum over c in [-1, 1] of ``F_kappa(c, sqrt(1-c^2)) - sqrt(psi (1-c^2))``."""
    cs = np.linspace(-1.0, 1.0, grid)
    vals = isotropic_objective(kern, psi, kappa, cs)
    k = int(np.argmin(vals))
    lo, hi = cs[max(k - 1, 0)], cs[min(k + 1, grid - 1)]
    res = minimize_scalar(lambda c: isotropic_objective(kern, psi, kappa, c)[0],
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if res.fun <= vals[k]:
        return float(res.fun), float(res.x)
    return float(vals[k]), float(cs[k])


@dataclass(frozen=True)
class IsotropicResult:
    kappa_star: float
    c_star: float
    err_star: float


def kappa_star_isotropic_direct(model: LabelModel, psi: float,
                                numerics: Numerics = DEFAULT_NUMERICS,
                                grid: int = 2001) -> IsotropicResult:
    """Isotropic margin from the one-dimensional variational formula.

    Independent of the fixed-point solver: for each trial kappa the
    objective is minimized globally over c by a dense grid plus local
    refinement, and kappa is located by a bracketing root search on the sign
    of that minimum.
    """
    psi = float(psi)
    ps0 = psi_star_0(model, numerics)
    if psi <= ps0:
        raise BelowThresholdError(f"psi={psi} is at or below the interpolation threshold {ps0}")
    kern = _kernel(model, numerics)
    tmin = lambda k: isotropic_min(kern, psi, k, grid)[0]
    lo, hi = 0.0, max(0.5 * np.sqrt(psi), 1e-3)
    if tmin(lo) >= 0:
        kstar = 0.0
    else:
        while tmin(hi) < 0:
            lo, hi = hi, 2 * hi
        kstar = brentq(tmin, lo, hi, xtol=KAPPA_XTOL, rtol=4 * np.finfo(float).eps)
    _, c = isotropic_min(kern, psi, kstar, grid)
    return IsotropicResult(float(kstar), c, q_error(model, c, numerics))


def isotropic_fixed_point(model: LabelModel, psi: float, kappa: float, c: float,
                          numerics: Numerics = DEFAULT_NUMERICS) -> FixedPoint:
    """Fixed point implied by a minimizer ``c`` of the isotropic objective."""
    kern = _kernel(model, numerics)
    c2 = np.sqrt(1.0 - c * c)
    e = kern(kappa, c, c2)
    s = (np.sqrt(psi) - e.d_c2) / (np.sqrt(psi) * c2)
    sys_ = FixedPointSystem(model, SpectralMeasure.isotropic(), psi, kappa, numerics)
    return FixedPoint(float(c), float(c2), float(s), tuple(sys_.residuals(c, c2, s)), psi, kappa, 0, e)


# misspecified model ----------------------------------------------------------

def misspecified_gamma(psi: float, psi0: float) -> float:
    return min(psi / psi0, 1.0)


def misspecified_model(base: LabelModel, psi0: float, psi: float) -> LabelModel:
    gamma = misspecified_gamma(psi, psi0)
    return base if gamma >= 1.0 else LabelModel.misspecified(base, gamma)


def psi_star_misspecified(base: LabelModel, psi0: float, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Smallest psi above which the misspecified data are separable."""
    gap = lambda psi: psi - psi_star_0(misspecified_model(base, psi0, psi), numerics)
    hi = psi0
    while gap(hi) <= 0:
        hi *= 2.0
    lo = hi / 2.0
    while gap(lo) > 0:
        lo /= 2.0
    return brentq(gap, lo, hi, xtol=1e-12)


def misspecified_prediction(base: LabelModel, psi0: float, psi: float,
                            numerics: Numerics = DEFAULT_NUMERICS) -> AsymptoticPrediction:
    """Prediction for isotropic features when only a ``min(psi/psi0, 1)`` share of the signal is observed."""
    model = misspecified_model(base, psi0, psi)
    return kappa_star(model, SpectralMeasure.isotropic(), psi, numerics)
