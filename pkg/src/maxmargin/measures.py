"""Limit spectral measures mu = Law(X, W) and random-features constants.

Every measure is stored as weighted atoms in ``X`` together with the
conditional second moment ``w2 = E[W^2 | X]``. All expectations entering the
fixed-point system are affine in ``W^2``, so this representation is exact for
them. ``w_gaussian`` records whether ``W | X`` is centered Gaussian (isotropic
and random-features measures) or deterministic (discrete atoms); it matters
only when sampling ``W`` itself.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NumericConsistencyError, PurelyLinearActivationError
from .labels import LabelModel
from .quadrature import DEFAULT_NUMERICS, Numerics, gauss_hermite, mp_edges, mp_density, normal_composite

KINDS = ("isotropic", "discrete", "rf_gaussian_equiv")


@dataclass(frozen=True)
class ActivationCoeffs:
    """Gaussian Hermite coefficients of an activation: mean, linear part, nonlinear residual norm."""

    gamma0: float
    gamma1: float
    gamma_star: float

    def centered(self) -> "ActivationCoeffs":
        return ActivationCoeffs(0.0, self.gamma1, self.gamma_star)


def _moment_rule():
    # panel edges include 0, so activations with a kink at the origin integrate exactly
    return normal_composite(480, 8, 12.0)


def activation_coeffs(sigma: Callable[[np.ndarray], np.ndarray]) -> ActivationCoeffs:
    """Compute ``gamma0 = E sigma(G)``, ``gamma1 = E G sigma(G)`` and ``gamma_star``.

    Raises
    ------
    PurelyLinearActivationError
        If ``gamma_star^2 <= 1e-12``.
    """
    rule = _moment_rule()
    s = np.asarray(sigma(rule.nodes), dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("activation is not finite on the quadrature nodes")
    g0 = float(rule.weights @ s)
    g1 = float(rule.weights @ (rule.nodes * s))
    gs2 = float(rule.weights @ (s * s)) - g1 * g1 - g0 * g0
    if gs2 <= 1e-12:
        raise PurelyLinearActivationError(
            f"activation has gamma_star^2 = {gs2:.3e}; a nonlinear activation is required")
    return ActivationCoeffs(g0, g1, float(np.sqrt(gs2)))


def relu(x):
    return np.maximum(x, 0.0)


ACTIVATIONS = {
    "relu": relu,
    "tanh": np.tanh,
    "abs": np.abs,
}


def matched_activation(target: ActivationCoeffs):
    """Activation ``0.5 x_+ + a0 x_+^2 + a1 x_+ / (1 + x_+)`` with the target (gamma1, gamma_star).

    ``a0 = a1 = 0`` (plain ReLU up to the linear factor) is always one
    solution when the target is ReLU; the other root of the quadratic in
    ``gamma_star^2`` is returned. Returns ``(sigma, a0, a1)``.
    """
    rule = _moment_rule()
    g, w = rule.nodes, rule.weights
    base = 0.5 * relu(g)
    h0 = relu(g) ** 2
    h1 = relu(g) / (1.0 + relu(g))

    def resid(v):
        # component orthogonal to span{1, G}
        return v - (w @ v) - (w @ (g * v)) * g

    # gamma1 constraint is linear: a0 = k * a1 + m
    e0, e1 = w @ (g * h0), w @ (g * h1)
    m = (target.gamma1 - w @ (g * base)) / e0
    k = -e1 / e0
    b_perp = resid(base + m * h0)
    h_perp = resid(k * h0 + h1)
    qa = w @ (h_perp * h_perp)
    qb = 2.0 * (w @ (b_perp * h_perp))
    qc = w @ (b_perp * b_perp) - target.gamma_star**2
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        raise ValueError("no activation of this family matches the target coefficients")
    roots = [(-qb + sgn * np.sqrt(disc)) / (2 * qa) for sgn in (1.0, -1.0)]
    a1 = max(roots, key=abs)
    a0 = k * a1 + m

    def sigma(x):
        xp = relu(np.asarray(x, dtype=float))
        return 0.5 * xp + a0 * xp**2 + a1 * xp / (1.0 + xp)

    return sigma, float(a0), float(a1)


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Limit measure over (X, W) with cached constants zeta, omega, rho.

    Use the constructors :meth:`isotropic`, :meth:`discrete` and
    :meth:`rf_gaussian_equiv`.
    """

    kind: str
    x: np.ndarray
    mass: np.ndarray
    w2: np.ndarray
    w_gaussian: bool
    params: dict = field(default_factory=dict)
    zeta: float = 0.0
    omega: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        for name in ("x", "mass", "w2"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if np.any(self.x <= 0):
            raise ValueError("eigenvalues must be positive")
        if np.any(self.mass < 0) or abs(self.mass.sum() - 1.0) > 1e-10:
            raise ValueError("masses must be non-negative and sum to one")
        ew2 = float(self.mass @ self.w2)
        if abs(ew2 - 1.0) > 1e-8:
            raise ValueError(f"E[W^2] must equal 1, got {ew2!r}")
        inv = float(self.mass @ (self.w2 / self.x))
        zeta = inv ** -0.5
        omega = float(self.mass @ ((1.0 - zeta**2 / self.x) ** 2 * self.w2)) ** 0.5
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "rho", inv ** -0.5)

    # constructors ---------------------------------------------------------
    @classmethod
    def isotropic(cls) -> "SpectralMeasure":
        """X = 1, W ~ N(0, 1): identity covariance with a uniformly random signal direction."""
        return cls("isotropic", [1.0], [1.0], [1.0], True, {})

    @classmethod
    def discrete(cls, atoms: Sequence[tuple]) -> "SpectralMeasure":
        """Atoms ``(lambda, wbar, mass)``; W is deterministic given the atom."""
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != 3 or len(atoms) == 0:
            raise ValueError("atoms must be a non-empty list of (lambda, wbar, mass)")
        lam, wbar, mass = atoms.T
        if np.any(mass <= 0):
            raise ValueError("atom masses must be positive")
        return cls("discrete", lam, mass, wbar**2, False,
                   {"atoms": [tuple(map(float, a)) for a in atoms], "wbar": wbar.tolist()})

    @classmethod
    def rf_gaussian_equiv(cls, psi1: float, gamma1: float, gamma_star: float,
                          numerics: Numerics = DEFAULT_NUMERICS) -> "SpectralMeasure":
        """Gaussian-equivalent measure of the random-features model.

        ``X = gamma1^2 Xt + gamma_star^2`` with ``Xt`` Marchenko-Pastur, and
        ``E[W^2 | Xt] = gamma1^2 psi1 Xt / (C0^2 X)``.
        """
        if not (psi1 > 0 and gamma1 > 0 and gamma_star > 0):
            raise ValueError("psi1, gamma1 and gamma_star must be positive")
        xt, mass = mp_spectrum(psi1, numerics)
        x = gamma1**2 * xt + gamma_star**2
        ratio = gamma1**2 * psi1 * xt / x
        c0sq = float(mass @ ratio)
        params = {"psi1": float(psi1), "gamma1": float(gamma1), "gamma_star": float(gamma_star),
                  "c0_sq": c0sq, "mp_order": numerics.mp_order}
        return cls("rf_gaussian_equiv", x, mass, ratio / c0sq, True, params)

    # operations ------------------------------------------------------------
    def expect(self, integrand: Callable) -> float:
        """E_mu[integrand(X, W^2)], exact for integrands affine in ``W^2``."""
        vals = np.asarray(integrand(self.x, self.w2), dtype=float)
        return float(self.mass @ np.broadcast_to(vals, self.x.shape))

    def expect_full(self, integrand: Callable, order: int = 64) -> float:
        """E_mu[integrand(X, W^2)] for integrands of any form in ``W^2``.

        Integrates over the Gaussian factor of W explicitly; for measures with
        deterministic W this coincides with :meth:`expect`.
        """
        if not self.w_gaussian:
            return self.expect(integrand)
        rule = gauss_hermite(order)
        vals = integrand(self.x[:, None], self.w2[:, None] * rule.nodes[None, :] ** 2)
        return float(self.mass @ (np.asarray(vals, dtype=float) @ rule.weights))

    def mean_x(self) -> float:
        return float(self.mass @ self.x)

    def x_max(self) -> float:
        return float(self.x[self.mass > 0].max())

    def sample(self, n: int, rng: np.random.Generator):
        """Draw ``n`` samples of (X, W).

        Random-features measures use inverse-CDF sampling of the spectrum;
        other kinds sample their atoms exactly.
        """
        if self.kind == "rf_gaussian_equiv":
            xt = sample_mp(self.params["psi1"], n, rng)
            g1, gs = self.params["gamma1"], self.params["gamma_star"]
            x = g1**2 * xt + gs**2
            w2 = g1**2 * self.params["psi1"] * xt / (x * self.params["c0_sq"])
            return x, np.sqrt(w2) * rng.standard_normal(n)
        idx = rng.choice(self.x.size, size=n, p=self.mass / self.mass.sum())
        if self.w_gaussian:
            return self.x[idx], np.sqrt(self.w2[idx]) * rng.standard_normal(n)
        return self.x[idx], np.asarray(self.params["wbar"])[idx]

    def to_dict(self) -> dict:
        if self.kind == "isotropic":
            return {"kind": "isotropic"}
        if self.kind == "discrete":
            return {"kind": "discrete", "atoms": [list(a) for a in self.params["atoms"]]}
        return {"kind": "rf_gaussian_equiv",
                **{k: self.params[k] for k in ("psi1", "gamma1", "gamma_star")}}

    @classmethod
    def from_dict(cls, data: dict, numerics: Numerics = DEFAULT_NUMERICS) -> "SpectralMeasure":
        kind = data.get("kind")
        if kind == "isotropic":
            return cls.isotropic()
        if kind == "discrete":
            return cls.discrete(data["atoms"])
        if kind == "rf_gaussian_equiv":
            return cls.rf_gaussian_equiv(data["psi1"], data["gamma1"], data["gamma_star"], numerics)
        raise ValueError(f"unknown measure kind {kind!r}")


def mp_spectrum(psi1: float, numerics: Numerics = DEFAULT_NUMERICS):
    """Atoms and masses for the limiting spectrum of ``W W^T`` (p/d = psi1).

    For ``psi1 > 1`` an atom at zero carries mass ``1 - 1/psi1``.
    """
    if psi1 <= 0:
        raise ValueError("psi1 must be positive")
    if psi1 <= 1.0:
        rule = numerics.mp(psi1)
        return rule.nodes.copy(), rule.weights.copy()
    rule = numerics.mp(1.0 / psi1)
    x = np.concatenate([[0.0], psi1 * rule.nodes])
    m = np.concatenate([[1.0 - 1.0 / psi1], rule.weights / psi1])
    return x, m


def rf_tau(psi1: float, coeffs: ActivationCoeffs, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Noise level tau of the effective label model, in (0, 1)."""
    if psi1 <= 0:
        raise ValueError("psi1 must be positive")
    xt, mass = mp_spectrum(psi1, numerics)
    g1s = coeffs.gamma1**2
    t2 = 1.0 - psi1 * float(mass @ (g1s * xt / (g1s * xt + coeffs.gamma_star**2)))
    if not t2 > 0:
        raise NumericConsistencyError(f"tau^2 = {t2!r} is not positive")
    return float(np.sqrt(t2))


def rf_model(psi1: float, coeffs: ActivationCoeffs, base: LabelModel,
             numerics: Numerics = DEFAULT_NUMERICS):
    """Gaussian-equivalent (measure, label model) pair for random features.

    Activations with ``gamma0 != 0`` are replaced by their centered version
    with a warning.
    """
    if coeffs.gamma0 != 0.0:
        if abs(coeffs.gamma0) > 1e-12:
            warnings.warn("activation is not centered; using sigma - gamma0", stacklevel=2)
        coeffs = coeffs.centered()
    measure = SpectralMeasure.rf_gaussian_equiv(psi1, coeffs.gamma1, coeffs.gamma_star, numerics)
    tau = rf_tau(psi1, coeffs, numerics)
    return measure, LabelModel.rf_effective(base, tau, measure.rho)


_MP_TABLE_KNOTS = 10_000


def _mp_inverse_cdf(lam: float):
    lo, hi = mp_edges(lam)
    # theta parameterization keeps knots dense near both edges
    th = np.linspace(np.pi, 0.0, _MP_TABLE_KNOTS)
    s = np.sqrt(lam)
    x = (1.0 + s * np.cos(th)) ** 2
    x[0], x[-1] = lo, hi
    dens = mp_density(x, lam)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return PchipInterpolator(cdf[keep], x[keep])


def sample_mp(psi1: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Samples from the limiting spectrum of ``W W^T`` including the zero atom."""
    u = rng.random(n)
    if psi1 <= 1.0:
        return _mp_inverse_cdf(psi1)(u)
    atom = 1.0 - 1.0 / psi1
    out = np.zeros(n)
    bulk = u >= atom
    out[bulk] = psi1 * _mp_inverse_cdf(1.0 / psi1)((u[bulk] - atom) / (1.0 - atom))
    return out
