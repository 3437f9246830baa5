"""Finite-sample data generators.

Every dataset carries enough information to evaluate the test error of any
linear rule exactly: the label is drawn from ``base_model`` applied to a
standard normal score ``g``, and for Gaussian features
``Cov(<theta, x>, g) = <theta, signal_cross>`` and
``Var <theta, x> = theta^T Sigma theta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..labels import LabelModel
from ..measures import ACTIVATIONS, activation_coeffs, matched_activation, relu

GENERATORS = ("isotropic", "misspecified", "rf_noisy_linear", "rf_nonlinear")


@dataclass(frozen=True)
class SigmaDescriptor:
    """Population covariance, either the identity or ``g1^2 W W^T + gs^2 I``."""

    kind: str
    p: int
    w: Optional[np.ndarray] = None
    gamma1: float = 0.0
    gamma_star: float = 1.0
    exact: bool = True

    def quad(self, theta: np.ndarray) -> float:
        """theta^T Sigma theta."""
        if self.kind == "identity":
            return float(theta @ theta)
        wt = self.w.T @ theta
        return float(self.gamma1**2 * (wt @ wt) + self.gamma_star**2 * (theta @ theta))

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        if self.kind == "identity":
            return float(a @ b)
        return float(self.gamma1**2 * (self.w.T @ a) @ (self.w.T @ b) + self.gamma_star**2 * (a @ b))

    def matrix(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.p)
        return self.gamma1**2 * self.w @ self.w.T + self.gamma_star**2 * np.eye(self.p)

    def eigh(self):
        """Eigenvalues and eigenvectors (columns), ascending."""
        if self.kind == "identity":
            return np.ones(self.p), np.eye(self.p)
        return np.linalg.eigh(self.matrix())


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    generator: str
    sigma: SigmaDescriptor
    theta_star: np.ndarray          # effective signal direction in feature space
    rho_n: float                    # ||theta_star||_Sigma
    base_model: LabelModel          # law of y given the standard normal score g
    signal_cross: np.ndarray        # Cov(<theta, x>, g) = <theta, signal_cross>
    seed: int
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


def _unit(v):
    return v / np.linalg.norm(v)


def _sphere_rows(rng, rows, dim):
    w = rng.standard_normal((rows, dim))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def _draw_labels(rng, model: LabelModel, g):
    prob = model.flip(g)
    return np.where(rng.random(g.shape[0]) < prob, 1.0, -1.0)


def sample_isotropic(n: int, p: int, beta: float, seed: int) -> Dataset:
    """x ~ N(0, I_p), unit signal drawn uniformly from the sphere, logistic labels."""
    _check_dims(n, p)
    rng = np.random.default_rng(seed)
    theta = _unit(rng.standard_normal(p))
    x = rng.standard_normal((n, p))
    model = LabelModel.logistic(beta)
    y = _draw_labels(rng, model, x @ theta)
    return Dataset(x, y, "isotropic", SigmaDescriptor("identity", p), theta, 1.0, model, theta,
                   seed, {"n": n, "p": p, "beta": beta})


def sample_misspecified(n: int, p: int, p0: int, beta: float, seed: int) -> Dataset:
    """Labels depend on the first ``p0`` coordinates; the learner sees the first ``p``.

    The full signal has entries ``+-1/sqrt(p0)`` on its support, so the
    observed share of the signal energy is ``min(p, p0) / p0``.
    """
    _check_dims(n, p)
    if p0 < 1:
        raise ValueError("p0 must be positive")
    rng = np.random.default_rng(seed)
    dim = max(p, p0)
    beta_star = np.zeros(dim)
    beta_star[:p0] = rng.choice([-1.0, 1.0], size=p0) / np.sqrt(p0)
    z = rng.standard_normal((n, dim))
    base = LabelModel.logistic(beta)
    y = _draw_labels(rng, base, z @ beta_star)
    proj = beta_star[:p]
    gamma_n = float(proj @ proj)
    theta = proj / np.sqrt(gamma_n)
    return Dataset(z[:, :p].copy(), y, "misspecified", SigmaDescriptor("identity", p), theta, 1.0,
                   base, proj, seed, {"n": n, "p": p, "p0": p0, "beta": beta},
                   {"gamma_n": gamma_n, "beta_star": beta_star})


def rf_effective_quantities(w: np.ndarray, beta_star: np.ndarray, gamma1: float, gamma_star: float):
    """Finite-n effective signal of the Gaussian-equivalent features.

    Uses the push-through identity ``Sigma^{-1} W = W M^{-1}`` with
    ``M = g1^2 W^T W + gs^2 I_d`` so only d x d systems are solved.

    Returns ``(theta_star, alpha_n, tau_n, rho_n)``.
    """
    d = w.shape[1]
    m = gamma1**2 * (w.T @ w) + gamma_star**2 * np.eye(d)
    m_inv_b = np.linalg.solve(m, beta_star)
    m_inv2_b = np.linalg.solve(m, m_inv_b)
    wb = w @ beta_star
    sig_inv_wb = w @ m_inv_b
    alpha_sq = gamma1**2 * float((w @ m_inv2_b) @ wb)
    tau_sq = 1.0 - gamma1**2 * float(wb @ sig_inv_wb)
    alpha = np.sqrt(alpha_sq)
    theta = gamma1 * sig_inv_wb / alpha
    rho = np.sqrt(max(1.0 - tau_sq, 0.0)) / alpha
    return theta, float(alpha), float(np.sqrt(max(tau_sq, 0.0))), float(rho)


def resolve_activation(name: str) -> Callable:
    if name == "sigma2":
        return matched_activation(activation_coeffs(relu))[0]
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


def sample_rf(n: int, p: int, d: int, beta: float, seed: int, nonlinear: bool = False,
              activation: str = "relu") -> Dataset:
    """Random-features data: z ~ N(0, I_d), W rows uniform on the sphere.

    ``nonlinear=False`` gives the noisy linear features
    ``x = g1 W z + gs xi``; ``nonlinear=True`` gives ``x = sigma(W z) - g0``.
    In both cases ``y ~ f(<beta*, z>)`` with a uniformly random unit ``beta*``.
    """
    _check_dims(n, p)
    if d < 1:
        raise ValueError("d must be positive")
    rng = np.random.default_rng(seed)
    sigma = resolve_activation(activation)
    coeffs = activation_coeffs(sigma)
    g1, gs = coeffs.gamma1, coeffs.gamma_star
    w = _sphere_rows(rng, p, d)
    beta_star = _unit(rng.standard_normal(d))
    z = rng.standard_normal((n, d))
    pre = z @ w.T
    if nonlinear:
        x = sigma(pre) - coeffs.gamma0
    else:
        x = g1 * pre + gs * rng.standard_normal((n, p))
    base = LabelModel.logistic(beta)
    y = _draw_labels(rng, base, z @ beta_star)
    theta, alpha, tau, rho = rf_effective_quantities(w, beta_star, g1, gs)
    desc = SigmaDescriptor("lowrank", p, w, g1, gs, exact=not nonlinear)
    gen = "rf_nonlinear" if nonlinear else "rf_noisy_linear"
    return Dataset(x, y, gen, desc, theta, rho, base, g1 * (w @ beta_star), seed,
                   {"n": n, "p": p, "d": d, "beta": beta, "activation": activation},
                   {"alpha_n": alpha, "tau_n": tau, "w": w, "beta_star": beta_star,
                    "z": z, "coeffs": coeffs, "sigma": sigma})


def sample_dataset(generator: str, n: int, p: int, seed: int, beta: float = 1.0,
                   d: Optional[int] = None, p0: Optional[int] = None,
                   activation: str = "relu") -> Dataset:
    """Dispatch on the generator tag."""
    if generator == "isotropic":
        return sample_isotropic(n, p, beta, seed)
    if generator == "misspecified":
        if p0 is None:
            raise ValueError("misspecified generator needs p0")
        return sample_misspecified(n, p, p0, beta, seed)
    if generator in ("rf_noisy_linear", "rf_nonlinear"):
        if d is None:
            raise ValueError("random-features generators need d")
        return sample_rf(n, p, d, beta, seed, generator == "rf_nonlinear", activation)
    raise ValueError(f"unknown generator {generator!r}")


def _check_dims(n, p):
    if int(n) != n or int(p) != p or n < 1 or p < 1:
        raise ValueError(f"invalid dimensions n={n}, p={p}")
