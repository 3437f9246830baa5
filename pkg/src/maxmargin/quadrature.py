"""Deterministic quadrature rules.

Every expectation in the package reduces to a weighted sum over one of the
rules built here:

* ``gauss_hermite`` -- Gauss rule for the standard normal weight
  (probabilist normalization, weights sum to one).
* ``normal_composite`` -- composite Gauss-Legendre panels multiplied by the
  standard normal density. Used for expectations over ``G`` whose integrand
  contains a steep logistic link, where Gauss-Hermite converges slowly.
* ``mp_rule`` -- rule for the absolutely continuous Marchenko-Pastur bulk.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

GAUSS_HERMITE = "gauss_hermite_probabilist"
NORMAL_COMPOSITE = "normal_composite_legendre"
MP_BULK = "marchenko_pastur_bulk"

DEFAULT_GH_ORDER = 64
DEFAULT_MP_ORDER = 200


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and positive weights of a quadrature rule.

    Arrays are made read-only on construction so a rule can be shared freely.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be strictly positive")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(self.weights @ np.asarray(func(self.nodes), dtype=float))


def golub_welsch(diag: np.ndarray, offdiag: np.ndarray, mu0: float):
    """Nodes and weights from the Jacobi matrix of a family of orthogonal polynomials.

    Parameters
    ----------
    diag, offdiag : ndarray
        Recurrence coefficients (diagonal and sub-diagonal of the Jacobi matrix).
    mu0 : float
        Total mass of the weight function.
    """
    nodes, vecs = eigh_tridiagonal(diag, offdiag)
    weights = mu0 * vecs[0, :] ** 2
    return nodes, weights


def _symmetrize(nodes, weights):
    # the weight functions used here are even; force exact +/- pairing
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


@lru_cache(maxsize=32)
def gauss_hermite(order: int = DEFAULT_GH_ORDER) -> QuadratureRule:
    """Gauss-Hermite rule for E[g(G)], G ~ N(0, 1).

    Exact for polynomials of degree ``2 * order - 1``.
    """
    if int(order) != order or order < 2:
        raise ValueError(f"Gauss-Hermite order must be an integer >= 2, got {order!r}")
    order = int(order)
    k = np.arange(1, order)
    nodes, _ = golub_welsch(np.zeros(order), np.sqrt(k), 1.0)
    # eigenvector components underflow in the far tails, so the weights are
    # taken from the Christoffel function 1 / sum_k p_k(x)^2 instead
    weights = 1.0 / _hermite_christoffel(nodes, order)
    nodes, weights = _symmetrize(nodes, weights)
    return QuadratureRule(nodes, weights / weights.sum(), GAUSS_HERMITE)


def _hermite_christoffel(x, order):
    """sum_{k < order} p_k(x)^2 for the orthonormal probabilists' Hermite polynomials."""
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, order):
        prev, cur = cur, (x * cur - np.sqrt(k - 1) * prev) / np.sqrt(k)
        total += cur * cur
    return total


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    if order < 1:
        raise ValueError("order must be positive")
    k = np.arange(1, order)
    nodes, weights = golub_welsch(np.zeros(order), k / np.sqrt(4.0 * k * k - 1.0), 2.0)
    nodes, weights = _symmetrize(nodes, weights)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@lru_cache(maxsize=32)
def normal_composite(panels: int = 240, order: int = 8, half_width: float = 12.0) -> QuadratureRule:
    """Composite Gauss-Legendre rule against the standard normal density.

    ``panels`` equal panels tile ``[-half_width, half_width]``. Unlike
    Gauss-Hermite, node spacing is uniform, so integrands with sharp features
    near the origin (steep logistic links) are resolved at any order.
    """
    if panels < 2 or panels % 2:
        raise ValueError("panels must be an even integer >= 2")
    x, w = gauss_legendre(order)
    edges = np.linspace(-half_width, half_width, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel() * np.exp(-0.5 * nodes**2) / np.sqrt(2 * np.pi)
    nodes, weights = _symmetrize(nodes, weights)
    # far-tail nodes carry less than 1e-18 of the mass each
    keep = weights > 1e-18 * weights.max()
    nodes, weights = nodes[keep], weights[keep]
    return QuadratureRule(nodes, weights / weights.sum(), NORMAL_COMPOSITE)


def mp_edges(lambda_ratio: float) -> tuple[float, float]:
    s = np.sqrt(lambda_ratio)
    return (1.0 - s) ** 2, (1.0 + s) ** 2


def mp_density(x, lambda_ratio: float):
    """Marchenko-Pastur bulk density with ratio ``lambda_ratio`` in (0, 1]."""
    lo, hi = mp_edges(lambda_ratio)
    x = np.asarray(x, dtype=float)
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2 * np.pi * lambda_ratio * xi)
    return out


@lru_cache(maxsize=64)
def mp_rule(lambda_ratio: float, order: int = DEFAULT_MP_ORDER) -> QuadratureRule:
    """Quadrature rule for the Marchenko-Pastur bulk density ``nu_lambda``.

    The substitution ``x = t**2`` with ``t = 1 + sqrt(lambda) cos(theta)``
    absorbs both square-root edges and the ``1/x`` factor (which becomes
    singular at ``lambda = 1``); the remaining integrand in ``theta`` is
    smooth and is integrated with Gauss-Legendre on ``[0, pi]``. Weights are
    renormalized to sum to one.
    """
    if not (0.0 < lambda_ratio <= 1.0):
        raise ValueError(f"lambda_ratio must lie in (0, 1], got {lambda_ratio!r}")
    if order < 2:
        raise ValueError("order must be >= 2")
    s = np.sqrt(lambda_ratio)
    u, w = gauss_legendre(order)
    theta = 0.5 * np.pi * (u + 1.0)
    t = 1.0 + s * np.cos(theta)
    t_hi, t_lo = 1.0 + s, 1.0 - s
    dens = np.sin(theta) ** 2 * np.sqrt((t_hi + t) * (t + t_lo)) / (np.pi * t)
    weights = 0.5 * np.pi * w * dens
    nodes = t**2
    order_idx = np.argsort(nodes)
    nodes, weights = nodes[order_idx], weights[order_idx]
    return QuadratureRule(nodes, weights / weights.sum(), MP_BULK)


@dataclass(frozen=True)
class Numerics:
    """Quadrature settings shared by all asymptotic computations.

    ``g_rule`` selects the rule for expectations over a standard normal:
    ``"composite"`` (default) or ``"gauss_hermite"``.
    """

    gh_order: int = DEFAULT_GH_ORDER
    mp_order: int = DEFAULT_MP_ORDER
    g_panels: int = 240
    g_rule: str = "composite"

    def __post_init__(self):
        if self.g_rule not in ("composite", "gauss_hermite"):
            raise ValueError(f"unknown Gaussian rule {self.g_rule!r}")
        if self.gh_order < 2 or self.mp_order < 2 or self.g_panels < 2 or self.g_panels % 2:
            raise ValueError("invalid quadrature orders")

    def gaussian(self) -> QuadratureRule:
        if self.g_rule == "gauss_hermite":
            return gauss_hermite(self.gh_order)
        return normal_composite(self.g_panels)

    def mp(self, lambda_ratio: float) -> QuadratureRule:
        return mp_rule(float(lambda_ratio), self.mp_order)

    def refined(self, factor: int = 2) -> "Numerics":
        return Numerics(self.gh_order * factor, self.mp_order * factor, self.g_panels * factor, self.g_rule)


DEFAULT_NUMERICS = Numerics()
