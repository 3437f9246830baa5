"""Hard-margin linear classifier by dual coordinate ascent.

Solves ``min 1/2 ||theta||^2  s.t.  y_i <theta, x_i> >= 1`` through its dual

    max_{alpha >= 0}  sum(alpha) - 1/2 alpha^T K alpha,   K_ij = y_i y_j <x_i, x_j>

Coordinate sweeps run in a numba kernel on the Gram matrix. Every few sweeps
the current support set is polished by solving ``K_SS alpha_S = 1`` exactly;
a polished point that passes the KKT test ends the iteration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import linprog

from ..errors import NonSeparableError

KKT_TOL = 1e-8
SWEEPS_PER_ROUND = 25
MAX_EPOCHS = 100_000
SEPARABILITY_CHECK_EPOCH = 2_000


@dataclass(frozen=True)
class MaxMarginSolution:
    direction: np.ndarray
    margin: float
    dual: np.ndarray
    iterations: int
    converged: bool
    kkt_violation: float = 0.0
    duality_gap: float = 0.0


@njit(cache=True)
def _cd_sweeps(k, alpha, ka, perms):
    n = k.shape[0]
    for e in range(perms.shape[0]):
        for t in range(n):
            i = perms[e, t]
            new = alpha[i] + (1.0 - ka[i]) / k[i, i]
            if new < 0.0:
                new = 0.0
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                for j in range(n):
                    ka[j] += delta * k[j, i]


def kkt_violation(alpha, ka) -> float:
    """Largest violation of the dual optimality conditions (margins ``ka``)."""
    on = alpha > 0
    v_on = np.abs(ka[on] - 1.0).max(initial=0.0)
    v_off = np.maximum(1.0 - ka[~on], 0.0).max(initial=0.0)
    return float(max(v_on, v_off))


def duality_gap(alpha, ka) -> float:
    """Relative gap between the rescaled primal and the dual objective."""
    sq = float(alpha @ ka)          # ||theta||^2
    if sq <= 0:
        return np.inf
    m = float(ka.min())
    if m <= 0:
        return np.inf
    primal = 0.5 * sq / (m * m)
    dual = float(alpha.sum()) - 0.5 * sq
    return (primal - dual) / primal


def _polish(k, alpha, ka):
    s = np.flatnonzero(alpha > 0)
    if s.size == 0:
        return None
    try:
        a_s = np.linalg.solve(k[np.ix_(s, s)], np.ones(s.size))
    except np.linalg.LinAlgError:
        return None
    if np.any(a_s <= 0):
        return None
    cand = np.zeros_like(alpha)
    cand[s] = a_s
    kc = k[:, s] @ a_s
    if kkt_violation(cand, kc) <= KKT_TOL:
        return cand, kc
    return None


def is_separable(x: np.ndarray, y: np.ndarray) -> bool:
    """Linear-programming test for a strictly separating direction.

    Maximizes ``t`` subject to ``y_i <theta, x_i> >= t`` over the box
    ``|theta_j| <= 1``, ``t <= 1``; the data are separable iff ``t* > 0``.
    The bounded program is solved much faster than the bare feasibility
    problem when the data are not separable.
    """
    n, p = x.shape
    a = np.c_[-(y[:, None] * x), np.ones(n)]
    c = np.zeros(p + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=a, b_ub=np.zeros(n), bounds=[(-1.0, 1.0)] * p + [(None, 1.0)],
                  method="highs")
    return res.status == 0 and -res.fun > 1e-9


def max_margin_xy(x: np.ndarray, y: np.ndarray, seed: int = 0,
                  max_epochs: int = MAX_EPOCHS) -> MaxMarginSolution:
    """Max-margin direction and margin for features ``x`` (n x p) and labels ``y``."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    yx = y[:, None] * x
    k = np.ascontiguousarray(yx @ yx.T)
    n = k.shape[0]
    if np.any(np.diag(k) <= 0):
        raise NonSeparableError("a sample has zero features")
    # with more samples than features separability is not automatic; test it before sweeping
    checked = n > x.shape[1]
    if checked and not is_separable(x, y):
        raise NonSeparableError("linear program finds no separating direction")
    rng = np.random.default_rng(seed)
    alpha = np.zeros(n)
    ka = np.zeros(n)
    epochs = 0
    done = None
    while epochs < max_epochs:
        perms = np.stack([rng.permutation(n) for _ in range(SWEEPS_PER_ROUND)])
        _cd_sweeps(k, alpha, ka, perms)
        epochs += SWEEPS_PER_ROUND
        if alpha.sum() > 1e10:
            raise NonSeparableError("dual variables diverge; data are not separable")
        if kkt_violation(alpha, ka) <= KKT_TOL:
            done = (alpha, ka)
            break
        done = _polish(k, alpha, ka)
        if done is not None:
            break
        if not checked and epochs >= SEPARABILITY_CHECK_EPOCH:
            checked = True
            if not is_separable(x, y):
                raise NonSeparableError("linear program finds no separating direction")
    converged = done is not None
    if converged:
        alpha, ka = done
    ka = k @ alpha  # refresh accumulated round-off
    theta = yx.T @ alpha
    norm = np.linalg.norm(theta)
    if not norm > 0:
        raise NonSeparableError("zero primal vector")
    direction = theta / norm
    margin = float((yx @ direction).min())
    if margin <= 0:
        raise NonSeparableError("no positive margin reached")
    return MaxMarginSolution(direction, margin, alpha.copy(), epochs, converged,
                             kkt_violation(alpha, ka), duality_gap(alpha, ka))


def max_margin(dataset, seed: int = 0) -> MaxMarginSolution:
    """Max-margin classifier of a :class:`Dataset`."""
    return max_margin_xy(dataset.features, dataset.labels, seed)


def _log_losses(m):
    """log(log(1 + exp(-m))) elementwise, stable for large margins."""
    out = np.empty_like(m)
    big = m > 30.0
    out[big] = -m[big] + np.log1p(-0.5 * np.exp(-m[big]))
    out[~big] = np.log(np.log1p(np.exp(-m[~big])))
    return out


def logistic_direction(dataset, steps: int = 100_000, step_size: float = 0.5,
                       backtracking: bool = True, normalized: bool = True,
                       return_losses: bool = False):
    """Direction reached by gradient descent on the logistic loss.

    With ``normalized=True`` the step is divided by the current loss (a
    gradient step on the log of the loss), which speeds up the slow drift of
    the direction toward the max-margin one. ``backtracking`` halves the step
    until the loss does not increase. All loss bookkeeping is done in log
    space so separable data do not underflow.

    With ``return_losses`` the log-loss trajectory is returned as well.
    """
    x = np.asarray(dataset.features, dtype=float)
    yx = np.asarray(dataset.labels, dtype=float)[:, None] * x
    n = yx.shape[0]

    def evaluate(theta):
        m = yx @ theta
        ll = _log_losses(m)
        top = ll.max()
        log_loss = top + np.log(np.exp(ll - top).sum()) - np.log(n)
        lw = -np.logaddexp(0.0, m)          # log sigmoid(-m)
        if normalized:
            # gradient of log(loss): weights relative to the loss itself
            direction = -(yx.T @ np.exp(lw - top)) / np.exp(ll - top).sum()
        else:
            direction = -(yx.T @ np.exp(lw)) / n
        return log_loss, direction

    theta = np.zeros(x.shape[1])
    log_loss, grad = evaluate(theta)
    losses = [log_loss]
    eta = step_size
    for _ in range(steps):
        cand = theta - eta * grad
        c_loss, c_grad = evaluate(cand)
        if backtracking:
            tries = 0
            while c_loss > log_loss and tries < 50:
                eta *= 0.5
                cand = theta - eta * grad
                c_loss, c_grad = evaluate(cand)
                tries += 1
            if c_loss > log_loss:
                break
        theta, log_loss, grad = cand, c_loss, c_grad
        losses.append(log_loss)
    direction = theta / np.linalg.norm(theta)
    return (direction, np.array(losses)) if return_losses else direction
