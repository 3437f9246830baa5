"""Test error, coordinate laws and distribution distances for simulated classifiers."""
from __future__ import annotations

import numpy as np
from scipy.stats import ks_2samp

from ..labels import q_error
from ..quadrature import DEFAULT_NUMERICS


def sigma_cosine(dataset, direction) -> float:
    """Correlation between ``<direction, x>`` and the label score ``g``."""
    var = dataset.sigma.quad(direction)
    if not var > 0:
        raise ValueError("direction has zero norm")
    return float(direction @ dataset.signal_cross) / np.sqrt(var)


def exact_test_error(dataset, direction, numerics=DEFAULT_NUMERICS) -> float:
    """Test error of the rule ``sign(<direction, x>)`` for Gaussian features.

    For random-features data with a nonlinear activation this is the error
    under the Gaussian-equivalent covariance, not the true test error; use
    :func:`mc_test_error` for the latter.
    """
    nu = float(np.clip(sigma_cosine(dataset, direction), -1.0, 1.0))
    return q_error(dataset.base_model, nu, numerics)


def mc_test_error(dataset, direction, n_test: int = 20_000, seed: int = 0,
                  chunk: int = 5_000) -> tuple[float, float]:
    """Monte Carlo test error for random-features data.

    Fresh inputs are drawn; the label is integrated out analytically
    (``P(error | z)`` is used instead of a sampled label), which lowers the
    variance. Returns ``(error, standard_error)``.
    """
    ex = dataset.extras
    w, beta_star = ex["w"], ex["beta_star"]
    rng = np.random.default_rng(seed)
    vals = []
    for start in range(0, n_test, chunk):
        m = min(chunk, n_test - start)
        z = rng.standard_normal((m, w.shape[1]))
        pre = z @ w.T
        if dataset.generator == "rf_nonlinear":
            x = ex["sigma"](pre) - ex["coeffs"].gamma0
        else:
            c = ex["coeffs"]
            x = c.gamma1 * pre + c.gamma_star * rng.standard_normal(pre.shape)
        score = x @ direction
        prob_pos = dataset.base_model.flip(z @ beta_star)
        vals.append(np.where(score > 0, 1.0 - prob_pos, prob_pos))
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def test_error(dataset, direction, n_test: int = 20_000, seed: int = 0) -> float:
    """Exact error for Gaussian data, Monte Carlo error for nonlinear features."""
    if dataset.sigma.exact:
        return exact_test_error(dataset, direction)
    return mc_test_error(dataset, direction, n_test, seed)[0]


def empirical_coordinate_law(dataset, solution):
    """Triples ``(lambda_i, wbar_i, sqrt(p) <theta_hat, v_i>)`` over the eigenbasis of Sigma."""
    direction = getattr(solution, "direction", solution)
    lam, vecs = dataset.sigma.eigh()
    p = dataset.p
    wbar = np.sqrt(p * lam) * (vecs.T @ dataset.theta_star) / dataset.rho_n
    coords = np.sqrt(p) * (vecs.T @ direction)
    return lam, wbar, coords


def sliced_ks(sample_a, sample_b, n_slices: int = 16, seed: int = 0) -> float:
    """Largest two-sample Kolmogorov-Smirnov statistic over random 1-d projections.

    Samples are arrays of shape (m, k). The coordinate axes are always
    included among the projections.
    """
    a = np.atleast_2d(np.asarray(sample_a, dtype=float))
    b = np.atleast_2d(np.asarray(sample_b, dtype=float))
    k = a.shape[1]
    rng = np.random.default_rng(seed)
    dirs = [np.eye(k)[j] for j in range(k)]
    for _ in range(n_slices):
        v = rng.standard_normal(k)
        dirs.append(v / np.linalg.norm(v))
    stat = 0.0
    for v in dirs:
        pa, pb = a @ v, b @ v
        if np.ptp(pa) == 0 and np.ptp(pb) == 0:
            continue
        stat = max(stat, ks_2samp(pa, pb).statistic)
    return float(stat)


def mean_sem(values):
    """Mean and standard error of the mean."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    sem = v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else 0.0
    return float(v.mean()), float(sem)
