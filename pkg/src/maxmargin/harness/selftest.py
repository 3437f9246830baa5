"""Quick invariant battery run by ``maxmargin selftest``."""
from __future__ import annotations

import time

import numpy as np
from scipy.integrate import quad

from ..asymptotics import kappa_star, kappa_star_isotropic_direct, psi_star_0, t_value
from ..fkappa import FkappaKernel, inner_positive_part_sq
from ..labels import LabelModel, q_error
from ..measures import ActivationCoeffs, SpectralMeasure, activation_coeffs, relu, rf_model
from ..quadrature import gauss_hermite, mp_rule
from ..simulation.datasets import sample_isotropic
from ..simulation.maxmargin import max_margin


def _check_threshold():
    v = psi_star_0(LabelModel.pure_noise())
    return abs(v - 0.5) <= 1e-6, f"psi*(0) pure noise = {v:.10f}"


def _check_quadrature():
    gh = gauss_hermite(64)
    m4 = gh.integrate(lambda x: x**4)
    mp = mp_rule(0.5)
    m1 = mp.integrate(lambda x: x)
    ok = abs(m4 - 3) < 1e-12 and abs(m1 - 1) < 1e-12
    return ok, f"E G^4 = {m4:.15f}, MP mean = {m1:.15f}"


def _check_gradient():
    kern = FkappaKernel(LabelModel.logistic(2.0))
    k, c1, c2, h = 0.5, 0.3, 0.8, 1e-6
    e = kern(k, c1, c2)
    fd1 = (kern(k, c1 + h, c2).value - kern(k, c1 - h, c2).value) / (2 * h)
    fd2 = (kern(k, c1, c2 + h).value - kern(k, c1, c2 - h).value) / (2 * h)
    euler = k * e.d_kappa + c1 * e.d_c1 + c2 * e.d_c2
    err = max(abs(fd1 - e.d_c1), abs(fd2 - e.d_c2), abs(euler - e.value))
    return err < 1e-6, f"max gradient/Euler deviation = {err:.2e}"


def _check_inner():
    v = inner_positive_part_sq(1.0, 1.0)
    ref = quad(lambda x: (1.0 + x) ** 2 * np.exp(-0.5 * x * x), -1.0, np.inf)[0] / np.sqrt(2 * np.pi)
    return abs(v - ref) < 1e-10, f"E (1 + G)_+^2 = {v:.10f} (adaptive quadrature {ref:.10f})"


def _check_routes():
    m = LabelModel.logistic(2.0)
    a = kappa_star(m, SpectralMeasure.isotropic(), 3.0).kappa_star
    b = kappa_star_isotropic_direct(m, 3.0).kappa_star
    return abs(a - b) < 1e-4, f"fixed point {a:.8f} vs direct {b:.8f}"


def _check_t_monotone():
    m, mu = LabelModel.logistic(1.0), SpectralMeasure.isotropic()
    ts = [t_value(m, mu, 3.0, k) for k in (0.5, 1.0, 1.5)]
    ok = ts[0] < ts[1] < ts[2]
    return ok, "T(3, kappa) at kappa = 0.5, 1, 1.5: " + ", ".join(f"{t:.4f}" for t in ts)


def _check_activation_invariance():
    relu_c = activation_coeffs(relu)
    other = ActivationCoeffs(0.0, relu_c.gamma1, relu_c.gamma_star)
    base = LabelModel.logistic(4.0)
    p1 = kappa_star(*reversed(rf_model(2.0, relu_c.centered(), base)), 1.0)
    p2 = kappa_star(*reversed(rf_model(2.0, other, base)), 1.0)
    ok = p1.kappa_star == p2.kappa_star and p1.err_star == p2.err_star
    return ok, f"kappa* {p1.kappa_star!r} vs {p2.kappa_star!r}"


def _check_solver():
    ds = sample_isotropic(60, 120, 1.0, 3)
    a = max_margin(ds)
    perm = np.random.default_rng(0).permutation(ds.n)
    b = max_margin(type(ds)(ds.features[perm], ds.labels[perm], *_rest(ds)))
    ok = (a.duality_gap <= 1e-6 and a.kkt_violation <= 1e-8
          and abs(a.margin - b.margin) < 1e-10 and np.abs(a.direction - b.direction).max() < 1e-8)
    return ok, f"gap {a.duality_gap:.1e}, KKT {a.kkt_violation:.1e}, permuted margin diff {abs(a.margin - b.margin):.1e}"


def _rest(ds):
    return (ds.generator, ds.sigma, ds.theta_star, ds.rho_n, ds.base_model, ds.signal_cross, ds.seed)


def _check_q_error():
    m = LabelModel.logistic(8.0)
    ok = abs(q_error(m, 0.0) - 0.5) < 1e-12 and q_error(m, 1.0) < q_error(m, 0.5)
    return ok, f"Q(0) = {q_error(m, 0.0):.12f}, Q(1) = {q_error(m, 1.0):.6f}"


CHECKS = [
    ("interpolation threshold", _check_threshold),
    ("quadrature moments", _check_quadrature),
    ("closed-form inner expectation", _check_inner),
    ("F gradient and Euler identity", _check_gradient),
    ("T monotone in kappa", _check_t_monotone),
    ("fixed point vs direct isotropic route", _check_routes),
    ("activation invariance", _check_activation_invariance),
    ("max-margin KKT and permutation invariance", _check_solver),
    ("test error endpoints", _check_q_error),
]


def run_selftest(out=print) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, msg = fn()
        except Exception as exc:  # report and continue with the battery
            ok, msg = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {name}: {msg} ({time.perf_counter() - t0:.2f}s)")
    return all_ok
