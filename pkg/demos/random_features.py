"""Random-features classification: Gaussian-equivalent predictions, simulations and the wide limit.

Nonlinear ReLU features at d = 100 are compared with the predictions of the
noisy linear surrogate; the last block shows how the margin approaches the
psi1 -> infinity limit.
"""
import math

import numpy as np

from maxmargin import LabelModel, activation_coeffs, kappa_star, rf_model, wide_limit
from maxmargin.measures import relu
from maxmargin.simulation import max_margin, mc_test_error, sample_rf

D, PSI2, BETA = 100, 2.0, 4.0


def main():
    coeffs = activation_coeffs(relu).centered()
    base = LabelModel.logistic(BETA)
    print(f"ReLU: gamma1 = {coeffs.gamma1:.4f}, gamma_star = {coeffs.gamma_star:.4f}")
    print(f"{'psi1':>5} {'kappa*':>8} {'kappa_n':>8} {'Err*':>7} {'Err_n':>7}")
    for psi1 in (1.0, 2.0, 4.0):
        mu, model = rf_model(psi1, coeffs, base)
        pred = kappa_star(model, mu, psi1 / PSI2)
        ks, es = [], []
        for seed in range(5):
            ds = sample_rf(int(PSI2 * D), int(psi1 * D), D, BETA, seed, nonlinear=True)
            sol = max_margin(ds)
            ks.append(sol.margin)
            es.append(mc_test_error(ds, sol.direction, seed=seed)[0])
        print(f"{psi1:5.1f} {pred.kappa_star:8.4f} {np.mean(ks):8.4f} {pred.err_star:7.4f} "
              f"{np.mean(es):7.4f}")

    wl = wide_limit(PSI2, coeffs, base)
    print(f"\nwide limit at psi2 = {PSI2}: kappa_bar = {wl.kappa_bar_wide:.4f}, "
          f"Err = {wl.err_wide:.4f}")
    for psi1 in (5.0, 20.0, 80.0):
        mu, model = rf_model(psi1, coeffs, base)
        pred = kappa_star(model, mu, psi1 / PSI2)
        print(f"  psi1 = {psi1:5.1f}: kappa*/sqrt(psi) = "
              f"{pred.kappa_star / math.sqrt(psi1 / PSI2):.4f}, Err* = {pred.err_star:.4f}")


if __name__ == "__main__":
    main()
