"""Margin and test error of the max-margin classifier on isotropic data.

Prints the asymptotic curve next to a handful of finite-p replicates.
Run with ``python demos/isotropic_double_descent.py``; takes a few seconds.
"""
import numpy as np

from maxmargin import LabelModel, SpectralMeasure, kappa_star, psi_star_0
from maxmargin.simulation import exact_test_error, max_margin, sample_isotropic

P = 400
SEEDS = range(5)


def main():
    mu = SpectralMeasure.isotropic()
    for beta in (1.0, 8.0):
        model = LabelModel.logistic(beta)
        thr = psi_star_0(model)
        print(f"\nbeta = {beta}: data become separable at psi*(0) = {thr:.4f}")
        print(f"{'psi':>6} {'kappa*':>8} {'kappa_n':>8} {'Err*':>7} {'Err_n':>7}")
        for psi in (1.0, 1.5, 2.0, 3.0, 4.0, 6.0):
            pred = kappa_star(model, mu, psi)
            n = round(P / psi)
            ks, es = [], []
            for seed in SEEDS:
                ds = sample_isotropic(n, P, beta, seed)
                sol = max_margin(ds)
                ks.append(sol.margin)
                es.append(exact_test_error(ds, sol.direction))
            print(f"{psi:6.2f} {pred.kappa_star:8.4f} {np.mean(ks):8.4f} "
                  f"{pred.err_star:7.4f} {np.mean(es):7.4f}")
    # far above threshold the margin approaches sqrt(psi) and the error approaches 1/2
    far = kappa_star(LabelModel.logistic(1.0), mu, 100.0)
    print(f"\npsi = 100, beta = 1: kappa*/sqrt(psi) = {far.kappa_star / 10:.4f}, "
          f"Err* = {far.err_star:.4f}")


if __name__ == "__main__":
    main()
