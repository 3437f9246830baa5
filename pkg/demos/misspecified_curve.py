"""Test error when the learner sees only part of the relevant features.

With p0/n -> psi0 relevant coordinates, adding features helps until
psi = psi0 and hurts afterwards.
"""
import numpy as np

from maxmargin import LabelModel, misspecified_prediction, psi_star_misspecified

BETA, PSI0 = 8.0, 2.0


def main():
    base = LabelModel.logistic(BETA)
    lo = psi_star_misspecified(base, PSI0)
    print(f"separable above psi*_miss = {lo:.4f}; signal fully observed at psi0 = {PSI0}")
    grid = np.r_[np.linspace(lo * 1.05, PSI0, 8), np.linspace(PSI0, 4 * PSI0, 8)[1:]]
    best = None
    for psi in grid:
        pred = misspecified_prediction(base, PSI0, psi)
        if best is None or pred.err_star < best[1]:
            best = (psi, pred.err_star)
        mark = "  <- psi0" if abs(psi - PSI0) < 1e-12 else ""
        print(f"psi = {psi:6.3f}  gamma = {min(psi / PSI0, 1):.3f}  kappa* = {pred.kappa_star:7.4f}"
              f"  Err* = {pred.err_star:.4f}{mark}")
    print(f"lowest error on the grid at psi = {best[0]:.3f}")


if __name__ == "__main__":
    main()
