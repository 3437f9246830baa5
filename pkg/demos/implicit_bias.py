"""Gradient descent on the logistic loss drifts toward the max-margin direction.

Plain gradient descent gets there at a logarithmic rate; dividing the step
by the current loss (normalized descent) makes the drift fast.
"""
from maxmargin.simulation import logistic_direction, max_margin, sample_isotropic


def main():
    ds = sample_isotropic(50, 100, 1.0, 0)
    target = max_margin(ds).direction
    print(f"{'steps':>7} {'plain GD':>10} {'normalized':>10}")
    for steps in (10, 100, 1000, 10_000):
        plain = logistic_direction(ds, steps=steps, normalized=False) @ target
        fast = logistic_direction(ds, steps=steps) @ target
        print(f"{steps:>7} {plain:10.6f} {fast:10.6f}")


if __name__ == "__main__":
    main()
