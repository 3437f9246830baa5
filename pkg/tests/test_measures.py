import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxmargin.errors import PurelyLinearActivationError
from maxmargin.labels import LabelModel
from maxmargin.measures import (ActivationCoeffs, SpectralMeasure, activation_coeffs,
                                matched_activation, mp_spectrum, relu, rf_model, rf_tau, sample_mp)
from maxmargin.simulation.datasets import rf_effective_quantities

RELU = activation_coeffs(relu)


def test_isotropic_normalization():
    mu = SpectralMeasure.isotropic()
    assert mu.expect(lambda x, w2: w2) == 1.0
    assert mu.zeta == 1.0 and mu.omega == 0.0 and mu.rho == 1.0


def test_rf_total_mass():
    mu = SpectralMeasure.rf_gaussian_equiv(2.0, 0.5, 0.3014)
    assert abs(mu.expect(lambda x, w2: np.ones_like(x)) - 1.0) < 1e-12
    assert abs(mu.expect(lambda x, w2: w2) - 1.0) < 1e-8


def test_rf_mean_eigenvalue_against_sampled_spectra():
    g1, gs = 0.5, 0.3014
    mu = SpectralMeasure.rf_gaussian_equiv(2.0, g1, gs)
    rng = np.random.default_rng(0)
    d, p = 500, 1000
    means = []
    for _ in range(5):
        w = rng.standard_normal((p, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        ev = g1**2 * np.linalg.eigvalsh(w @ w.T) + gs**2
        means.append(ev.mean())
    se = max(np.std(means, ddof=1) / np.sqrt(5), 1e-12)
    assert abs(mu.expect(lambda x, w2: x) - np.mean(means)) < max(3 * se, 1e-10)
    # second moment, which does depend on the spectrum shape
    m2 = []
    for _ in range(3):
        w = rng.standard_normal((p, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        m2.append(((g1**2 * np.linalg.eigvalsh(w @ w.T) + gs**2) ** 2).mean())
    assert abs(mu.expect(lambda x, w2: x * x) - np.mean(m2)) < 0.005


def test_relu_coefficients():
    assert RELU.gamma0 == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-12)
    assert RELU.gamma1 == pytest.approx(0.5, abs=1e-12)
    assert RELU.gamma_star**2 == pytest.approx(0.5 - 0.25 - 1 / (2 * np.pi), abs=1e-12)
    c = activation_coeffs(lambda x: relu(x) - 1 / np.sqrt(2 * np.pi))
    assert abs(c.gamma0) < 1e-12
    assert c.gamma1 == pytest.approx(0.5, abs=1e-12)
    assert c.gamma_star == pytest.approx(RELU.gamma_star, abs=1e-12)


def test_relu_coefficients_monte_carlo():
    g = np.random.default_rng(1).standard_normal(2_000_000)
    s = relu(g)
    assert abs(s.mean() - RELU.gamma0) < 4 * s.std() / np.sqrt(g.size)
    assert abs((g * s).mean() - RELU.gamma1) < 4 * (g * s).std() / np.sqrt(g.size)


def test_linear_activation_rejected():
    with pytest.raises(PurelyLinearActivationError):
        activation_coeffs(lambda x: x)
    with pytest.raises(PurelyLinearActivationError):
        activation_coeffs(lambda x: 3.0 * x + 1.0)


def test_matched_activation():
    sigma, a0, a1 = matched_activation(RELU)
    c = activation_coeffs(sigma)
    assert c.gamma1 == pytest.approx(RELU.gamma1, abs=1e-10)
    assert c.gamma_star == pytest.approx(RELU.gamma_star, abs=1e-10)
    assert abs(a1) > 0.1  # not ReLU itself


def test_tau_limits_and_monotonicity():
    assert rf_tau(1e-6, RELU) == pytest.approx(1.0, abs=1e-5)
    taus = [rf_tau(v, RELU) for v in (0.5, 1, 2, 4, 8)]
    assert np.all(np.diff(taus) < 0)
    assert all(0 < t < 1 for t in taus)


def test_tau_against_finite_n():
    rng = np.random.default_rng(2)
    d, p = 200, 400
    vals = []
    for _ in range(8):
        w = rng.standard_normal((p, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        b = rng.standard_normal(d)
        b /= np.linalg.norm(b)
        vals.append(rf_effective_quantities(w, b, RELU.gamma1, RELU.gamma_star)[2])
    assert abs(np.mean(vals) - rf_tau(2.0, RELU)) < 0.01


@pytest.mark.parametrize("psi1", [0.3, 1.0, 2.0, 7.5])
def test_rf_measure_invariants(psi1):
    c = RELU.centered()
    mu = SpectralMeasure.rf_gaussian_equiv(psi1, c.gamma1, c.gamma_star)
    assert abs(mu.expect(lambda x, w2: w2) - 1) < 1e-8
    hi = c.gamma1**2 * psi1 * (1 + psi1**-0.5) ** 2 + c.gamma_star**2
    assert mu.x.min() >= c.gamma_star**2 - 1e-15 and mu.x.max() <= hi + 1e-12
    tau = rf_tau(psi1, c)
    assert abs(mu.params["c0_sq"] - (1 - tau**2)) < 1e-10
    assert abs(mu.rho ** -2 - mu.expect(lambda x, w2: w2 / x)) < 1e-12
    zeta = mu.zeta
    omega2 = mu.expect(lambda x, w2: (1 - zeta**2 / x) ** 2 * w2)
    assert abs(mu.omega**2 - omega2) < 1e-12


def test_mp_atom_branch():
    x, m = mp_spectrum(4.0)
    assert x[0] == 0.0 and m[0] == pytest.approx(0.75)
    assert abs(m.sum() - 1) < 1e-12 and abs(m @ x - 1) < 1e-10
    x, m = mp_spectrum(0.5)
    assert x.min() > 0 and abs(m @ x - 1) < 1e-10


def test_w2_reduction_matches_2d_quadrature():
    rng = np.random.default_rng(3)
    mu = SpectralMeasure.rf_gaussian_equiv(2.0, 0.5, RELU.gamma_star)
    for _ in range(10):
        a, b, c = rng.normal(size=3)
        f = lambda x, w2: (a + b * x + c / x) * w2 + np.sin(a * x)  # noqa: E731
        assert abs(mu.expect(f) - mu.expect_full(f)) < 1e-8


def test_discrete_measure():
    mu = SpectralMeasure.discrete([(1.0, np.sqrt(2.0), 0.5), (2.0, 0.0, 0.5)])
    assert mu.expect(lambda x, w2: w2) == pytest.approx(1.0)
    assert mu.rho == pytest.approx(1.0)
    x, w = mu.sample(1000, np.random.default_rng(0))
    assert set(np.unique(x)) <= {1.0, 2.0}
    assert np.all(w[x == 2.0] == 0.0)
    with pytest.raises(ValueError):
        SpectralMeasure.discrete([(1.0, 1.0, 0.5), (2.0, 1.0, 0.2)])
    with pytest.raises(ValueError):
        SpectralMeasure.discrete([(1.0, 2.0, 1.0)])
    with pytest.raises(ValueError):
        SpectralMeasure.discrete([(-1.0, 1.0, 1.0)])


def test_serialization_roundtrip():
    for mu in (SpectralMeasure.isotropic(), SpectralMeasure.discrete([(1.5, 1.0, 1.0)]),
               SpectralMeasure.rf_gaussian_equiv(3.0, 0.5, 0.3)):
        back = SpectralMeasure.from_dict(mu.to_dict())
        assert back.kind == mu.kind
        assert np.array_equal(back.x, mu.x) and np.array_equal(back.w2, mu.w2)


@pytest.mark.parametrize("psi1", [0.5, 3.0])
def test_mp_sampler(psi1):
    rng = np.random.default_rng(4)
    s = sample_mp(psi1, 400_000, rng)
    x, m = mp_spectrum(psi1)
    for k in (1, 2):
        v = s**k
        assert abs(v.mean() - m @ x**k) < 4 * v.std() / np.sqrt(s.size)


def test_rf_model_centers_with_warning():
    base = LabelModel.logistic(2.0)
    with pytest.warns(UserWarning):
        mu1, m1 = rf_model(2.0, RELU, base)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mu2, m2 = rf_model(2.0, RELU.centered(), base)
    assert m1 == m2 and np.array_equal(mu1.x, mu2.x)
    assert m1.kind == "rf_effective" and m1.rho == mu1.rho


@given(st.floats(0.1, 10.0))
def test_measure_constants_positive(psi1):
    mu = SpectralMeasure.rf_gaussian_equiv(psi1, 0.5, 0.3)
    assert mu.zeta > 0 and mu.omega >= 0 and mu.rho > 0
    assert mu.zeta**2 <= mu.x_max() + 1e-12


def test_invalid_rf_parameters():
    with pytest.raises(ValueError):
        SpectralMeasure.rf_gaussian_equiv(0.0, 0.5, 0.3)
    with pytest.raises(ValueError):
        ActivationCoeffs(0, 0.5, 0.3) and SpectralMeasure.rf_gaussian_equiv(1.0, 0.5, 0.0)
