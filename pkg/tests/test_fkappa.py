import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.integrate import quad
from scipy.special import expit

from maxmargin.errors import DegenerateModelError
from maxmargin.fkappa import FkappaKernel, f_kappa, f_value, inner_positive_part_sq
from maxmargin.labels import LabelModel

MODELS = [LabelModel.logistic(1.0), LabelModel.logistic(8.0), LabelModel.pure_noise(),
          LabelModel.misspecified(LabelModel.logistic(4.0), 0.5)]


def test_inner_examples():
    assert inner_positive_part_sq(0.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert inner_positive_part_sq(1.0, 0.0) == 1.0
    assert inner_positive_part_sq(-1.0, 0.0) == 0.0
    ref = quad(lambda z: (1 - z) ** 2 * np.exp(-z * z / 2) / np.sqrt(2 * np.pi), -np.inf, 1)[0]
    assert inner_positive_part_sq(1.0, 1.0) == pytest.approx(ref, abs=1e-12)
    assert inner_positive_part_sq(1.0, 1.0) == pytest.approx(1.92459, abs=1e-4)


@given(st.floats(-5, 5), st.floats(0.01, 5))
def test_inner_matches_adaptive_quadrature(a, c):
    hi = min(a / c, 15.0)
    ref = quad(lambda z: (a - c * z) ** 2 * np.exp(-z * z / 2) / np.sqrt(2 * np.pi),
               -15.0, hi, epsabs=1e-13, limit=200)[0] if hi > -15 else 0.0
    assert abs(inner_positive_part_sq(a, c) - ref) < 1e-9 * max(1.0, ref)


@pytest.mark.parametrize("model", MODELS)
def test_no_margin_no_coefficients(model):
    assert f_kappa(model, 1.0, 0.0, 0.0).value == pytest.approx(1.0, abs=1e-14)


def test_pure_noise_value():
    assert f_kappa(LabelModel.pure_noise(), 0.0, 0.0, 1.0).value == pytest.approx(np.sqrt(0.5), abs=1e-14)


@pytest.mark.property
def test_monte_carlo_and_finite_differences():
    model = LabelModel.logistic(2.0)
    k, c1, c2 = 0.5, 0.3, 0.8
    ev = f_kappa(model, k, c1, c2)
    assert isinstance(ev.value, float)
    rng = np.random.default_rng(0)
    n = 4_000_000
    g, z = rng.standard_normal(n), rng.standard_normal(n)
    y = np.where(rng.random(n) < expit(2.0 * g), 1.0, -1.0)
    v = np.maximum(k - c1 * y * g - c2 * z, 0.0) ** 2
    mean, se = v.mean(), v.std() / np.sqrt(n)
    # delta method for the square root
    assert abs(ev.value - np.sqrt(mean)) < 3 * se / (2 * np.sqrt(mean))
    h = 1e-4
    fd1 = (f_value(model, k, c1 + h, c2) - f_value(model, k, c1 - h, c2)) / (2 * h)
    fd2 = (f_value(model, k, c1, c2 + h) - f_value(model, k, c1, c2 - h)) / (2 * h)
    assert abs(ev.d_c1 - fd1) < 1e-5 and abs(ev.d_c2 - fd2) < 1e-5


PROBES = [(k, c1, c2) for k in (0.0, 0.4, 1.5) for c1 in (-1.2, 0.0, 0.7) for c2 in (1e-3, 0.3, 2.0)]


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.property
def test_gradient_relative_accuracy(model):
    kern = FkappaKernel(model)
    h = 1e-6
    for k, c1, c2 in PROBES:
        e = kern(k, c1, c2)
        for name, idx in (("d_c1", 1), ("d_c2", 2), ("d_kappa", 0)):
            args_p = [k, c1, c2]
            args_m = [k, c1, c2]
            args_p[idx] += h
            args_m[idx] -= h
            fd = (kern(*args_p).value - kern(*args_m).value) / (2 * h)
            an = getattr(e, name)
            assert abs(an - fd) <= 1e-6 * max(abs(fd), 1e-2), (model.kind, k, c1, c2, name)


def test_c2_zero_one_sided_derivative():
    kern = FkappaKernel(LabelModel.logistic(2.0))
    e = kern(0.3, 0.9, 0.0)
    assert e.d_c2 == 0.0
    h = 1e-7
    assert abs((kern(0.3, 0.9, h).value - e.value) / h) < 1e-5


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.property
def test_euler_identity(model):
    kern = FkappaKernel(model)
    for k, c1, c2 in PROBES:
        e = kern(k, c1, c2)
        assert abs(k * e.d_kappa + c1 * e.d_c1 + c2 * e.d_c2 - e.value) < 1e-12


@pytest.mark.property
@given(st.floats(0.0, 3.0), st.floats(-3, 3), st.floats(0.0, 3.0), st.sampled_from([0.5, 2.0, 10.0]))
def test_homogeneity(k, c1, c2, alpha):
    assume(max(k, abs(c1), c2) > 1e-3)
    model = LabelModel.logistic(3.0)
    base = f_value(model, k, c1, c2)
    scaled = f_value(model, alpha * k, alpha * c1, alpha * c2)
    assert abs(scaled - alpha * base) <= 1e-12 * alpha * base


@given(st.floats(0.1, 2.0))
def test_d_c2_nonnegative(k):
    kern = FkappaKernel(LabelModel.logistic(1.0))
    for c1 in (-2.0, 0.0, 2.0):
        for c2 in (0.0, 0.5, 3.0):
            assert kern(k, c1, c2).d_c2 >= 0


@pytest.mark.property
def test_strict_convexity():
    rng = np.random.default_rng(1)
    for model in MODELS:
        kern = FkappaKernel(model)
        for _ in range(100):
            k = rng.uniform(0.05, 2.0)
            p = np.array([rng.normal(), abs(rng.normal())])
            q = np.array([rng.normal(), abs(rng.normal())])
            mid = 0.5 * (p + q)
            lhs = 0.5 * (kern(k, *p).value + kern(k, *q).value)
            assert lhs - kern(k, *mid).value > 1e-12


@pytest.mark.property
def test_strictly_increasing_in_kappa():
    for model in MODELS:
        kern = FkappaKernel(model)
        for c1, c2 in ((0.0, 1.0), (1.0, 0.2), (-0.5, 2.0)):
            vals = [kern(k, c1, c2).value for k in np.linspace(-1, 3, 21)]
            assert np.all(np.diff(vals) > 0)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        f_kappa(LabelModel.logistic(1.0), 0.5, 0.1, -0.1)
    with pytest.raises(DegenerateModelError):
        f_kappa(LabelModel.logistic(1.0), 0.0, 0.0, 0.0)


def test_second_partials_step_stability():
    kern = FkappaKernel(LabelModel.logistic(2.0))
    a = kern.second_partials(0.5, 0.4, 0.3, step=1e-4)
    b = kern.second_partials(0.5, 0.4, 0.3, step=1e-5)
    assert np.allclose(a, b, atol=1e-4)
