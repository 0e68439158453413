import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.numerics import (
    cumulative_from_left,
    cumulative_from_right,
    derivative,
    edge_band,
    fit_loglog,
    holder_quotient,
    trapezoid_weights,
    window_max,
    window_max_2d,
)


@pytest.mark.parametrize("accuracy", [2, 4, 6])
def test_derivative_order_under_refinement(accuracy):
    errs = []
    for n in (16, 32):
        x = np.linspace(0.0, 2.0, n + 1)
        dx = x[1] - x[0]
        b = edge_band(accuracy)
        e1 = np.max(np.abs(derivative(np.sin(x), dx, 1, accuracy) - np.cos(x))[b:-b])
        e2 = np.max(np.abs(derivative(np.sin(x), dx, 2, accuracy) + np.sin(x))[b:-b])
        errs.append(max(e1, e2))
    order = np.log2(errs[0] / errs[1])
    assert order == pytest.approx(accuracy, abs=0.3)


def test_derivative_exact_on_quadratics_with_edges():
    x = np.linspace(-1.0, 1.0, 41)
    y = 3.0 * x ** 2 - x + 2.0
    dx = x[1] - x[0]
    assert np.allclose(derivative(y, dx, 1), 6.0 * x - 1.0, atol=1e-10)
    assert np.allclose(derivative(y, dx, 2), 6.0, atol=1e-9)


def test_derivative_along_axis():
    x = np.linspace(0.0, 1.0, 101)
    Y = np.outer(np.arange(1.0, 4.0), x ** 2)
    d = derivative(Y, x[1] - x[0], 1, axis=1)
    assert np.allclose(d, np.outer(np.arange(1.0, 4.0), 2.0 * x), atol=1e-10)


def test_cumulative_integrals_match_antiderivative():
    x = np.linspace(0.0, np.pi, 801)
    dx = x[1] - x[0]
    left = cumulative_from_left(np.sin(x), dx)
    right = cumulative_from_right(np.sin(x), dx)
    assert np.max(np.abs(left - (1.0 - np.cos(x)))) < 1e-10
    assert np.max(np.abs(right - (np.cos(x) + 1.0))) < 1e-10
    assert left[-1] == pytest.approx(right[0], abs=1e-13)


def test_cumulative_needs_four_samples():
    with pytest.raises(ValueError):
        cumulative_from_left(np.ones(3), 0.1)


def test_trapezoid_weights_integrate_linear_exactly():
    w = trapezoid_weights(11, 0.1)
    x = np.linspace(0.0, 1.0, 11)
    assert w.sum() == pytest.approx(1.0)
    assert w @ (2.0 * x + 1.0) == pytest.approx(2.0)


def test_fit_loglog_recovers_power_law():
    x = np.array([0.2, 0.1, 0.05])
    fit = fit_loglog(x, 7.0 * x ** 3)
    assert fit.slope == pytest.approx(3.0, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(7.0))
    assert fit.monotone and not fit.exact_zero


def test_fit_loglog_exact_zero_and_nonmonotone():
    x = np.array([0.2, 0.1, 0.05])
    assert fit_loglog(x, np.zeros(3)).exact_zero
    fit = fit_loglog(x, [1.0, 2.0, 0.5])
    assert not fit.monotone
    fit = fit_loglog(x, [1.0, 0.0, 0.5], zero_tol=-1.0)
    assert np.isnan(fit.slope)


def test_window_max_radius():
    v = np.zeros(21)
    v[10] = 1.0
    out = window_max(v, 0.1, radius=0.3)
    assert np.array_equal(np.flatnonzero(out), np.arange(7, 14))


def test_window_max_2d():
    v = np.zeros((11, 11))
    v[5, 5] = 2.0
    out = window_max_2d(v, (0.5, 1.0), radius=1.0)
    assert out[3, 4] == 2.0 and out[2, 5] == 0.0 and out[5, 3] == 0.0


def test_holder_quotient_of_lipschitz_function():
    x = np.linspace(-1.0, 1.0, 401)
    q = holder_quotient(np.abs(x), x[1] - x[0], lam=1.0)
    assert np.max(q) == pytest.approx(1.0, abs=1e-12)
    # the largest dyadic offset inside the unit window is 128 samples
    q_half = holder_quotient(np.abs(x), x[1] - x[0], lam=0.5)
    assert np.max(q_half) == pytest.approx(np.sqrt(128 * (x[1] - x[0])), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-2.0, 2.0))
def test_fit_loglog_property(p, c):
    x = np.array([0.4, 0.2, 0.1, 0.05])
    fit = fit_loglog(x, np.exp(c) * x ** p)
    assert fit.slope == pytest.approx(p, abs=1e-9)
    assert fit.max_residual < 1e-9
