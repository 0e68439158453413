import numpy as np
import pytest
import sympy as sp

from artifact.field import (
    constant_potential,
    criticality_residual,
    example1_potential,
    example2_potential,
    field_from_expression,
    hypothesis_report,
    pull_back,
)
from artifact.geometry import FermiChart, from_graph, hyperbola_graph, line_graph

# Closed form of the second example potential at omega = 1/2 (sympy, exact):
# a(1) = sqrt(1.25) / sqrt(1.25 - 0.25).
A2_AT_ONE = 1.118033988749895
# d_zz a / a - 2 k^2 at the vertex of the hyperbola, from a''(1) / a(1) - 2 (1/4)^2.
Q2_AT_ZERO = 0.8125


def _reciprocal_potential(omega: float):
    """``1 / a`` for the second example potential; stationary on the hyperbola graph."""
    c = 1.0 + omega ** 2
    return field_from_expression(f"sqrt({c}*y**2 - {omega**2}) / (sqrt({c}) * y)", name="reciprocal",
                                 alpha_decay=2.0)


def _weighted_length(field, curve, tau: float, bump, x_half: float = 8.0, nodes: int = 400) -> float:
    """``int a(gamma + tau bump nu) |d/dx (gamma + tau bump nu)| dx`` by Gauss-Legendre over the bump support."""
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    x = x_half * xg
    step = 1e-6

    def point(xx):
        fr = curve.frame(curve.s_of_x(xx))
        return fr["gamma"] + tau * bump(xx)[:, None] * fr["normal"]

    P = point(x)
    speed = np.linalg.norm(point(x + step) - point(x - step), axis=-1) / (2 * step)
    return float(x_half * np.sum(wg * field.value(P[:, 0], P[:, 1]) * speed))


def test_field_partials_against_sympy():
    f = field_from_expression("exp(x) * sin(y) + x**3 * y")
    x, y = 0.3, -0.7
    X, Y = sp.symbols("x y")
    expr = sp.exp(X) * sp.sin(Y) + X ** 3 * Y
    for i, j in [(0, 0), (1, 0), (0, 1), (2, 1), (1, 3), (0, 4)]:
        ref = float(sp.diff(expr, X, i, Y, j).subs({X: x, Y: y})) if i + j else float(expr.subs({X: x, Y: y}))
        assert float(f.partial(i, j, x, y)) == pytest.approx(ref, abs=1e-12)
    with pytest.raises(ValueError):
        f.partial(3, 2, x, y)


def test_multilinear_matches_hessian():
    f = field_from_expression("x**2 * y + y**3")
    v = np.array([0.6, 0.8])
    w = np.array([1.0, -2.0])
    H = f.hess(0.5, 1.5)
    assert float(f.multilinear(0.5, 1.5, [v, w])) == pytest.approx(v @ H @ w, abs=1e-12)


def test_example1_potential_values():
    a = example1_potential(alpha=1.0)
    x = np.linspace(-50.0, 50.0, 101)
    assert np.all(a.value(x, 0.0) == 1.0)
    assert np.all(a.partial(0, 1, x, 0.0) == 0.0)
    assert float(a.partial(0, 2, 0.0, 0.0)) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ValueError):
        example1_potential(alpha=0.0)


def test_example1_smoothing_stays_within_eta_of_abs():
    for eta in (0.01, 1.0):
        a = example1_potential(alpha=1.0, eta=eta)
        x = np.linspace(-30.0, 30.0, 601)
        r = (2.0 / a.partial(0, 2, x, 0.0)) ** (1.0 / 3.0) - 1.0
        assert np.all(r <= np.abs(x) + 1e-12) and np.all(r >= np.abs(x) - eta - 1e-12)


def test_example2_potential_values():
    a = example2_potential(0.5)
    assert float(a.value(0.0, 1.0)) == pytest.approx(A2_AT_ONE, abs=1e-14)
    assert float(a.value(3.0, 1e6)) == pytest.approx(1.0, abs=1e-9)
    y = np.linspace(-2.0, 5.0, 701)
    vals = a.value(0.0, y)
    assert np.all(vals > 0) and np.all(np.diff(vals) <= 1e-12)
    assert np.all(a.partial(1, 0, 0.3, y) == 0.0)


def test_example2_blend_is_c2():
    a = example2_potential(0.5)
    yb = a.params["y_blend"]
    for j in range(3):
        lo, hi = a.partial(0, j, 0.0, yb - 1e-9), a.partial(0, j, 0.0, yb + 1e-9)
        assert float(lo) == pytest.approx(float(hi), abs=1e-6)


def test_example2_refuses_large_omega():
    with pytest.raises(ValueError, match="omega"):
        example2_potential(0.9)
    example2_potential(1.0 / np.sqrt(2.0))


def test_pulled_back_partials_constant_field():
    chart = FermiChart(from_graph(hyperbola_graph(0.5)))
    pp = pull_back(constant_potential(1.0), chart)
    p = pp.partials(np.array([0.0, 2.0]), np.array([0.1, -0.1]))
    assert np.all(p["a"] == 1.0)
    for key in ("a_s", "a_z", "a_ss", "a_sz", "a_zz", "a_zzz", "a_zzzz"):
        assert np.all(p[key] == 0.0)


def test_pulled_back_example1_on_axis():
    a = example1_potential()
    s = np.linspace(-10.0, 10.0, 21)
    for orientation in ("negative", "positive"):
        pp = pull_back(a, FermiChart(from_graph(line_graph(), orientation)))
        oc = pp.on_curve(s)
        assert np.all(oc["a0"] == 1.0)
        assert np.all(pp.partials(s, 0.0)["a_z"] == 0.0)
        assert float(pp.on_curve(np.array([0.0]))["q_tt"][0]) == pytest.approx(2.0, abs=1e-14)


def test_pulled_back_partials_by_differences():
    chart = FermiChart(from_graph(hyperbola_graph(0.5)))
    pp = pull_back(example2_potential(0.5), chart)
    s, z, h = 0.7, 0.05, 1e-4
    p = pp.partials(np.array(s), np.array(z))

    def a(ss, zz):
        return float(pp.partials(np.array(ss), np.array(zz))["a"])

    assert float(p["a_s"]) == pytest.approx((a(s + h, z) - a(s - h, z)) / (2 * h), abs=1e-7)
    assert float(p["a_z"]) == pytest.approx((a(s, z + h) - a(s, z - h)) / (2 * h), abs=1e-7)
    assert float(p["a_ss"]) == pytest.approx((a(s + h, z) - 2 * a(s, z) + a(s - h, z)) / h ** 2, abs=1e-5)
    assert float(p["a_sz"]) == pytest.approx(
        (a(s + h, z + h) - a(s + h, z - h) - a(s - h, z + h) + a(s - h, z - h)) / (4 * h * h), abs=1e-5)


def test_example2_Q_at_vertex_matches_chain_rule_oracle():
    pp = pull_back(example2_potential(0.5), FermiChart(from_graph(hyperbola_graph(0.5))))
    assert float(pp.on_curve(np.array([0.0]))["Q"][0]) == pytest.approx(Q2_AT_ZERO, abs=1e-12)


def test_criticality_examples():
    s = np.linspace(-100.0, 100.0, 2001)
    ex1 = pull_back(example1_potential(), FermiChart(from_graph(line_graph())))
    assert criticality_residual(ex1, s).sup == 0.0
    flat = pull_back(constant_potential(), FermiChart(from_graph(line_graph())))
    assert criticality_residual(flat, s).sup == 0.0


def test_reciprocal_potential_is_stationary_on_hyperbola():
    pp = pull_back(_reciprocal_potential(0.5), FermiChart(from_graph(hyperbola_graph(0.5))))
    assert criticality_residual(pp, np.linspace(-100.0, 100.0, 2001)).sup < 1e-8


@pytest.mark.parametrize("which", ["example2", "reciprocal"])
def test_criticality_residual_is_the_first_variation(which):
    field = example2_potential(0.5) if which == "example2" else _reciprocal_potential(0.5)
    curve = from_graph(hyperbola_graph(0.5))
    pp = pull_back(field, FermiChart(curve))
    bump = lambda x: np.exp(-np.asarray(x) ** 2)  # noqa: E731
    tau = 1e-3
    dL = (_weighted_length(field, curve, tau, bump) - _weighted_length(field, curve, -tau, bump)) / (2 * tau)
    s = np.linspace(-12.0, 12.0, 4801)
    r = criticality_residual(pp, s).r
    predicted = np.trapezoid(r * bump(curve.x_of_s(s)), s)
    # central difference in tau carries an O(tau^2) error
    assert dL == pytest.approx(predicted, rel=1e-5, abs=1e-6)
    if which == "example2":
        assert abs(dL) > 0.5


def test_hypothesis_report_examples():
    rep1 = hypothesis_report(example1_potential(), FermiChart(from_graph(line_graph())))
    assert rep1.all_pass
    rep2 = hypothesis_report(example2_potential(0.5), FermiChart(from_graph(hyperbola_graph(0.5))))
    for name in ("bounds", "curve_decay", "nonparallelism", "field_decay"):
        assert rep2.by_name(name).passed
    assert rep2.by_name("field_decay").measured["alpha"] == 2.0
    assert rep2.by_name("field_decay").measured["alpha_fitted"] == pytest.approx(2.0, abs=0.1)
    with pytest.raises(KeyError):
        rep2.by_name("missing")
