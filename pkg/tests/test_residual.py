import numpy as np
import pytest

from artifact.ansatz import LayerAnsatz, build_global, cutoffs_for
from artifact.field import constant_potential, criticality_residual, pull_back
from artifact.geometry import Displacement, FermiChart, dilated_chart, from_graph, hyperbola_graph
from artifact.gridfield import GridField
from artifact.numerics import fit_loglog
from artifact.residual import (
    FermiOperator,
    apply_fermi_exact,
    apply_fermi_expanded,
    column_geometry,
    euclidean_oracle,
    layer_error,
    layer_scaling_quantities,
    projection_pi,
    scaling_study,
)
from artifact.scenarios import symmetric_axis


def _ansatz(sc, eps, order=1):
    return LayerAnsatz(sc.profile, sc.psi0, sc.psi1, sc.pp, eps, order=order)


def test_v0_solves_the_equation_on_constant_line(line):
    eps = 0.1
    s = symmetric_axis(20.0, 0.5)
    t = symmetric_axis(12.0, 0.05)
    b = _ansatz(line, eps, 0).bundle(s, t)
    S = apply_fermi_exact(b, t, line.pp, column_geometry(line.curve, eps, s), line.well)
    assert np.max(np.abs(S)) < 1e-8


def test_affine_function_is_harmonic_in_fermi_coordinates():
    chart = FermiChart(from_graph(hyperbola_graph(0.5)))
    pp = pull_back(constant_potential(), chart)
    eps = 0.2
    s = symmetric_axis(10.0, 0.01)
    t = symmetric_axis(1.0, 0.01)
    dc = dilated_chart(chart, eps)
    X = dc.forward(s[:, None], t[None, :])
    v = GridField(s, t, 2.0 * X[..., 0] - 3.0 * X[..., 1] + 1.0)
    lap = apply_fermi_exact(v.bundle(), t, pp, column_geometry(chart.curve, eps, s), None)
    i, j = v.interior(4)
    assert np.max(np.abs(lap[i, j])) < 1e-6


def test_euclidean_oracle_trivial_cases():
    chart = FermiChart(from_graph(hyperbola_graph(0.5)))
    pp = pull_back(constant_potential(), chart)
    from artifact.profile import make_twin_pit

    pts = np.array([[0.3, 0.1], [-2.0, 5.0]])
    ones = euclidean_oracle(lambda p: np.ones(p.shape[:-1]), pp, 0.1, pts, 1e-2, make_twin_pit())
    assert np.all(ones == 0.0)
    sq = euclidean_oracle(lambda p: p[..., 0] ** 2, pp, 0.1, pts, 1e-2, None)
    assert np.allclose(sq, 2.0, atol=1e-9)


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_exact_operator_agrees_with_euclidean_oracle_at_second_order(name, request):
    sc = request.getfixturevalue(name)
    eps = 0.1
    an = _ansatz(sc, eps)
    s = np.linspace(-20.0, 20.0, 9)
    t = np.linspace(-3.0, 3.0, 7)
    exact = apply_fermi_exact(an.bundle(s, t), t, sc.pp, column_geometry(sc.curve, eps, s), sc.well)
    pts = dilated_chart(sc.chart, eps).forward(s[:, None], t[None, :])
    ga = build_global(an, sc.chart)
    steps = [0.05, 0.025, 0.0125]
    gaps = [np.max(np.abs(euclidean_oracle(ga.layer, sc.pp, eps, pts, h, sc.well) - exact)) for h in steps]
    assert fit_loglog(steps, gaps).slope == pytest.approx(2.0, abs=0.5)


def test_exact_operator_with_displacement_against_oracle(ex2):
    eps = 0.2
    h = Displacement.from_expression("0.3*exp(-x**2)")
    an = _ansatz(ex2, eps)
    s = np.linspace(-8.0, 8.0, 9)
    t = np.linspace(-2.0, 2.0, 5)
    exact = apply_fermi_exact(an.bundle(s, t), t, ex2.pp, column_geometry(ex2.curve, eps, s, h), ex2.well)
    dc = dilated_chart(ex2.chart, eps, h)
    pts = dc.forward(s[:, None], t[None, :])

    def v(p):
        cp = dc.inverse(p)
        return an.value(cp.s, cp.z)

    gap = np.max(np.abs(euclidean_oracle(v, ex2.pp, eps, pts, 0.01, ex2.well) - exact))
    assert gap < 1e-3


def test_operator_refuses_folded_chart(ex2):
    s = np.array([0.0])
    t = np.array([0.0, -8.0])
    with pytest.raises(ValueError, match="Jacobian"):
        FermiOperator(ex2.pp, column_geometry(ex2.curve, 0.5, s), t)


def test_expanded_operator_misses_only_the_stationarity_drift(ex2):
    """Off a stationary curve the truncation drops ``eps (r / a) v_t``, with ``r`` the criticality residual."""
    s = np.array([0.0])
    t = np.array([0.0])
    r_over_a = float(criticality_residual(ex2.pp, s).r[0] / ex2.pp.on_curve(s)["a0"][0])
    gaps = []
    for eps in (0.1, 0.05, 0.025):
        b = _ansatz(ex2, eps).bundle(s, t)
        geom = column_geometry(ex2.curve, eps, s)
        gap = apply_fermi_exact(b, t, ex2.pp, geom, ex2.well) - apply_fermi_expanded(b, t, ex2.pp, geom, ex2.well)
        gaps.append(abs(float(gap[0, 0])))
        assert gaps[-1] == pytest.approx(eps * abs(r_over_a) * ex2.profile.wp(0.0), rel=3 * eps ** 2)
    assert fit_loglog([0.1, 0.05, 0.025], gaps).slope == pytest.approx(1.0, abs=0.05)


def test_projection_of_pure_and_odd_columns(twin_profile):
    p = twin_profile
    s = np.linspace(-1.0, 1.0, 5)
    t = symmetric_axis(12.0, 0.01)
    rho = 1.0 + s ** 2
    pure = projection_pi(GridField(s, t, np.outer(rho, p.wp(t))), p)
    assert np.allclose(pure.values, p.c_star * rho, atol=1e-12)
    odd = projection_pi(GridField(s, t, np.outer(rho, t * p.wp(t))), p)
    assert np.max(np.abs(odd.values)) < 1e-14
    with pytest.warns(RuntimeWarning, match="tail"):
        projection_pi(GridField(s, t, np.ones((5, len(t)))), p)


def test_layer_error_decomposition(ex2):
    eps = 0.1
    s = symmetric_axis(30.0, 0.5)
    t = symmetric_axis(12.0, 0.05)
    h = Displacement.from_expression("0.3*exp(-x**2)")
    geom = column_geometry(ex2.curve, eps, s, h)
    le = layer_error(_ansatz(ex2, eps), ex2.well, geom, t, cutoffs_for(ex2.chart, eps))
    core = le.zeta0 == 1.0
    outside = le.zeta0 == 0.0
    assert np.any(core) and np.any(outside)
    assert np.allclose(le.Stilde[core], le.S1[core], atol=1e-15)
    oc = ex2.pp.on_curve(geom.sigma)
    z = t[None, :] + geom.h[:, None]
    a0_term = -eps ** 3 * z * (oc["A0"] * geom.d2h)[:, None] * ex2.profile.wp(t)[None, :]
    along = le.S1 - le.R1 - a0_term
    assert np.allclose(le.Stilde[outside], along[outside], atol=1e-15)


def test_scaling_study_exact_zero_on_constant_line(line):
    sigma = symmetric_axis(2.0, 0.05)
    t = symmetric_axis(12.0, 0.05)
    h = Displacement.from_expression("0.3*exp(-x**2)")
    table = scaling_study(lambda e: layer_scaling_quantities(line, e, sigma, t, h), [0.2, 0.1, 0.05])
    assert all(fit.exact_zero for fit in table.fits.values())
    assert set(table.fits) == {"S0", "S1r", "expanded_vs_exact", "Pi_plus_J"}


def test_scaling_study_validation():
    with pytest.raises(ValueError, match="three"):
        scaling_study(lambda e: {"x": e}, [0.1, 0.05])
    table = scaling_study(lambda e: {"x": e ** 2, "bad": 1.0 / e}, [0.2, 0.1, 0.05])
    assert table.slope("x") == pytest.approx(2.0)
    assert np.isnan(table.slope("bad")) and not table.fits["bad"].monotone
