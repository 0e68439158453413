import numpy as np
import pytest

from artifact.ansatz import (
    LayerAnsatz,
    WeightK,
    build_global,
    build_phi1,
    build_v0,
    build_v1,
    cutoffs_for,
    eta,
    smoothstep5,
    step_H,
    weight_K,
    weighted_norms_2d,
)
from artifact.geometry import dilated_chart
from artifact.gridfield import GridField
from artifact.numerics import fit_loglog
from artifact.scenarios import symmetric_axis


def _ansatz(sc, eps, order=1):
    return LayerAnsatz(sc.profile, sc.psi0, sc.psi1, sc.pp, eps, order=order)


def test_cutoff_profiles():
    x = np.array([-5.0, 1.0, 1.5, 2.0, 7.0])
    assert np.allclose(eta(x), [1.0, 1.0, 0.5, 0.0, 0.0])
    assert smoothstep5(0.5) == pytest.approx(0.5)
    assert np.allclose(step_H([-3.0, 0.0, 3.0]), [-1.0, 0.0, 1.0])


def test_v0_values(twin_profile):
    s = np.linspace(-5.0, 5.0, 11)
    t = symmetric_axis(12.0, 0.01)
    v0 = build_v0(twin_profile, s, t)
    j0 = int(np.argmin(np.abs(t)))
    assert np.all(v0.values[:, j0] == 0.0)
    assert np.max(np.abs(v0.values[:, -1] - 1.0)) < 1e-7
    assert np.all(v0.derivs["s"] == 0.0)


def test_phi1_vanishes_for_constant_line(line):
    s = np.linspace(-50.0, 50.0, 21)
    t = symmetric_axis(8.0, 0.1)
    phi1 = build_phi1(_ansatz(line, 0.1), s, t)
    assert np.all(phi1.values == 0.0)


def test_phi1_scales_like_eps_squared(ex1):
    sigma = symmetric_axis(4.0, 0.05)
    t = symmetric_axis(12.0, 0.05)
    eps_list = [0.2, 0.1, 0.05]
    sups = [build_phi1(_ansatz(ex1, e), sigma / e, t).sup() for e in eps_list]
    assert fit_loglog(eps_list, sups).slope == pytest.approx(2.0, abs=0.2)


def test_layer_bundle_matches_finite_differences(ex2):
    eps = 0.2
    s = symmetric_axis(10.0, 0.02)
    t = symmetric_axis(6.0, 0.02)
    exact = build_v1(_ansatz(ex2, eps), s, t)
    fd = GridField(s, t, exact.values).bundle()
    i, j = exact.interior(4)
    b = exact.bundle()
    for name in ("V_s", "V_t", "V_ss", "V_st", "V_tt"):
        assert np.max(np.abs(getattr(b, name) - getattr(fd, name))[i, j]) < 1e-6, name


def test_pointwise_value_matches_bundle(ex2):
    an = _ansatz(ex2, 0.1)
    s = np.array([-12.0, 0.0, 7.5])
    t = np.array([-1.0, 0.3, 2.0])
    b = an.bundle(s, t)
    assert np.allclose(an.value(s, t), np.diag(b.V), atol=1e-14)


def test_global_far_side_and_interface(ex2):
    eps = 0.1
    ga = build_global(_ansatz(ex2, eps), ex2.chart)
    dc = dilated_chart(ex2.chart, eps)
    far = dc.forward(np.array([0.0, 20.0]), np.array([50.0, -50.0]))
    assert np.allclose(ga(far), [1.0, -1.0])
    on_curve = dc.forward(np.linspace(-30.0, 30.0, 13), 0.0)
    assert np.max(np.abs(ga(on_curve))) <= 10.0 * eps ** 2


def test_global_seam_is_continuous_and_close_to_step(ex2):
    eps = 0.05
    ga = build_global(_ansatz(ex2, eps), ex2.chart)
    dc = dilated_chart(ex2.chart, eps)
    cut = cutoffs_for(ex2.chart, eps)
    for s0 in (0.0, 15.0):
        rho = float(cut.rho(s0))
        t = np.linspace(rho - 2.5, rho - 0.5, 2001)
        for sign in (1.0, -1.0):
            pts = dc.forward(np.full_like(t, s0), sign * t)
            vals = ga(pts)
            bound = np.exp(-np.sqrt(2.0) * (rho - 3.0))
            assert np.max(np.abs(vals - sign)) < bound
            assert np.max(np.abs(np.diff(vals))) < 1e-3


def test_weighted_norms_of_constant_field():
    s = symmetric_axis(10.0, 0.1)
    t = symmetric_axis(10.0, 0.1)
    gf = GridField(s, t, np.ones((len(s), len(t))))
    norms = weighted_norms_2d(gf, eps=0.1, mu=0.0, sigma=0.0)
    assert norms["linf"] == pytest.approx(1.0) and norms["c0lambda"] == pytest.approx(1.0)


def test_weighted_norm_of_decaying_field_is_grid_stable():
    eps, mu, sig = 0.1, 2.0, 1.2
    vals = []
    for step in (0.1, 0.05):
        s = symmetric_axis(40.0, step)
        t = symmetric_axis(10.0, step)
        S, T = np.meshgrid(s, t, indexing="ij")
        gf = GridField(s, t, np.exp(-sig * np.abs(T)) * (1.0 + np.abs(eps * S)) ** (-mu))
        vals.append(weighted_norms_2d(gf, eps, mu=mu, sigma=sig)["c0lambda"])
    # unit-window sups against the pointwise weight cost a factor up to e^sigma and
    # the Hoelder part adds at most as much again
    assert 1.0 <= vals[0] < 4.0 * np.exp(sig)
    assert vals[1] == pytest.approx(vals[0], rel=0.1)


def test_weight_K_parameters_and_blend(ex1):
    with pytest.raises(ValueError):
        WeightK(b1=0.6, b2=0.6)
    weight = WeightK()
    cut = cutoffs_for(ex1.chart, 0.1)
    s = np.array([0.0, 0.0])
    t = np.array([0.0, np.nan])
    x = np.array([[0.0, 0.0], [0.0, 40.0]])
    w = weight_K(weight, cut, s, t, x)
    assert w[0] == pytest.approx(1.0)
    assert w[1] == pytest.approx(np.exp(weight.b2 * 40.0))
