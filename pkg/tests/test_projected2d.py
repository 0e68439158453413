import numpy as np
import pytest

from artifact.gridfield import GridField
from artifact.projected2d import (
    apply_projected_operator,
    coupling_callback,
    projected_context,
    solve_linear_projected,
    solve_nonlinear_projected,
    transverse_basis,
)
from artifact.scenarios import symmetric_axis

# Second eigenvalue of -d_tt + F''(w) for the twin-pit kink; the continuum starts at 2.
KINK_SHAPE_MODE = 1.5


def _grid():
    return symmetric_axis(4.0, 0.05), symmetric_axis(10.0, 0.05)


def test_transverse_basis_spectrum(twin_profile):
    basis = transverse_basis(twin_profile, symmetric_axis(12.0, 0.02))
    assert abs(basis.evals[basis.null_index]) < 1e-10
    assert basis.spectral_gap == pytest.approx(KINK_SHAPE_MODE, abs=5e-3)
    with pytest.raises(ValueError, match="uniform"):
        transverse_basis(twin_profile, np.array([0.0, 0.1, 0.3]))


def test_pure_wprime_data_is_absorbed_by_the_multiplier(twin_profile):
    s, t = _grid()
    rho = np.cos(s)
    sol = solve_linear_projected(GridField(s, t, np.outer(rho, twin_profile.wp(t))), twin_profile)
    assert np.max(np.abs(sol.phi.values)) < 1e-12
    assert np.allclose(sol.c, -rho, atol=1e-12)


def test_odd_data_has_zero_multiplier(twin_profile):
    s, t = _grid()
    g = np.outer(1.0 / (1.0 + s ** 2), t * twin_profile.wp(t))
    sol = solve_linear_projected(GridField(s, t, g), twin_profile)
    assert np.max(np.abs(sol.c)) < 1e-14
    assert sol.max_orthogonality < 1e-12


@pytest.mark.parametrize("bc", ["neumann", "periodic"])
def test_generic_data_solves_the_discrete_system(twin_profile, bc):
    s, t = _grid()
    S, T = np.meshgrid(s, t, indexing="ij")
    g = np.exp(-T ** 2) * np.cos(np.pi * S / 4.0) * (1.0 + T)
    sol = solve_linear_projected(GridField(s, t, g), twin_profile, bc=bc)
    assert sol.max_orthogonality < 1e-10
    assert sol.multiplier_mismatch < 1e-8
    assert sol.residual < 1e-8
    basis = transverse_basis(twin_profile, t)
    Lphi = apply_projected_operator(sol.phi.values, basis, sol.phi.ds, bc)
    res = (Lphi - g)[:, 1:-1] - sol.c[:, None] * basis.wp[None, :]
    assert np.max(np.abs(res)) < 1e-8
    assert np.all(sol.phi.values[:, [0, -1]] == 0.0)


def test_unknown_boundary_condition(twin_profile):
    s, t = _grid()
    with pytest.raises(ValueError, match="boundary"):
        solve_linear_projected(GridField(s, t, np.zeros((len(s), len(t)))), twin_profile, bc="dirichlet")


def test_nonlinear_on_constant_line_is_trivial(line):
    ctx = projected_context(line, sigma_half=1.0, dsigma=0.01, t_half=10.0, dt=0.05)
    res = solve_nonlinear_projected(None, ctx, 0.1)
    assert res.converged
    assert np.max(np.abs(res.phi.values)) < 1e-10 and np.max(np.abs(res.c)) < 1e-10


def test_nonlinear_converges_on_example1(ex1):
    ctx = projected_context(ex1, sigma_half=2.0, dsigma=0.01, t_half=10.0, dt=0.05)
    res = solve_nonlinear_projected(None, ctx, 0.1)
    assert res.converged and res.iterations < 20
    assert max(res.ratios) < 0.5
    assert res.linear.max_orthogonality < 1e-8
    assert 0.0 < res.outer_bound < 1.0
    sigma, n_proj = coupling_callback(ctx)(ctx.sigma, None, 0.1)
    assert np.array_equal(sigma, ctx.sigma) and np.allclose(n_proj, res.n_projection)
