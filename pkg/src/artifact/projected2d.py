"""The projected layer problem on a truncated ``(s, t)`` rectangle.

The linear problem is

    phi_tt + phi_ss + f'(w(t)) phi = g + c(s) w'(t),    int phi(s, t) w'(t) dt = 0,

with ``f = -F'``.  It is discretized with second differences: homogeneous
Dirichlet data at the ``t`` edges and reflecting (Neumann) or periodic data at
the ``s`` edges.  The transverse operator ``D_tt + diag(m)`` uses the potential
``m = -(D_tt w')/w'`` on the interior nodes, which makes the sampled ``w'`` an
exact null vector, so the discrete orthogonality constraint and the explicit
multiplier ``c = -<g, w'> / <w', w'>`` are consistent to roundoff.  The
transverse operator is diagonalized once; each mode then needs one tridiagonal
solve in ``s``.  Inner products in ``t`` are sums over the interior nodes times
``dt`` (the trapezoid rule for functions vanishing at the edges).

The nonlinear problem iterates

    phi <- solve(-Stilde - N(phi))

where ``N(phi) = zeta0 (Delta phi - phi_tt - phi_ss) + eps (grad a / a) . grad phi
+ [f'(v1) - f'(w)] phi`` collects the metric, drift and potential corrections
of the exact operator around the corrected layer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from artifact.ansatz import CurveCoefficients, LayerAnsatz, cutoffs_for, curve_coefficients
from artifact.gridfield import GridField
from artifact.profile import HeteroclinicProfile
from artifact.residual import column_geometry, layer_error
from artifact.scenarios import Scenario, symmetric_axis

BOUNDARY_CONDITIONS = ("neumann", "periodic")


@dataclass(frozen=True)
class TransverseBasis:
    """Eigendecomposition of the interior transverse operator ``D_tt + diag(m)``."""

    t: np.ndarray
    dt: float
    wp: np.ndarray
    potential: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray
    null_index: int

    @property
    def spectral_gap(self) -> float:
        """Distance from zero of the largest eigenvalue after the null mode."""
        others = np.delete(self.evals, self.null_index)
        return float(-np.max(others))

    def inner(self, values: np.ndarray) -> np.ndarray:
        """``<v, w'>`` per column for samples on the full ``t`` grid."""
        return values[:, 1:-1] @ self.wp * self.dt

    @property
    def wp_norm2(self) -> float:
        return float(self.wp @ self.wp * self.dt)


def transverse_basis(profile: HeteroclinicProfile, t) -> TransverseBasis:
    """Diagonalize ``D_tt + diag(m)`` on the interior of the uniform grid ``t``."""
    t = np.asarray(t, dtype=float)
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-10, atol=0.0):
        raise ValueError("the t grid must be uniform")
    wp = profile.wp(t[1:-1])
    padded = np.concatenate([[0.0], wp, [0.0]])
    dtt_wp = (padded[2:] - 2.0 * wp + padded[:-2]) / dt ** 2
    m = -dtt_wp / wp
    diag = -2.0 / dt ** 2 + m
    off = np.full(len(wp) - 1, 1.0 / dt ** 2)
    evals, evecs = eigh_tridiagonal(diag, off)
    null_index = int(np.argmax(evals))
    return TransverseBasis(t, dt, wp, m, evals, evecs, null_index)


def _second_difference_s(u: np.ndarray, ds: float, bc: str) -> np.ndarray:
    """``D_ss`` along axis 0 with reflecting or periodic ends."""
    if bc == "periodic":
        return (np.roll(u, -1, axis=0) - 2.0 * u + np.roll(u, 1, axis=0)) / ds ** 2
    out = np.empty_like(u)
    out[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    out[0] = 2.0 * (u[1] - u[0])
    out[-1] = 2.0 * (u[-2] - u[-1])
    return out / ds ** 2


def apply_projected_operator(phi: np.ndarray, basis: TransverseBasis, ds: float, bc: str = "neumann") -> np.ndarray:
    """The discrete ``D_tt + D_ss + diag(m)`` on the interior ``t`` nodes, zero on the edges."""
    dt = basis.dt
    u = phi[:, 1:-1]
    padded = np.pad(u, ((0, 0), (1, 1)))
    out = np.zeros_like(phi)
    out[:, 1:-1] = ((padded[:, 2:] - 2.0 * u + padded[:, :-2]) / dt ** 2
                    + basis.potential * u + _second_difference_s(u, ds, bc))
    return out


def _solve_mode(rhs: np.ndarray, lam: float, ds: float, bc: str) -> np.ndarray:
    """Solve ``(D_ss + lam) u = rhs`` along ``s`` for several right-hand sides (columns of ``rhs``)."""
    n = rhs.shape[0]
    inv2 = 1.0 / ds ** 2
    if bc == "periodic":
        k = np.fft.fftfreq(n, d=ds) * 2.0 * np.pi
        symbol = -4.0 * inv2 * np.sin(0.5 * k * ds) ** 2 + lam
        return np.real(np.fft.ifft(np.fft.fft(rhs, axis=0) / symbol[:, None], axis=0))
    ab = np.zeros((3, n))
    ab[0, 1:] = inv2
    ab[1, :] = -2.0 * inv2 + lam
    ab[2, :-1] = inv2
    ab[0, 1] = 2.0 * inv2
    ab[2, -2] = 2.0 * inv2
    return solve_banded((1, 1), ab, rhs)


@dataclass(frozen=True)
class ProjectedSolve:
    """Solution of one linear projected problem.

    ``c`` is the multiplier from the explicit formula and ``c_recovered`` the
    one read back from the discrete residual ``<L phi - g, w'> / <w', w'>``.
    """

    phi: GridField
    c: np.ndarray
    c_recovered: np.ndarray
    residual: float
    orthogonality: np.ndarray
    bc: str

    @property
    def max_orthogonality(self) -> float:
        return float(np.max(np.abs(self.orthogonality)))

    @property
    def multiplier_mismatch(self) -> float:
        return float(np.max(np.abs(self.c - self.c_recovered)))


def solve_linear_projected(g: GridField, profile: HeteroclinicProfile, bc: str = "neumann",
                           basis: TransverseBasis | None = None, resonance_tol: float = 1e-6) -> ProjectedSolve:
    """Solve the linear projected problem for the data ``g``.

    Parameters
    ----------
    g : GridField
        Right-hand side on a uniform ``(s, t)`` rectangle; values at the ``t``
        edges are ignored (Dirichlet nodes).
    profile : HeteroclinicProfile
        Supplies ``w'``.
    bc : {"neumann", "periodic"}
        Condition at the ``s`` edges.
    basis : TransverseBasis, optional
        Reused eigendecomposition for the same ``t`` grid.
    """
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown s boundary condition {bc!r}; choose from {BOUNDARY_CONDITIONS}")
    if basis is None or len(basis.t) != len(g.t) or not np.array_equal(basis.t, g.t):
        basis = transverse_basis(profile, g.t)
    gap = basis.spectral_gap
    if gap < resonance_tol:
        warnings.warn(f"transverse operator has a near-zero eigenvalue {-gap:.2e} off the w' mode", RuntimeWarning)
    values = g.values
    norm2 = basis.wp_norm2
    c = -basis.inner(values) / norm2
    g_tilde = values[:, 1:-1] + c[:, None] * basis.wp[None, :]
    modes = g_tilde @ basis.evecs
    modes[:, basis.null_index] = 0.0
    coef = np.empty_like(modes)
    for n, lam in enumerate(basis.evals):
        if n == basis.null_index:
            coef[:, n] = 0.0
            continue
        coef[:, n] = _solve_mode(modes[:, n:n + 1], float(lam), g.ds, bc)[:, 0]
    u = coef @ basis.evecs.T
    u -= np.outer(u @ basis.wp * basis.dt / norm2, basis.wp)
    phi = np.zeros_like(values)
    phi[:, 1:-1] = u
    Lphi = apply_projected_operator(phi, basis, g.ds, bc)
    diff = Lphi - values
    c_rec = basis.inner(diff) / norm2
    res = diff[:, 1:-1] - c[:, None] * basis.wp[None, :]
    scale = max(1.0, float(np.max(np.abs(values))))
    return ProjectedSolve(
        phi=g.with_values(phi, name="phi"),
        c=c,
        c_recovered=c_rec,
        residual=float(np.max(np.abs(res))) / scale,
        orthogonality=basis.inner(phi),
        bc=bc,
    )


@dataclass
class ProjectedContext:
    """The ``eps``-independent pieces of a projected solve: grids in ``sigma`` and ``t`` and curve tables."""

    scenario: Scenario
    sigma: np.ndarray
    t: np.ndarray
    cc: CurveCoefficients
    oc: dict
    basis: TransverseBasis
    bc: str = "neumann"


def projected_context(scenario: Scenario, sigma_half: float = 4.0, dsigma: float = 0.005,
                      t_half: float = 12.0, dt: float = 0.05, bc: str = "neumann") -> ProjectedContext:
    """Precompute curve coefficients on ``|sigma| <= sigma_half`` and the transverse basis."""
    sigma = symmetric_axis(sigma_half, dsigma)
    t = symmetric_axis(t_half, dt)
    pp = scenario.pp
    return ProjectedContext(scenario, sigma, t, curve_coefficients(pp, sigma), pp.on_curve(sigma),
                            transverse_basis(scenario.profile, t), bc)


@dataclass(frozen=True)
class NonlinearProjected:
    """Fixed point ``phi = Phi(h)`` of the nonlinear projected problem."""

    phi: GridField
    c: np.ndarray
    linear: ProjectedSolve
    updates: list[float]
    ratios: list[float]
    converged: bool
    eps: float
    outer_bound: float
    stilde_sup: float = 0.0
    n_projection: np.ndarray | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.updates)


def solve_nonlinear_projected(h, context: ProjectedContext, eps: float, tol: float = 1e-12,
                              max_iter: int = 40, weight_sigma: float = 1.2) -> NonlinearProjected:
    """Fixed point of ``phi <- solve(-Stilde - N(phi))`` around the layer displaced by ``h``.

    ``h`` is ``None``, a :class:`~artifact.geometry.Displacement` or a tuple
    ``(h, h', h'')`` of arrays at ``context.sigma``.  The outer field is set to
    zero on the rectangle; ``outer_bound`` reports the size
    ``exp(-sigma delta / (2 eps))`` of the neglected coupling.
    """
    sc = context.scenario
    s = context.sigma / eps
    t = context.t
    ansatz = LayerAnsatz(sc.profile, sc.psi0, sc.psi1, sc.pp, eps)
    geom = column_geometry(sc.curve, eps, s, h)
    cut = cutoffs_for(sc.chart, eps)
    le = layer_error(ansatz, sc.well, geom, t, cut, context.cc, context.oc)
    op = le.operator
    w = sc.profile.w(t)[None, :]
    dpot = -(sc.well.d2F(le.v1.V) - sc.well.d2F(w))
    rhs0 = -le.Stilde

    def nonlinear(phi: np.ndarray) -> np.ndarray:
        b = GridField(s, t, phi, "phi").bundle()
        lap, drift = op.parts(b)
        return le.zeta0 * (lap - b.V_tt - b.V_ss) + drift + dpot * phi

    phi = np.zeros((len(s), len(t)))
    updates: list[float] = []
    ratios: list[float] = []
    converged = False
    sol = None
    bad = 0
    for _ in range(max_iter):
        g = GridField(s, t, rhs0 - nonlinear(phi), "rhs")
        sol = solve_linear_projected(g, sc.profile, context.bc, context.basis)
        new = sol.phi.values
        upd = float(np.max(np.abs(new - phi)))
        scale = max(float(np.max(np.abs(new))), 1e-300)
        if updates and updates[-1] > 0:
            ratios.append(upd / updates[-1])
            bad = bad + 1 if ratios[-1] >= 1.0 else 0
            if bad >= 2:
                raise RuntimeError(f"projected fixed point is not contracting: ratios {ratios[-3:]}")
        updates.append(upd)
        phi = new
        if upd <= tol * scale or upd == 0.0:
            converged = True
            break
    assert sol is not None
    n_proj = context.basis.inner(nonlinear(phi))
    return NonlinearProjected(
        phi=GridField(s, t, phi, "phi"),
        c=sol.c,
        linear=sol,
        updates=updates,
        ratios=ratios,
        converged=converged,
        eps=eps,
        outer_bound=float(np.exp(-weight_sigma * sc.chart.delta / (2.0 * eps))),
        stilde_sup=float(np.max(np.abs(le.Stilde))),
        n_projection=n_proj,
    )


def coupling_callback(context: ProjectedContext):
    """Callable ``(sigma, h_columns, eps) -> (sigma_p, int N(Phi(h)) w' dt)`` for the reduced equation.

    The displacement given on the columns ``sigma`` is interpolated linearly
    onto the projected grid.
    """

    def projected(sigma, h_columns, eps):
        if h_columns is None:
            h = None
        else:
            h = tuple(np.interp(context.sigma, sigma, a) for a in h_columns)
        res = solve_nonlinear_projected(h, context, eps)
        return context.sigma, res.n_projection

    return projected
