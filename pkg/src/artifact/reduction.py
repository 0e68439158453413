"""The reduced equation ``J[h] = G(h)`` on the curve and its fixed-point solution.

Projecting the cut-off layer error against ``w'`` gives, per point of the curve,

    G(h) = eps C c_hat
           - eps h'' int zeta0 (t + h) A0 w'^2 dt / c_star
           + eps^2 Q h'' int psi0' w' dt / c_star
           + eps^-2 int zeta0 R1 w' dt / c_star
           [+ eps^-2 int N(phi) w' dt / c_star]

where the last term is the coupling to the projected solution ``phi = Phi(h)``;
by default it is replaced by zero.  The right-hand side is evaluated on every
``column_stride``-th point of the Jacobi grid with ``|sigma| <= sigma_max``,
interpolated by a cubic spline and set to zero outside that window.  The
fixed point ``h = T(G(h))`` uses the bounded right inverse ``T`` of the Jacobi
operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from artifact.ansatz import CurveCoefficients, LayerAnsatz, curve_coefficients, cutoffs_for, weighted_norms_2d
from artifact.gridfield import GridField
from artifact.jacobi import (
    JacobiSystem,
    KernelPair,
    LinearSolve,
    NondegeneracyCertificate,
    WeightedNorm1D,
    assemble,
    construct_kernel,
    nondegeneracy_check,
    solve_linear,
)
from artifact.numerics import trapezoid_weights
from artifact.residual import column_geometry, layer_error
from artifact.scenarios import Scenario, symmetric_axis

G2_MODES = ("surrogate", "full")


@dataclass
class ReductionContext:
    """Jacobi system, kernel, certificate and the column tables shared across iterations."""

    scenario: Scenario
    system: JacobiSystem
    kernel: KernelPair
    certificate: NondegeneracyCertificate
    columns: np.ndarray
    t: np.ndarray
    cc: CurveCoefficients
    oc: dict
    psi0_wp: float
    tail_tol: float = 1e-8
    lam: float = 0.5

    @property
    def sigma(self) -> np.ndarray:
        return self.system.s[self.columns]

    def norm(self) -> WeightedNorm1D:
        return WeightedNorm1D(self.system.alpha_decay, self.lam)


def reduction_context(scenario: Scenario, s_max: float = 200.0, ds: float = 0.002, sigma_max: float = 16.0,
                      column_stride: int = 10, t_half: float = 12.0, dt: float = 0.1) -> ReductionContext:
    """Assemble and certify the Jacobi operator and tabulate the curve coefficients on the columns."""
    pp = scenario.pp
    system = assemble(pp, s_max=s_max, ds=ds, label=scenario.name)
    kernel = construct_kernel(system)
    cert = nondegeneracy_check(system, kernel)
    idx = np.flatnonzero(np.abs(system.s) <= sigma_max + 1e-12)
    columns = idx[::column_stride]
    if columns[-1] != idx[-1]:
        columns = np.append(columns, idx[-1])
    sigma = system.s[columns]
    t = symmetric_axis(t_half, dt)
    p = scenario.profile
    psi0_wp = float(trapezoid_weights(len(t), dt) @ (scenario.psi0.dpsi(t) * p.wp(t)))
    return ReductionContext(scenario, system, kernel, cert, columns, t, curve_coefficients(pp, sigma),
                            pp.on_curve(sigma), psi0_wp)


@dataclass(frozen=True)
class ReducedRHS:
    """``G(h)`` on the full Jacobi grid and its pieces on the columns."""

    values: np.ndarray
    terms: dict[str, np.ndarray]
    tail: float
    g2_mode: str


def _h_at_columns(ctx: ReductionContext, h: LinearSolve | None):
    if h is None:
        return None
    c = ctx.columns
    return (h.h[c], h.dh[c], h.d2h[c])


def reduced_rhs(h: LinearSolve | None, ctx: ReductionContext, eps: float, g2_mode: str = "surrogate",
                projected=None) -> ReducedRHS:
    """Evaluate ``G(h)``.

    Parameters
    ----------
    h : LinearSolve or None
        Displacement with its derivatives on the Jacobi grid (``None`` is ``h = 0``).
    ctx : ReductionContext
    eps : float
    g2_mode : {"surrogate", "full"}
        ``"full"`` adds the projection of the nonlinear coupling computed by
        ``projected`` (a callable ``(sigma, h_columns, eps) -> (sigma, int N(phi) w' dt)``).
    """
    if g2_mode not in G2_MODES:
        raise ValueError(f"unknown G2 mode {g2_mode!r}; choose from {G2_MODES}")
    sc = ctx.scenario
    p = sc.profile
    sigma = ctx.sigma
    s = sigma / eps
    t = ctx.t
    hc = _h_at_columns(ctx, h)
    geom = column_geometry(sc.curve, eps, s, hc)
    ansatz = LayerAnsatz(p, sc.psi0, sc.psi1, sc.pp, eps)
    le = layer_error(ansatz, sc.well, geom, t, cutoffs_for(sc.chart, eps), ctx.cc, ctx.oc)
    wt = trapezoid_weights(len(t), t[1] - t[0])
    wp = p.wp(t)
    z = t[None, :] + geom.h[:, None]
    cs = p.c_star
    r1_proj = (le.zeta0 * le.R1 * wp) @ wt
    edge = np.abs(le.R1[:, [0, -1]] * wp[[0, -1]]).max() / p.decay_rate
    terms = {
        "c_hat": eps * ctx.oc["C"] * p.c_hat,
        "A0": -eps * geom.d2h * ctx.oc["A0"] * ((le.zeta0 * z * wp ** 2) @ wt) / cs,
        "psi0": eps ** 2 * ctx.oc["Q"] * geom.d2h * ctx.psi0_wp / cs,
        "R1": r1_proj / (eps ** 2 * cs),
    }
    if g2_mode == "full":
        if projected is None:
            raise ValueError("full G2 mode needs a projected-solution callback")
        sig_p, n_proj = projected(sigma, hc, eps)
        terms["G2"] = np.interp(sigma, sig_p, n_proj / (eps ** 2 * cs), left=0.0, right=0.0)
    g_cols = sum(terms.values())
    values = np.zeros_like(ctx.system.s)
    lo, hi = ctx.columns[0], ctx.columns[-1]
    values[lo:hi + 1] = CubicSpline(sigma, g_cols)(ctx.system.s[lo:hi + 1])
    if edge > ctx.tail_tol * max(1.0, float(np.max(np.abs(r1_proj)))):
        raise RuntimeError(f"quadrature tail {edge:.2e} of the R1 projection exceeds {ctx.tail_tol:.1e}")
    return ReducedRHS(values, terms, float(edge), g2_mode)


@dataclass
class ReducedState:
    """Iterates of ``h <- T(G(h))`` with diagnostics.

    ``ball_K`` is the multiplier in the ball condition ``||h|| <= K eps``.
    """

    eps: float
    solution: LinearSolve
    updates: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    h_norms: list[float] = field(default_factory=list)
    converged: bool = False
    fixed_point_residual: float = float("nan")
    ball_K: float = 10.0
    max_iter: int = 50
    tol: float = 1e-10
    g2_mode: str = "surrogate"
    stalled: bool = False

    @property
    def h(self) -> np.ndarray:
        return self.solution.h

    @property
    def sup_h_over_eps(self) -> float:
        return float(np.max(np.abs(self.solution.h))) / self.eps

    @property
    def iterations(self) -> int:
        return len(self.updates)

    def log_rows(self) -> list[tuple[int, float, float, float]]:
        """``(k, ||update||, ratio, ||h|| / eps)`` per iteration."""
        ratios = [float("nan")] + self.ratios
        return [(k + 1, u, r, n / self.eps) for k, (u, r, n) in enumerate(zip(self.updates, ratios, self.h_norms))]


def _zero_solve(sys: JacobiSystem) -> LinearSolve:
    z = np.zeros_like(sys.s)
    return LinearSolve(sys.s, z, z, z, z)


def _iterate(ctx: ReductionContext, eps: float, start: LinearSolve, cfg: dict) -> ReducedState:
    K, max_iter, tol = cfg.get("ball_K", 10.0), cfg.get("max_iter", 50), cfg.get("tol", 1e-10)
    floor = cfg.get("noise_floor", 1e-8)
    g2_mode, projected = cfg.get("g2_mode", "surrogate"), cfg.get("projected")
    norm = ctx.norm()
    state = ReducedState(eps, start, ball_K=K, max_iter=max_iter, tol=tol, g2_mode=g2_mode)
    h = start
    bad = 0
    for _ in range(max_iter):
        G = reduced_rhs(h, ctx, eps, g2_mode, projected)
        new = solve_linear(ctx.system, ctx.kernel, G.values)
        upd = norm.second_order(new.s, new.h - h.h, new.dh - h.dh, new.d2h - h.d2h)
        hn = norm.second_order(new.s, new.h, new.dh, new.d2h)
        stalled = False
        if state.updates and state.updates[-1] > 0.0:
            state.ratios.append(upd / state.updates[-1])
            stalled = state.ratios[-1] >= 1.0 and upd < floor
            bad = bad + 1 if state.ratios[-1] >= 1.0 and not stalled else 0
        state.updates.append(upd)
        state.h_norms.append(hn)
        state.solution = h = new
        if bad >= 2:
            raise RuntimeError(f"reduced fixed point is not contracting: ratios {state.ratios[-3:]}")
        if hn > K * eps:
            raise RuntimeError(f"iterate left the ball: ||h|| = {hn:.3e} > K eps = {K * eps:.3e}")
        if upd < tol or stalled:
            state.converged = True
            state.stalled = stalled
            break
    G = reduced_rhs(h, ctx, eps, g2_mode, projected)
    state.fixed_point_residual = norm.zeroth_order(ctx.system.s, h.f - G.values)
    return state


def solve_reduced(ctx: ReductionContext, eps: float, cfg: dict | None = None) -> ReducedState:
    """Iterate ``h_{k+1} = T(G(h_k))`` from ``h_0 = 0``.

    ``cfg`` keys: ``ball_K`` (10), ``max_iter`` (50), ``tol`` (1e-10, on the
    weighted norm of the update), ``noise_floor`` (1e-8), ``g2_mode`` and
    ``projected``.  An update below ``noise_floor`` that no longer decreases is
    roundoff of the weighted norm; the iteration then stops with ``stalled``
    set.

    Raises
    ------
    ValueError
        If the Jacobi operator is not certified nondegenerate.
    RuntimeError
        On two consecutive expanding steps or when an iterate leaves the ball.
    """
    if not ctx.certificate.certified:
        raise ValueError("the Jacobi operator is not certified nondegenerate")
    return _iterate(ctx, eps, _zero_solve(ctx.system), cfg or {})


def contraction_probe(ctx: ReductionContext, eps: float, amplitude: float = 0.5, iterations: int = 4,
                      cfg: dict | None = None) -> ReducedState:
    """Run the iteration from ``h_0 = amplitude eps sech(sigma)`` and record the update ratios."""
    cfg = dict(cfg or {})
    cfg.update(max_iter=iterations, tol=0.0)
    s = ctx.system.s
    sech = 1.0 / np.cosh(s)
    th = np.tanh(s)
    c = amplitude * eps
    start = LinearSolve(s, c * sech, -c * sech * th, c * sech * (th ** 2 - sech ** 2), np.zeros_like(s))
    return _iterate(ctx, eps, start, cfg)


def lipschitz_probe(ctx: ReductionContext, eps: float, h1: LinearSolve, h2: LinearSolve) -> float:
    """``||G(h1) - G(h2)|| / ||h1 - h2||`` in the weighted norms."""
    norm = ctx.norm()
    g1 = reduced_rhs(h1, ctx, eps).values
    g2 = reduced_rhs(h2, ctx, eps).values
    dh = norm.second_order(h1.s, h1.h - h2.h, h1.dh - h2.dh, h1.d2h - h2.d2h)
    return norm.zeroth_order(ctx.system.s, g1 - g2) / dh


@dataclass(frozen=True)
class ProjectionSize:
    """Weighted norms of ``Theta`` on ``(s, t)`` and of ``Z(sigma) = int Theta w' dt``."""

    sigma: np.ndarray
    Z: np.ndarray
    theta_norm: float
    z_norm: float

    @property
    def ratio(self) -> float:
        return self.z_norm / self.theta_norm if self.theta_norm > 0 else 0.0


def projection_size_check(theta: GridField, eps: float, profile, alpha: float = 1.0, mu: float = 2.0,
                          weight_sigma: float = 1.2, lam: float = 0.5) -> ProjectionSize:
    """Compare ``||Z||`` in the curve norm with ``||Theta||`` in the layer norm."""
    wt = trapezoid_weights(len(theta.t), theta.dt)
    Z = (theta.values * profile.wp(theta.t)[None, :]) @ wt
    sigma = eps * theta.s
    theta_norm = weighted_norms_2d(theta, eps, mu=mu, sigma=weight_sigma, lam=lam)["c0lambda"]
    z_norm = WeightedNorm1D(alpha, lam).zeroth_order(sigma, Z)
    return ProjectionSize(sigma, Z, theta_norm, z_norm)
