"""The Jacobi operator ``J h = h'' + b h' - Q h`` of a weighted curve.

Here ``b = d_s a / a`` and ``Q = d_zz a / a - 2 k^2`` on the curve, with weight
``a0(s) = a(s, 0)``.  The self-adjoint form is ``a0 J h = (a0 h')' - a0 Q h`` and
the substitution ``h = a0^{-1/2} u`` turns ``J h = 0`` into ``u'' = qtilde u`` with
``qtilde = Q + a0''/(2 a0) - (a0'/a0)^2 / 4``.

Kernel elements are integrated inwards from asymptotic data at the ends of the
grid; the bounded right inverse is the variation of parameters formula with
the kernel pair normalized to weighted Wronskian one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PPoly, make_interp_spline

from artifact.field import PulledBackPotential
from artifact.numerics import (
    cumulative_from_left,
    cumulative_from_right,
    derivative,
    holder_quotient,
    window_max,
)


@dataclass
class JacobiSystem:
    """Coefficients of the Jacobi operator tabulated on a uniform symmetric grid."""

    s: np.ndarray
    a0: np.ndarray
    a0_s: np.ndarray
    a0_ss: np.ndarray
    k: np.ndarray
    Q: np.ndarray
    alpha_decay: float
    label: str = ""
    _qt_spline: object = field(default=None, repr=False)

    def __post_init__(self):
        self._qt_spline = make_interp_spline(self.s, self.qtilde, k=5)
        pp = PPoly.from_spline(self._qt_spline)
        self._breaks = pp.x
        self._coefs = np.ascontiguousarray(pp.c.T)

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def b(self) -> np.ndarray:
        return self.a0_s / self.a0

    @property
    def qtilde(self) -> np.ndarray:
        return liouville_transform(self)

    def qtilde_at(self, s) -> np.ndarray:
        return self._qt_spline(s)

    def qtilde_scalar(self, s: float) -> float:
        """Fast scalar evaluation of the quintic spline of ``qtilde``."""
        x = self._breaks
        i = min(max(int(np.searchsorted(x, s, side="right")) - 1, 0), len(x) - 2)
        c = self._coefs[i]
        d = s - x[i]
        return float(((((c[0] * d + c[1]) * d + c[2]) * d + c[3]) * d + c[4]) * d + c[5])

    def apply(self, h, accuracy: int = 6) -> np.ndarray:
        """``J h`` by central differences on the grid (edge bands are one-sided)."""
        d1 = derivative(h, self.ds, 1, accuracy)
        d2 = derivative(h, self.ds, 2, accuracy)
        return d2 + self.b * d1 - self.Q * h

    def apply_selfadjoint(self, h, accuracy: int = 6) -> np.ndarray:
        """``((a0 h')' - a0 Q h) / a0`` by central differences."""
        flux = self.a0 * derivative(h, self.ds, 1, accuracy)
        return derivative(flux, self.ds, 1, accuracy) / self.a0 - self.Q * h

    def decay_profile(self) -> np.ndarray:
        return (1.0 + np.abs(self.s)) ** (2.0 + self.alpha_decay) * np.abs(self.Q)


def make_s_grid(s_max: float = 200.0, ds: float = 0.002) -> np.ndarray:
    n = int(round(s_max / ds))
    return ds * np.arange(-n, n + 1)


def assemble(pp: PulledBackPotential, s_max: float = 200.0, ds: float = 0.002,
             alpha_decay: float | None = None, label: str = "") -> JacobiSystem:
    """Tabulate ``a0, a0', a0'', k, Q`` along the curve on ``[-s_max, s_max]``."""
    s = make_s_grid(s_max, ds)
    oc = pp.on_curve(s)
    alpha = pp.field.alpha_decay if alpha_decay is None else alpha_decay
    return JacobiSystem(s=s, a0=oc["a0"], a0_s=oc["a0_s"], a0_ss=oc["a0_ss"], k=oc["k"], Q=oc["Q"],
                        alpha_decay=alpha, label=label)


def liouville_transform(sys: JacobiSystem) -> np.ndarray:
    """``qtilde = Q + a0''/(2 a0) - (a0'/a0)^2 / 4``."""
    return sys.Q + 0.5 * sys.a0_ss / sys.a0 - 0.25 * (sys.a0_s / sys.a0) ** 2


@dataclass
class KernelPair:
    """Two kernel elements of ``J``: ``h1`` bounded as ``s -> +inf``, ``h2`` bounded as ``s -> -inf``.

    When the pair is degenerate (``h1`` is bounded on both sides), ``h2`` is
    replaced by the solution growing at ``+inf`` so that the pair stays a basis.
    ``W`` is the weighted Wronskian ``a0 (h1 h2' - h1' h2)``, normalized to one.
    """

    s: np.ndarray
    h1: np.ndarray
    dh1: np.ndarray
    d2h1: np.ndarray
    h2: np.ndarray
    dh2: np.ndarray
    d2h2: np.ndarray
    W: np.ndarray
    alpha3: float
    degenerate: bool
    scale: float
    s_seed: float

    @property
    def wronskian_drift(self) -> float:
        mean = np.mean(self.W)
        return float(np.max(np.abs(self.W - mean)) / abs(mean))


def _integrate_pair(sys: JacobiSystem, s_start: float, seeds, s_eval, rtol: float, max_step: float):
    """Integrate ``u'' = qtilde u`` for two seeds at once; returns ``(u1, u1', u2, u2')``."""
    q = sys.qtilde_scalar

    def rhs(s, y):
        qs = q(s)
        return [y[1], qs * y[0], y[3], qs * y[2]]

    y0 = [seeds[0][0], seeds[0][1], seeds[1][0], seeds[1][1]]
    sol = solve_ivp(rhs, (s_start, s_eval[-1]), y0, t_eval=s_eval, method="DOP853",
                    rtol=rtol, atol=rtol * 1e-3, max_step=max_step)
    if not sol.success:
        raise RuntimeError(f"kernel integration failed: {sol.message}")
    return sol.y


def construct_kernel(sys: JacobiSystem, rtol: float = 1e-12, degeneracy_tol: float = 1e-6,
                     max_step: float = 0.5) -> KernelPair:
    """Kernel pair from asymptotic seeds at both ends of the grid.

    On ``s >= 0`` the solutions ``u ~ s`` and ``utilde ~ 1`` are seeded at the
    right end with data ``(s_max, 1)`` and ``(1, 0)``; their mirrors ``v, vtilde``
    are seeded at the left end.  The two bases are connected at ``s = 0``.
    ``max_step`` caps the step so that dense output stays accurate enough to be
    differenced on the grid.
    """
    s = sys.s
    i0 = int(np.argmin(np.abs(s)))
    s_seed = float(s[-1])
    right = s[i0:][::-1]
    left = s[: i0 + 1]
    u, du, ut, dut = _integrate_pair(sys, s_seed, [(s_seed, 1.0), (1.0, 0.0)], right, rtol, max_step)
    v, dv, vt, dvt = _integrate_pair(sys, -s_seed, [(s_seed, -1.0), (1.0, 0.0)], left, rtol, max_step)
    u, du, ut, dut = u[::-1], du[::-1], ut[::-1], dut[::-1]

    # Values at s = 0: right-half arrays start there, left-half arrays end there.
    M_left = np.array([[v[-1], vt[-1]], [dv[-1], dvt[-1]]])
    M_right = np.array([[u[0], ut[0]], [du[0], dut[0]]])
    alpha3, alpha4 = np.linalg.solve(M_left, [ut[0], dut[0]])
    beta3, beta4 = np.linalg.solve(M_right, [vt[-1], dvt[-1]])
    degenerate = abs(alpha3) <= degeneracy_tol

    U1 = np.concatenate([alpha3 * v[:-1] + alpha4 * vt[:-1], ut])
    dU1 = np.concatenate([alpha3 * dv[:-1] + alpha4 * dvt[:-1], dut])
    if degenerate:
        gamma3, gamma4 = np.linalg.solve(M_left, [u[0], du[0]])
        U2 = np.concatenate([gamma3 * v[:-1] + gamma4 * vt[:-1], u])
        dU2 = np.concatenate([gamma3 * dv[:-1] + gamma4 * dvt[:-1], du])
    else:
        U2 = np.concatenate([vt[:-1], beta3 * u + beta4 * ut])
        dU2 = np.concatenate([dvt[:-1], beta3 * du + beta4 * dut])

    root = np.sqrt(sys.a0)
    b = sys.b

    def to_h(U, dU):
        h = U / root
        dh = (dU - 0.5 * b * U) / root
        d2h = -b * dh + sys.Q * h
        return h, dh, d2h

    h1, dh1, d2h1 = to_h(U1, dU1)
    h2, dh2, d2h2 = to_h(U2, dU2)
    W = sys.a0 * (h1 * dh2 - dh1 * h2)
    scale = float(W[i0])
    h1, dh1, d2h1 = h1 / scale, dh1 / scale, d2h1 / scale
    W = W / scale
    return KernelPair(s=s, h1=h1, dh1=dh1, d2h1=d2h1, h2=h2, dh2=dh2, d2h2=d2h2, W=W,
                      alpha3=float(alpha3), degenerate=bool(degenerate), scale=scale, s_seed=s_seed)


def kernel_residual(sys: JacobiSystem, kp: KernelPair, accuracy: int = 6) -> tuple[float, float]:
    """Finite-difference ``sup |J h_i| / max(1, |h_i|)`` over the interior grid for both kernel elements.

    The scaling by ``max(1, |h_i|)`` keeps the check meaningful where the
    growing element is large and second differences are limited by roundoff.
    """
    band = 8 * accuracy
    out = []
    for h in (kp.h1, kp.h2):
        r = np.abs(sys.apply(h, accuracy)) / np.maximum(1.0, np.abs(h))
        out.append(float(np.max(r[band:-band])))
    return out[0], out[1]


def growth_limits(kp: KernelPair, window: float = 20.0) -> dict[str, float]:
    """Mean of ``h_i(s) / |s|`` over the last ``window`` of each unbounded side."""
    s = kp.s
    right = s > s[-1] - window
    left = s < s[0] + window
    return {"h1_left": float(np.mean(kp.h1[left] / np.abs(s[left]))),
            "h2_right": float(np.mean(kp.h2[right] / np.abs(s[right])))}


@dataclass(frozen=True)
class NondegeneracyCertificate:
    pass_by_sign: bool
    pass_by_kernel: bool | None
    min_Q: float
    max_Q: float
    decay_ok: bool
    alpha3: float | None

    @property
    def certified(self) -> bool:
        return bool(self.pass_by_sign or self.pass_by_kernel)


def nondegeneracy_check(sys: JacobiSystem, kp: KernelPair | None = None, q_floor: float = -1e-12,
                        q_tol: float = 1e-8, degeneracy_tol: float = 1e-6) -> NondegeneracyCertificate:
    """Certify that ``J`` has no bounded kernel, by the sign of ``Q`` or by the connection coefficient."""
    prof = sys.decay_profile()
    outer = np.abs(sys.s) > 0.9 * np.max(np.abs(sys.s))
    decay_ok = bool(np.max(prof[outer]) <= 2.0 * max(np.max(prof[~outer]), 1e-300))
    min_q, max_q = float(np.min(sys.Q)), float(np.max(sys.Q))
    by_cor = bool(min_q >= q_floor and max_q > q_tol and decay_ok)
    by_kernel = None
    alpha3 = None
    if kp is not None:
        alpha3 = kp.alpha3
        by_kernel = bool(abs(kp.alpha3) > degeneracy_tol)
    return NondegeneracyCertificate(by_cor, by_kernel, min_q, max_q, decay_ok, alpha3)


@dataclass(frozen=True)
class LinearSolve:
    s: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    d2h: np.ndarray
    f: np.ndarray


def solve_linear(sys: JacobiSystem, kp: KernelPair, f) -> LinearSolve:
    """``h = -h1 int_{-inf}^s a0 h2 f - h2 int_s^inf a0 h1 f`` so that ``J h = f``.

    Integrals are truncated at the grid ends; the truncation adds only kernel
    elements, so ``J h = f`` holds on the whole grid.
    """
    if kp.degenerate:
        raise ValueError("kernel pair is degenerate: no bounded right inverse is certified")
    f = np.broadcast_to(np.asarray(f, dtype=float), sys.s.shape)
    A = cumulative_from_left(sys.a0 * kp.h2 * f, sys.ds)
    B = cumulative_from_right(sys.a0 * kp.h1 * f, sys.ds)
    h = -kp.h1 * A - kp.h2 * B
    dh = -kp.dh1 * A - kp.dh2 * B
    d2h = -kp.d2h1 * A - kp.d2h2 * B + f * kp.W
    return LinearSolve(s=sys.s, h=h, dh=dh, d2h=d2h, f=np.array(f))


@dataclass(frozen=True)
class WeightedNorm1D:
    """Surrogate of the weighted ``C^{2,lambda}`` norm with decay exponent ``alpha``."""

    alpha: float
    lam: float = 0.5
    radius: float = 1.0

    def second_order(self, s, h, dh, d2h) -> float:
        s = np.asarray(s, dtype=float)
        w1 = (1.0 + np.abs(s)) ** (1.0 + self.alpha)
        return float(np.max(np.abs(h)) + np.max(w1 * np.abs(dh)) + self.zeroth_order(s, d2h))

    def zeroth_order(self, s, g) -> float:
        """``sup_s (1+|s|)^{2+alpha} (window sup |g| + window Hoelder quotient of g)``."""
        s = np.asarray(s, dtype=float)
        ds = float(s[1] - s[0])
        w2 = (1.0 + np.abs(s)) ** (2.0 + self.alpha)
        local = window_max(np.abs(g), ds, self.radius) + window_max(holder_quotient(g, ds, self.lam, self.radius),
                                                                     ds, self.radius)
        return float(np.max(w2 * local))


def weighted_norm_1d(s, h, dh, d2h, alpha: float, lam: float = 0.5) -> float:
    return WeightedNorm1D(alpha, lam).second_order(s, h, dh, d2h)


def solution_norm(sys: JacobiSystem, sol: LinearSolve, lam: float = 0.5) -> float:
    return WeightedNorm1D(sys.alpha_decay, lam).second_order(sol.s, sol.h, sol.dh, sol.d2h)


def data_norm(sys: JacobiSystem, f, lam: float = 0.5) -> float:
    return WeightedNorm1D(sys.alpha_decay, lam).zeroth_order(sys.s, f)
