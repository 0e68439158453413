"""The Allen-Cahn error ``S(v) = Delta v + eps (grad a / a) . grad v - F'(v)`` in dilated Fermi coordinates.

Three evaluations are provided:

* :func:`apply_fermi_exact` uses the exact metric of the chart
  ``x = gamma(eps s) / eps + (t + h(eps s)) nu(eps s)``.  With
  ``J = 1 - eps (t + h) k`` and ``D_s = d_s - eps h' d_t``::

      Delta v = v_tt + J^-2 [v_ss - 2 eps h' v_st + eps^2 h'^2 v_tt - eps^2 h'' v_t]
                - eps k / J v_t + eps^2 (t + h) k' / J^3 D_s v

  and the drift term is ``eps / a [(grad a . T) / J D_s v + (grad a . nu) v_t]``
  with ``a`` evaluated at the physical point ``gamma + eps (t + h) nu``.
* :func:`apply_fermi_expanded` keeps the truncated expansion that assumes a
  stationary curve (``d_z a = k a`` on it).
* :func:`euclidean_oracle` differences a globally defined function with the
  five-point stencil in the plane.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from artifact.ansatz import CurveCoefficients, CutoffFamily, LayerAnsatz, curve_coefficients, eta
from artifact.field import PulledBackPotential
from artifact.geometry import Displacement, PlanarCurve
from artifact.gridfield import DerivativeBundle, GridField
from artifact.numerics import SlopeFit, fit_loglog
from artifact.profile import DoubleWell, HeteroclinicProfile


@dataclass(frozen=True)
class ColumnGeometry:
    """Curve data and displacement at the columns ``sigma = eps s``."""

    eps: float
    s: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    k: np.ndarray
    dk: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    d2h: np.ndarray


def column_geometry(curve: PlanarCurve, eps: float, s, h=None) -> ColumnGeometry:
    """Frame and displacement at ``sigma = eps s``.

    ``h`` is a :class:`Displacement`, ``None`` (zero) or a tuple ``(h, h', h'')``
    of arrays already sampled at the columns.
    """
    s = np.asarray(s, dtype=float)
    sigma = eps * s
    fr = curve.frame(sigma)
    if h is None:
        h = Displacement.zero()
    if isinstance(h, Displacement):
        hv, dh, d2h = h(sigma, 0), h(sigma, 1), h(sigma, 2)
    else:
        hv, dh, d2h = (np.broadcast_to(np.asarray(a, dtype=float), s.shape) for a in h)
    return ColumnGeometry(eps, s, sigma, fr["gamma"], fr["tangent"], fr["normal"], fr["k"], fr["dk"], hv, dh, d2h)


def _col(a) -> np.ndarray:
    return np.asarray(a)[:, None]


class FermiOperator:
    """The exact operator on the grid ``columns x t`` with its metric and drift factors cached."""

    def __init__(self, pp: PulledBackPotential, geom: ColumnGeometry, t):
        eps = geom.eps
        self.pp, self.geom, self.eps = pp, geom, eps
        self.t = np.asarray(t, dtype=float)
        self.z = self.t[None, :] + _col(geom.h)
        self.J = 1.0 - eps * self.z * _col(geom.k)
        if np.any(np.abs(self.J) < 0.1):
            raise ValueError("chart Jacobian factor below 0.1 on the requested rectangle")
        P = geom.gamma[:, None, :] + eps * self.z[..., None] * geom.normal[:, None, :]
        x, y = P[..., 0], P[..., 1]
        a = pp.field.value(x, y)
        gx, gy = pp.field.grad(x, y)
        T, N = geom.tangent[:, None, :], geom.normal[:, None, :]
        self.a = a
        self.gT_over_a = (gx * T[..., 0] + gy * T[..., 1]) / a
        self.gN_over_a = (gx * N[..., 0] + gy * N[..., 1]) / a

    def parts(self, b: DerivativeBundle) -> tuple[np.ndarray, np.ndarray]:
        """Laplacian and drift term ``eps (grad a / a) . grad v``."""
        eps, geom, J, z = self.eps, self.geom, self.J, self.z
        k, dk = _col(geom.k), _col(geom.dk)
        dh, d2h = _col(geom.dh), _col(geom.d2h)
        Ds = b.V_s - eps * dh * b.V_t
        lap = (b.V_tt
               + (b.V_ss - 2.0 * eps * dh * b.V_st + eps ** 2 * dh ** 2 * b.V_tt - eps ** 2 * d2h * b.V_t) / J ** 2
               - eps * k / J * b.V_t
               + eps ** 2 * z * dk / J ** 3 * Ds)
        drift = eps * (self.gT_over_a / J * Ds + self.gN_over_a * b.V_t)
        return lap, drift

    def apply(self, b: DerivativeBundle, well: DoubleWell | None) -> np.ndarray:
        lap, drift = self.parts(b)
        out = lap + drift
        if well is not None:
            out = out - well.dF(b.V)
        return out


def fermi_exact_parts(b: DerivativeBundle, t, pp: PulledBackPotential, geom: ColumnGeometry):
    """Laplacian and drift term of the exact operator on the grid ``columns x t``."""
    return FermiOperator(pp, geom, t).parts(b)


def apply_fermi_exact(b: DerivativeBundle, t, pp: PulledBackPotential, geom: ColumnGeometry,
                      well: DoubleWell | None) -> np.ndarray:
    """``S(v)`` from the exact chart metric; ``well=None`` drops the ``F'(v)`` term."""
    return FermiOperator(pp, geom, t).apply(b, well)


def apply_fermi_expanded(b: DerivativeBundle, t, pp: PulledBackPotential, geom: ColumnGeometry,
                         well: DoubleWell | None, oc: dict | None = None) -> np.ndarray:
    """``S(v)`` from the truncated expansion.

    The operator keeps, with ``z = t + h``, ``A0 = 2k``, ``B0 = k' + D0`` and
    ``C0 = -k^3 + F0``::

        v_tt + v_ss + eps b v_s - eps^2 {h'' + b h' + (2k^2 - q_tt) h} v_t
        - eps^2 (k^2 - q_tt + q_t^2) t v_t - 2 eps h' v_st + eps^2 h'^2 v_tt
        + eps z A0 [v_ss - 2 eps h' v_st - eps^2 h'' v_t + eps^2 h'^2 v_tt]
        + eps^2 z B0 [v_s - eps h' v_t] + eps^3 z^2 C0 v_t

    where ``b = d_s a / a``, ``q_t = d_z a / a`` and ``q_tt = d_zz a / a`` on the curve.
    """
    eps = geom.eps
    if oc is None:
        oc = pp.on_curve(geom.sigma)
    t = np.asarray(t, dtype=float)[None, :]
    h, dh, d2h = _col(geom.h), _col(geom.dh), _col(geom.d2h)
    k, bb = _col(oc["k"]), _col(oc["b"])
    q_t, q_tt = _col(oc["q_t"]), _col(oc["q_tt"])
    A0 = _col(oc["A0"])
    B0 = _col(oc["dk"] + oc["D0"])
    C0 = _col(oc["C"])
    z = t + h
    out = (b.V_tt + b.V_ss + eps * bb * b.V_s
           - eps ** 2 * (d2h + bb * dh + (2.0 * k ** 2 - q_tt) * h) * b.V_t
           - eps ** 2 * (k ** 2 - q_tt + q_t ** 2) * t * b.V_t
           - 2.0 * eps * dh * b.V_st + eps ** 2 * dh ** 2 * b.V_tt
           + eps * z * A0 * (b.V_ss - 2.0 * eps * dh * b.V_st - eps ** 2 * d2h * b.V_t + eps ** 2 * dh ** 2 * b.V_tt)
           + eps ** 2 * z * B0 * (b.V_s - eps * dh * b.V_t)
           + eps ** 3 * z ** 2 * C0 * b.V_t)
    if well is not None:
        out = out - well.dF(b.V)
    return out


def euclidean_oracle(v: Callable[[np.ndarray], np.ndarray], pp: PulledBackPotential, eps: float, points,
                     step: float, well: DoubleWell | None) -> np.ndarray:
    """Five-point ``Delta v + eps (grad a / a)(eps x) . grad v - F'(v)`` at dilated points ``x``."""
    p = np.asarray(points, dtype=float)
    ex = np.array([step, 0.0])
    ey = np.array([0.0, step])
    c = v(p)
    xp, xm, yp, ym = v(p + ex), v(p - ex), v(p + ey), v(p - ey)
    lap = (xp + xm + yp + ym - 4.0 * c) / step ** 2
    gx_v = (xp - xm) / (2.0 * step)
    gy_v = (yp - ym) / (2.0 * step)
    X = eps * p
    a = pp.field.value(X[..., 0], X[..., 1])
    gx, gy = pp.field.grad(X[..., 0], X[..., 1])
    out = lap + eps * (gx * gx_v + gy * gy_v) / a
    if well is not None:
        out = out - well.dF(c)
    return out


@dataclass(frozen=True)
class Projection:
    """``Pi(s) = int S(s, t) w'(t) dt`` per column with a tail estimate."""

    s: np.ndarray
    values: np.ndarray
    tail: float


def projection_pi(Sv: GridField, profile: HeteroclinicProfile, tail_tol: float = 1e-10) -> Projection:
    """Simpson quadrature of every column against ``w'``; warns when the tails are not negligible."""
    integrand = Sv.values * profile.wp(Sv.t)[None, :]
    tail = float(np.max(np.abs(integrand[:, 0]) + np.abs(integrand[:, -1])) / profile.decay_rate)
    if tail > tail_tol:
        warnings.warn(f"projection tail estimate {tail:.2e} exceeds {tail_tol:.1e}", RuntimeWarning)
    return Projection(Sv.s, simpson(integrand, dx=Sv.dt, axis=1), tail)


@dataclass(frozen=True)
class ScalingRow:
    quantity: str
    eps: float
    value: float


@dataclass(frozen=True)
class ScalingTable:
    rows: list[ScalingRow]
    fits: dict[str, SlopeFit]

    def values(self, quantity: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.quantity == quantity]
        return np.array([r.eps for r in rows]), np.array([r.value for r in rows])

    def slope(self, quantity: str) -> float:
        return self.fits[quantity].slope


def scaling_study(builder: Callable[[float], dict[str, float]], eps_list, zero_tol: float = 1e-14) -> ScalingTable:
    """Evaluate ``builder(eps)`` for each ``eps`` and fit log-log slopes per quantity.

    Quantities that vanish identically are reported as exact zeros; data that do
    not decrease with ``eps`` are flagged and get no slope.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("a scaling study needs at least three eps values")
    rows: list[ScalingRow] = []
    for e in eps_list:
        for name, val in builder(e).items():
            rows.append(ScalingRow(name, e, float(val)))
    fits = {}
    for name in dict.fromkeys(r.quantity for r in rows):
        eps_arr = np.array([r.eps for r in rows if r.quantity == name])
        vals = np.array([r.value for r in rows if r.quantity == name])
        fit = fit_loglog(eps_arr, vals, zero_tol)
        if not fit.exact_zero and not fit.monotone:
            fit = SlopeFit(float("nan"), float("nan"), fit.max_residual, False)
        fits[name] = fit
    return ScalingTable(rows, fits)


@dataclass(frozen=True)
class LayerError:
    """Error of the corrected layer and its remainder on the grid ``columns x t``.

    ``R1`` is what remains of ``S(v1)`` after the explicit terms along ``w'``
    and ``psi0'``, and ``Stilde`` recombines the explicit terms with the cut-off
    remainder::

        S(v1) = -eps^2 J[h] w' + eps^3 C c_hat w' + eps^4 Q psi0' h''
                - eps^3 (t + h) A0 h'' w' + R1
        Stilde = -eps^2 J[h] w' + eps^3 C c_hat w' + eps^4 Q psi0' h''
                 + zeta0 (-eps^3 (t + h) A0 h'' w' + R1)
    """

    s: np.ndarray
    t: np.ndarray
    S1: np.ndarray
    R1: np.ndarray
    Stilde: np.ndarray
    zeta0: np.ndarray
    Jh: np.ndarray
    v1: DerivativeBundle
    operator: FermiOperator


def layer_error(ansatz: LayerAnsatz, well: DoubleWell, geom: ColumnGeometry, t, cutoffs: CutoffFamily,
                cc: CurveCoefficients | None = None, oc: dict | None = None) -> LayerError:
    """``S(v1)``, ``R1`` and ``Stilde`` for the displacement carried by ``geom``."""
    eps = ansatz.eps
    t = np.asarray(t, dtype=float)
    if cc is None:
        cc = curve_coefficients(ansatz.pp, geom.sigma, ansatz.coef_step)
    if oc is None:
        oc = ansatz.pp.on_curve(geom.sigma)
    b = ansatz.bundle_from_coefficients(ansatz.coefficients_from(cc), t)
    op = FermiOperator(ansatz.pp, geom, t)
    S1 = op.apply(b, well)
    Jh = geom.d2h + oc["b"] * geom.dh - oc["Q"] * geom.h
    p = ansatz.profile
    wp = p.wp(t)[None, :]
    z = t[None, :] + _col(geom.h)
    along = (-eps ** 2 * _col(Jh) * wp + eps ** 3 * _col(oc["C"]) * p.c_hat * wp
             + eps ** 4 * _col(oc["Q"] * geom.d2h) * ansatz.psi0.dpsi(t)[None, :])
    a0_term = -eps ** 3 * z * _col(oc["A0"] * geom.d2h) * wp
    R1 = S1 - along - a0_term
    zeta0 = eta(np.abs(z) - _col(cutoffs.rho(geom.s)))
    Stilde = along + zeta0 * (a0_term + R1)
    return LayerError(geom.s, t, S1, R1, Stilde, zeta0, Jh, b, op)


def layer_scaling_quantities(scenario, eps: float, sigma, t, h_test: Displacement | None = None,
                             oc: dict | None = None) -> dict[str, float]:
    """Sup norms whose ``eps``-scaling characterizes the layer ansatz around ``h = 0``.

    ``S0`` is ``sup |S(v0)|``; ``S1r`` is ``sup |S(v1) - eps^3 C c_hat w'|``;
    ``expanded_vs_exact`` compares the truncated and exact operators on ``v1``;
    ``Pi_plus_J`` is ``sup |Pi(S(v0)) + eps^2 c_star J[h]|`` for the displacement
    ``h_test`` (only when given).
    """
    sc = scenario
    pp, p = sc.pp, sc.profile
    sigma = np.asarray(sigma, dtype=float)
    t = np.asarray(t, dtype=float)
    if oc is None:
        oc = pp.on_curve(sigma)
    s = sigma / eps
    v0 = LayerAnsatz(p, sc.psi0, sc.psi1, pp, eps, order=0).bundle(s, t)
    v1 = LayerAnsatz(p, sc.psi0, sc.psi1, pp, eps, order=1).bundle(s, t)
    geom = column_geometry(sc.curve, eps, s, None)
    op = FermiOperator(pp, geom, t)
    S0 = op.apply(v0, sc.well)
    S1 = op.apply(v1, sc.well)
    S1r = S1 - eps ** 3 * _col(oc["C"]) * p.c_hat * p.wp(t)[None, :]
    Sx = apply_fermi_expanded(v1, t, pp, geom, sc.well, oc)
    out = {"S0": float(np.max(np.abs(S0))), "S1r": float(np.max(np.abs(S1r))),
           "expanded_vs_exact": float(np.max(np.abs(Sx - S1)))}
    if h_test is not None:
        gh = column_geometry(sc.curve, eps, s, h_test)
        S0h = apply_fermi_exact(v0, t, pp, gh, sc.well)
        Jh = h_test(sigma, 2) + oc["b"] * h_test(sigma, 1) - oc["Q"] * h_test(sigma, 0)
        Pi = projection_pi(GridField(s, t, S0h), p).values
        out["Pi_plus_J"] = float(np.max(np.abs(Pi + eps ** 2 * p.c_star * Jh)))
    return out
