"""Approximate layer solutions in dilated Fermi coordinates.

The first approximation is ``v0(s, t) = w(t)``; the corrected layer is

    v1 = w(t) + c2(eps s) psi0(t) + c3(eps s) psi1(t),
    c2 = -eps^2 Q,    c3 = -eps^3 C,

with ``Q = d_zz a / a - 2 k^2`` and ``C = -k^3 + (1/2) d_zz (d_z a / a)`` on the
curve.  Derivatives in ``s`` of the coefficients are taken analytically in
``t`` and by fourth-order differences of the curve coefficients in
``sigma = eps s``, so a layer bundle carries its exact first and second
partials without differencing the sampled field.

Cutoffs ``zeta_n = eta(|t + h| - rho + n)`` with ``rho = delta / eps + c0 |s|``
glue the layer to the step function that is ``+1`` on the side the normal
points to and ``-1`` on the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from artifact.field import PulledBackPotential
from artifact.geometry import Displacement, FermiChart
from artifact.gridfield import DerivativeBundle, GridField
from artifact.numerics import holder_quotient, window_max_2d
from artifact.profile import Corrector, HeteroclinicProfile


def smoothstep5(u) -> np.ndarray:
    """``10u^3 - 15u^4 + 6u^5`` clipped to ``[0, 1]``: the C^2 quintic step."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u ** 3 * (10.0 + u * (-15.0 + 6.0 * u))


def eta(x) -> np.ndarray:
    """Cutoff equal to 1 for ``x <= 1`` and to 0 for ``x >= 2``, quintic in between."""
    return 1.0 - smoothstep5(np.asarray(x, dtype=float) - 1.0)


def step_H(t) -> np.ndarray:
    """Increasing C^2 step equal to ``-1`` for ``t <= -1`` and ``+1`` for ``t >= 1``."""
    return -1.0 + 2.0 * smoothstep5(0.5 * (np.asarray(t, dtype=float) + 1.0))


@dataclass(frozen=True)
class CutoffFamily:
    """Nested cutoffs ``zeta_n(s, t) = eta(|t + h(eps s)| - rho(s) + n)``."""

    eps: float
    delta: float
    c0: float
    h: Displacement = field(default_factory=Displacement.zero)

    def rho(self, s) -> np.ndarray:
        return self.delta / self.eps + self.c0 * np.abs(np.asarray(s, dtype=float))

    def zeta(self, n: int, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return eta(np.abs(np.asarray(t) + self.h(self.eps * s)) - self.rho(s) + n)


def cutoffs_for(chart: FermiChart, eps: float, h: Displacement | None = None) -> CutoffFamily:
    return CutoffFamily(eps=eps, delta=chart.delta, c0=chart.c0, h=h or Displacement.zero())


def _diff_weights(step: float) -> tuple[np.ndarray, np.ndarray]:
    d1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * step)
    d2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * step ** 2)
    return d1, d2


@dataclass(frozen=True)
class CurveCoefficients:
    """``Q`` and ``C`` with their first two ``sigma`` derivatives at the samples ``sigma``."""

    sigma: np.ndarray
    Q: np.ndarray
    dQ: np.ndarray
    d2Q: np.ndarray
    C: np.ndarray
    dC: np.ndarray
    d2C: np.ndarray


def curve_coefficients(pp: PulledBackPotential, sigma, step: float = 1e-3) -> CurveCoefficients:
    """Fourth-order differences of the on-curve coefficients with spacing ``step``."""
    sigma = np.asarray(sigma, dtype=float)
    offsets = step * np.arange(-2, 3)
    oc = pp.on_curve((sigma[..., None] + offsets).ravel())
    Qs = oc["Q"].reshape(sigma.shape + (5,))
    Cs = oc["C"].reshape(sigma.shape + (5,))
    d1, d2 = _diff_weights(step)
    return CurveCoefficients(sigma=sigma, Q=Qs[..., 2], dQ=Qs @ d1, d2Q=Qs @ d2,
                             C=Cs[..., 2], dC=Cs @ d1, d2C=Cs @ d2)


@dataclass
class LayerAnsatz:
    """``v0`` (``order=0``) or ``v1`` (``order=1``) as an analytic function of ``(s, t)``."""

    profile: HeteroclinicProfile
    psi0: Corrector
    psi1: Corrector
    pp: PulledBackPotential
    eps: float
    order: int = 1
    coef_step: float = 1e-3

    def coefficients(self, sigma) -> dict[str, np.ndarray]:
        """``c2, c3`` and their derivatives with respect to ``sigma``."""
        sigma = np.asarray(sigma, dtype=float)
        if self.order == 0:
            z = np.zeros_like(sigma)
            return {k: z for k in ("c2", "dc2", "d2c2", "c3", "dc3", "d2c3")}
        return self.coefficients_from(curve_coefficients(self.pp, sigma, self.coef_step))

    def coefficients_from(self, cc: CurveCoefficients) -> dict[str, np.ndarray]:
        """``c2, c3`` and their ``sigma`` derivatives from a precomputed coefficient table."""
        if self.order == 0:
            z = np.zeros_like(cc.sigma)
            return {k: z for k in ("c2", "dc2", "d2c2", "c3", "dc3", "d2c3")}
        e2, e3 = -self.eps ** 2, -self.eps ** 3
        return {"c2": e2 * cc.Q, "dc2": e2 * cc.dQ, "d2c2": e2 * cc.d2Q,
                "c3": e3 * cc.C, "dc3": e3 * cc.dC, "d2c3": e3 * cc.d2C}

    def bundle_from_coefficients(self, co: dict[str, np.ndarray], t) -> DerivativeBundle:
        """Layer bundle on the tensor grid ``(columns of co) x t``."""
        t = np.asarray(t, dtype=float)
        p = self.profile
        w, wp, wpp = p.w(t), p.wp(t), p.wpp(t)
        g0, g0p, g0pp = self.psi0.psi(t), self.psi0.dpsi(t), self.psi0.d2psi(t)
        g1, g1p, g1pp = self.psi1.psi(t), self.psi1.dpsi(t), self.psi1.d2psi(t)
        col = {k: np.asarray(v)[:, None] for k, v in co.items()}
        e = self.eps
        return DerivativeBundle(
            V=w + col["c2"] * g0 + col["c3"] * g1,
            V_s=e * (col["dc2"] * g0 + col["dc3"] * g1),
            V_t=wp + col["c2"] * g0p + col["c3"] * g1p,
            V_ss=e ** 2 * (col["d2c2"] * g0 + col["d2c3"] * g1),
            V_st=e * (col["dc2"] * g0p + col["dc3"] * g1p),
            V_tt=wpp + col["c2"] * g0pp + col["c3"] * g1pp,
        )

    def bundle(self, s, t) -> DerivativeBundle:
        return self.bundle_from_coefficients(self.coefficients(self.eps * np.asarray(s, dtype=float)), t)

    def correction_bundle(self, s, t) -> DerivativeBundle:
        """Bundle of ``phi1 = v1 - v0`` alone."""
        full = self.bundle(s, t)
        base = LayerAnsatz(self.profile, self.psi0, self.psi1, self.pp, self.eps, order=0).bundle(s, t)
        return full + base.scaled(-1.0)

    def value(self, s, t) -> np.ndarray:
        """Pointwise ``v(s, t)`` for arrays of matching shape."""
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        out = self.profile.w(t)
        if self.order == 0:
            return out
        cc = curve_coefficients(self.pp, self.eps * s, self.coef_step)
        return out - self.eps ** 2 * cc.Q * self.psi0.psi(t) - self.eps ** 3 * cc.C * self.psi1.psi(t)


def build_v0(profile: HeteroclinicProfile, s, t) -> GridField:
    """``w(t)`` on the rectangle, with exact partials."""
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    ones = np.ones((len(s), 1))
    zero = np.zeros((len(s), len(t)))
    b = DerivativeBundle(ones * profile.w(t), zero, ones * profile.wp(t), zero, zero, ones * profile.wpp(t))
    return GridField.from_bundle(b, s, t, name="v0")


def build_phi1(ansatz: LayerAnsatz, s, t) -> GridField:
    """The correction ``phi1 = -eps^2 Q psi0 - eps^3 C psi1`` with exact partials."""
    return GridField.from_bundle(ansatz.correction_bundle(s, t), s, t, name="phi1")


def build_v1(ansatz: LayerAnsatz, s, t) -> GridField:
    return GridField.from_bundle(ansatz.bundle(s, t), s, t, name="v1" if ansatz.order else "v0")


@dataclass
class GlobalApproximation:
    """``zeta3 v + (1 - zeta3) H`` on the dilated plane.

    ``H`` is ``+1`` on the side the normal points to and ``-1`` on the other;
    points outside the chart take the value of ``H``.
    """

    ansatz: LayerAnsatz
    chart: FermiChart
    h: Displacement = field(default_factory=Displacement.zero)

    @property
    def eps(self) -> float:
        return self.ansatz.eps

    @property
    def cutoffs(self) -> CutoffFamily:
        return cutoffs_for(self.chart, self.eps, self.h)

    def side(self, points) -> np.ndarray:
        """``+1`` on the normal side of the dilated curve, ``-1`` on the other."""
        X = self.eps * np.asarray(points, dtype=float)
        curve = self.chart.curve
        above = X[..., 1] - curve.graph(X[..., 0], 0)
        sgn = -curve.sign * np.sign(above)
        return np.where(sgn == 0, 1.0, sgn)

    def fermi(self, points):
        """Dilated Fermi coordinates ``(s, t)`` and a core-tube mask."""
        X = self.eps * np.asarray(points, dtype=float)
        cp = self.chart.inverse(X)
        s = cp.s / self.eps
        t = cp.z / self.eps - self.h(cp.s)
        tube = cp.converged & (np.abs(t + self.h(cp.s)) < self.cutoffs.rho(s))
        return s, t, tube

    def __call__(self, points) -> np.ndarray:
        s, t, tube = self.fermi(points)
        zeta3 = np.where(tube, self.cutoffs.zeta(3, s, t), 0.0)
        out = self.side(points).astype(float)
        if np.any(zeta3 > 0):
            m = zeta3 > 0
            v = self.ansatz.value(s[m], t[m])
            out[m] = zeta3[m] * v + (1.0 - zeta3[m]) * out[m]
        return out

    def layer(self, points) -> np.ndarray:
        """The layer ``v`` itself through the chart inverse (no cutoff)."""
        s, t, _ = self.fermi(points)
        return self.ansatz.value(s, t)


def build_global(ansatz: LayerAnsatz, chart: FermiChart, h: Displacement | None = None) -> GlobalApproximation:
    return GlobalApproximation(ansatz=ansatz, chart=chart, h=h or Displacement.zero())


@dataclass(frozen=True)
class WeightK:
    """Parameters of the blended weight ``zeta2 e^{sigma|t|/2} (1+|eps s|)^mu + (1-zeta2) e^{b1|x1| + b2|x2|}``."""

    sigma: float = 1.2
    mu: float = 2.0
    b1: float = 0.4
    b2: float = 0.4
    tau: float = 0.1

    def __post_init__(self):
        if not self.b1 ** 2 + self.b2 ** 2 < (np.sqrt(2.0) - self.tau) / 2.0:
            raise ValueError("b1^2 + b2^2 must stay below (sqrt 2 - tau) / 2")


def weight_K(weight: WeightK, cutoffs: CutoffFamily, s, t, x) -> np.ndarray:
    """The weight at dilated points ``x`` with Fermi coordinates ``(s, t)`` (``nan`` where outside the chart)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    z2 = np.where(np.isfinite(t), cutoffs.zeta(2, np.nan_to_num(s), np.nan_to_num(t)), 0.0)
    inner = (np.exp(0.5 * weight.sigma * np.abs(np.nan_to_num(t)))
             * (1.0 + np.abs(cutoffs.eps * np.nan_to_num(s))) ** weight.mu)
    outer = np.exp(weight.b1 * np.abs(x[..., 0]) + weight.b2 * np.abs(x[..., 1]))
    return z2 * inner + (1.0 - z2) * outer


def _local_c0lambda(values, steps: tuple[float, float], lam: float, radius: float = 1.0) -> np.ndarray:
    """Window sup of ``|g|`` plus the window sup of directional Hoelder quotients."""
    ds, dt = steps
    hq = np.maximum(holder_quotient(values, ds, lam, radius, axis=0), holder_quotient(values, dt, lam, radius, axis=1))
    return window_max_2d(np.abs(values), steps, radius) + window_max_2d(hq, steps, radius)


def layer_weight(s, t, eps: float, mu: float, sigma: float) -> np.ndarray:
    """``(1 + |eps s|)^mu e^{sigma |t|}`` on the tensor grid."""
    s = np.asarray(s, dtype=float)[:, None]
    t = np.asarray(t, dtype=float)[None, :]
    return (1.0 + np.abs(eps * s)) ** mu * np.exp(sigma * np.abs(t))


def weighted_norms_2d(gf: GridField, eps: float, mu: float = 2.0, sigma: float = 1.2, lam: float = 0.5,
                      band: int = 2) -> dict[str, float]:
    """Surrogates of the weighted ``L^inf``, ``C^{0,lambda}`` and ``C^{2,lambda}`` norms on ``(s, t)``.

    Window sups are taken over unit squares; ``band`` rows and columns at the
    edges are excluded, where differences of the sampled field are one-sided.
    """
    wt = layer_weight(gf.s, gf.t, eps, mu, sigma)
    steps = (gf.ds, gf.dt)
    inner = (slice(band, gf.shape[0] - band), slice(band, gf.shape[1] - band))

    def weighted_sup(local):
        return float(np.max((wt * local)[inner]))

    b = gf.bundle()
    linf = weighted_sup(window_max_2d(np.abs(b.V), steps))
    grad = np.sqrt(b.V_s ** 2 + b.V_t ** 2)
    hess_parts = (b.V_ss, b.V_st, b.V_tt)
    c2 = (max(weighted_sup(_local_c0lambda(d, steps, lam)) for d in hess_parts)
          + weighted_sup(window_max_2d(grad, steps)) + linf)
    return {"linf": linf, "c0lambda": weighted_sup(_local_c0lambda(b.V, steps, lam)), "c2lambda": c2}
