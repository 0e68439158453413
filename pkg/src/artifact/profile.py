"""One-dimensional layer machinery: double wells, the heteroclinic profile and its correctors.

The heteroclinic ``w`` solves ``w'' = F'(w)`` with ``w(+-inf) = +-1``.  A corrector
``psi`` is the bounded solution of ``psi'' - F''(w) psi = g`` for a source ``g``
orthogonal to ``w'``; it is written as ``psi = w' phi`` with

    (w'^2 phi')' = g w',    phi(0) = 0,

so that ``w'^2 phi'(t) = int_{-inf}^t g w'``.  The inner integral is accumulated
from the nearer infinite end, which keeps it accurate in the tails where
``w'^-2`` is huge.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from artifact.numerics import cumulative_from_left, cumulative_from_right

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class DoubleWell:
    """A balanced double-well potential with wells at -1 and +1."""

    F: Callable[[np.ndarray], np.ndarray]
    dF: Callable[[np.ndarray], np.ndarray]
    d2F: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    wells: tuple[float, float] = (-1.0, 1.0)

    @property
    def sigma_plus(self) -> float:
        return float(np.sqrt(self.d2F(self.wells[1])))

    @property
    def sigma_minus(self) -> float:
        return float(np.sqrt(self.d2F(self.wells[0])))

    def is_balanced(self, tol: float = 1e-12) -> bool:
        return abs(float(self.F(self.wells[0])) - float(self.F(self.wells[1]))) <= tol


def make_twin_pit() -> DoubleWell:
    """The quartic well ``F(u) = (1 - u^2)^2 / 4``."""
    return DoubleWell(
        F=lambda u: 0.25 * (1.0 - np.asarray(u) ** 2) ** 2,
        dF=lambda u: np.asarray(u) ** 3 - np.asarray(u),
        d2F=lambda u: 3.0 * np.asarray(u) ** 2 - 1.0,
        name="twin-pit",
    )


@dataclass(frozen=True)
class HeteroclinicProfile:
    """The monotone connection ``w`` from -1 to +1 with its projection constants.

    ``c_star`` is ``int w'^2`` and ``c_hat`` is ``int t^2 w'^2 / c_star``.
    """

    well: DoubleWell
    t: np.ndarray
    dt: float
    t_cut: float
    decay_rate: float
    c_star: float
    c_hat: float
    closed_form: bool
    _w: Callable = field(repr=False)
    _wp: Callable = field(repr=False)

    def w(self, t) -> np.ndarray:
        return self._w(np.asarray(t, dtype=float))

    def wp(self, t) -> np.ndarray:
        return self._wp(np.asarray(t, dtype=float))

    def wpp(self, t) -> np.ndarray:
        return self.well.dF(self.w(t))

    def columns(self) -> dict[str, np.ndarray]:
        """Tabulated ``t, w, w', w''`` for columnar export."""
        return {"t": self.t, "w": self.w(self.t), "wp": self.wp(self.t), "wpp": self.wpp(self.t)}


def make_grid(t_cut: float = 12.0, dt: float = 0.01) -> np.ndarray:
    """Symmetric uniform grid on ``[-t_cut, t_cut]`` with a node at ``t = 0``."""
    n = int(round(t_cut / dt))
    return dt * np.arange(-n, n + 1)


def _twin_pit_w(t):
    return np.tanh(t / SQRT2)


def _twin_pit_wp(t):
    e = np.exp(-SQRT2 * np.abs(t))
    return 2.0 * SQRT2 * e / (1.0 + e) ** 2


def _first_integral_profile(well: DoubleWell, t: np.ndarray):
    """Integrate ``w' = sqrt(2 F(w))`` outwards from the interior critical point of F."""
    lo, hi = well.wells
    w0 = brentq(lambda u: float(well.dF(u)), lo + 1e-6, hi - 1e-6)

    def rhs(_, y):
        return [np.sqrt(max(2.0 * float(well.F(y[0])), 0.0))]

    i0 = int(np.argmin(np.abs(t)))
    right = solve_ivp(rhs, (0.0, t[-1]), [w0], t_eval=t[i0:], method="DOP853", rtol=1e-13, atol=1e-15)
    left = solve_ivp(rhs, (0.0, t[0]), [w0], t_eval=t[: i0 + 1][::-1], method="DOP853", rtol=1e-13, atol=1e-15)
    w = np.concatenate([left.y[0][::-1][:-1], right.y[0]])
    wp = np.sqrt(np.maximum(2.0 * well.F(w), 0.0))
    spline = CubicHermiteSpline(t, w, wp)
    slope = CubicHermiteSpline(t, wp, well.dF(w))

    def w_eval(s):
        return np.where(s > t[-1], hi, np.where(s < t[0], lo, spline(np.clip(s, t[0], t[-1]))))

    def wp_eval(s):
        return np.where(np.abs(s) > t[-1], 0.0, slope(np.clip(s, t[0], t[-1])))

    return w_eval, wp_eval


def solve_heteroclinic(well: DoubleWell, t_cut: float = 12.0, dt: float = 0.01) -> HeteroclinicProfile:
    """Build the heteroclinic profile of ``well`` on a uniform grid.

    The twin-pit well uses the closed form ``tanh(t / sqrt 2)``; other balanced
    wells integrate the first integral ``w' = sqrt(2 F(w))``.
    """
    if not well.is_balanced(1e-10):
        raise ValueError("unbalanced well: the first integral w' = sqrt(2F(w)) does not hold")
    t = make_grid(t_cut, dt)
    if well.name == "twin-pit":
        w_eval, wp_eval, closed = _twin_pit_w, _twin_pit_wp, True
    else:
        w_eval, wp_eval = _first_integral_profile(well, t)
        closed = False
    wp = wp_eval(t)
    c_star = float(simpson(wp ** 2, dx=dt))
    c_hat = float(simpson(t ** 2 * wp ** 2, dx=dt)) / c_star
    decay = min(well.sigma_plus, well.sigma_minus)
    return HeteroclinicProfile(
        well=well, t=t, dt=dt, t_cut=t_cut, decay_rate=decay, c_star=c_star, c_hat=c_hat,
        closed_form=closed, _w=w_eval, _wp=wp_eval,
    )


def project_onto_wprime(g, p: HeteroclinicProfile, tail_tol: float = 1e-10) -> float:
    """``int g w' dt`` by composite Simpson on the profile grid.

    ``g`` is a callable of ``t`` or an array sampled on ``p.t``.  A warning is
    raised when the integrand at the grid ends is not negligible.
    """
    vals = g(p.t) if callable(g) else np.asarray(g, dtype=float)
    integrand = vals * p.wp(p.t)
    tail = (abs(integrand[0]) + abs(integrand[-1])) / p.decay_rate
    if tail > tail_tol:
        warnings.warn(f"projection tail estimate {tail:.2e} exceeds {tail_tol:.1e}", RuntimeWarning)
    return float(simpson(integrand, dx=p.dt))


@dataclass(frozen=True)
class Corrector:
    """Tabulated bounded solution of ``psi'' - F''(w) psi = source``."""

    name: str
    t: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    profile: HeteroclinicProfile = field(repr=False)
    source: Callable = field(repr=False)
    decay_rate: float = SQRT2
    _psi: Callable = field(default=None, repr=False)
    _dpsi: Callable = field(default=None, repr=False)

    def psi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) <= self.t[-1]
        return np.where(inside, self._psi(np.clip(t, self.t[0], self.t[-1])), 0.0)

    def dpsi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) <= self.t[-1]
        return np.where(inside, self._dpsi(np.clip(t, self.t[0], self.t[-1])), 0.0)

    def d2psi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        p = self.profile
        inside = np.abs(t) <= self.t[-1]
        return np.where(inside, p.well.d2F(p.w(t)) * self.psi(t) + self.source(t), 0.0)

    @property
    def curvatures(self) -> np.ndarray:
        p = self.profile
        return p.well.d2F(p.w(self.t)) * self.values + self.source(self.t)

    def weighted_sup(self, sigma: float) -> float:
        """``sup e^{sigma |t|} |psi(t)|`` over the table."""
        return float(np.max(np.exp(sigma * np.abs(self.t)) * np.abs(self.values)))


def _tail_integral(func: Callable, a: float, b: float) -> float:
    val, err = quad(func, a, b, epsabs=1e-300, epsrel=1e-12, limit=200)
    return float(val)


def solve_corrector(p: HeteroclinicProfile, source: Callable, name: str = "psi",
                    solvability_tol: float = 1e-10) -> Corrector:
    """Bounded solution with ``psi(0) = 0`` by variation of parameters.

    Raises ``ValueError`` when ``source`` is not orthogonal to ``w'`` or when
    an accumulated integral loses its tail, naming the offending point.
    """
    t, dt = p.t, p.dt
    wp = p.wp(t)
    integrand = source(t) * wp
    if p.closed_form:
        def full(s):
            return float(source(np.asarray(s)) * p.wp(np.asarray(s)))
        tail_left = _tail_integral(full, -np.inf, t[0])
        tail_right = _tail_integral(full, t[-1], np.inf)
    else:
        tail_left = integrand[0] / p.decay_rate
        tail_right = integrand[-1] / p.decay_rate
    from_left = tail_left + cumulative_from_left(integrand, dt)
    from_right = tail_right + cumulative_from_right(integrand, dt)
    total = from_left[-1] + tail_right
    if abs(total) > solvability_tol:
        raise ValueError(f"source is not orthogonal to w' (integral {total:.3e})")
    inner = np.where(t <= 0.0, from_left, -from_right)
    if not np.all(np.isfinite(inner / wp ** 2)):
        bad = t[~np.isfinite(inner / wp ** 2)][0]
        raise ValueError(f"tail integral lost accuracy at t = {bad:.3f}")
    q = inner / wp ** 2
    i0 = int(np.argmin(np.abs(t)))
    phi = np.empty_like(t)
    phi[i0:] = cumulative_from_left(q[i0:], dt)
    phi[: i0 + 1] = -cumulative_from_right(q[: i0 + 1], dt)
    values = wp * phi
    slopes = p.wpp(t) * phi + inner / wp
    curv = p.well.d2F(p.w(t)) * values + source(t)
    return Corrector(
        name=name, t=t, values=values, slopes=slopes, profile=p, source=source,
        decay_rate=p.decay_rate,
        _psi=CubicHermiteSpline(t, values, slopes),
        _dpsi=CubicHermiteSpline(t, slopes, curv),
    )


def corrector_psi0(p: HeteroclinicProfile) -> Corrector:
    """Corrector for the source ``t w'(t)``."""
    return solve_corrector(p, lambda t: np.asarray(t) * p.wp(t), name="psi0")


def corrector_psi1(p: HeteroclinicProfile) -> Corrector:
    """Corrector for ``g_perp = t^2 w' - c_hat w'``, the part of ``t^2 w'`` orthogonal to ``w'``."""
    c_hat = p.c_hat
    return solve_corrector(p, lambda t: (np.asarray(t) ** 2 - c_hat) * p.wp(t), name="psi1")


def g_perp(p: HeteroclinicProfile) -> Callable:
    """The source of ``psi1`` as a callable."""
    return lambda t: (np.asarray(t) ** 2 - p.c_hat) * p.wp(t)
