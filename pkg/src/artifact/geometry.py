"""Planar graph curves parameterized by arclength, and Fermi charts around them.

Sign convention.  The unit normal is ``nu = o * (f', -1) / L`` with ``L = sqrt(1 + f'^2)``
and orientation ``o = +1`` ("negative", pointing down for a flat graph) or
``o = -1`` ("positive").  Curvature is defined through the chart metric,

    k := -nu' . gamma',   so that   d/ds X(s, z) = (1 - z k) gamma',

which gives ``k = -o f'' / L^3``.  With this choice the metric of the chart is
``(1 - z k)^2 ds^2 + dz^2`` and the stationarity condition of the weighted
length reads ``d_z a = k a``.  Flipping the orientation flips both ``z`` and
``k`` and leaves every product ``z k`` unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp
from scipy.interpolate import CubicHermiteSpline

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)

ORIENTATIONS = {"negative": 1, "positive": -1}


@dataclass(frozen=True)
class GraphFunction:
    """A scalar function ``f(x)`` with derivatives up to order four."""

    derivs: tuple[Callable, ...]
    name: str = "graph"
    slopes_at_infinity: tuple[float, float] | None = None

    def __call__(self, x, n: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.derivs[n](x), x.shape).astype(float)


def graph_from_expression(expr, name: str = "custom-graph",
                          slopes_at_infinity: tuple[float, float] | None = None) -> GraphFunction:
    """Graph function from a sympy expression (or string) in the symbol ``x``."""
    x = sp.Symbol("x", real=True)
    if isinstance(expr, str):
        expr = sp.sympify(expr, locals={"x": x})
    expr = expr.subs(sp.Symbol("x"), x)
    derivs = tuple(sp.lambdify(x, sp.diff(expr, x, n), modules="numpy") for n in range(5))
    return GraphFunction(derivs=derivs, name=name, slopes_at_infinity=slopes_at_infinity)


def line_graph() -> GraphFunction:
    """The horizontal axis ``f = 0``."""
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    return GraphFunction(derivs=(zero,) * 5, name="line", slopes_at_infinity=(0.0, 0.0))


def hyperbola_graph(omega: float) -> GraphFunction:
    """``f(x) = sqrt(1 + omega^2 x^2)`` with limit slopes ``-|omega|`` and ``+|omega|``."""
    om = abs(float(omega))
    return graph_from_expression(f"sqrt(1 + {om}**2 * x**2)", name="hyperbola-graph",
                                 slopes_at_infinity=(-om, om))


@dataclass(frozen=True)
class NonparallelReport:
    """Forward tangent product at the two ends and the opening angle of the outward rays."""

    dot_forward: float
    opening_angle: float
    passes: bool


def nonparallelism(dir_plus, dir_minus, margin: float = 1e-6) -> NonparallelReport:
    """Check that the two ends of a curve do not leave along the same ray.

    ``dir_plus`` and ``dir_minus`` are the forward unit tangents at ``s -> +inf``
    and ``s -> -inf``.  The outward rays are ``dir_plus`` and ``-dir_minus``;
    they coincide when the forward product equals ``-1``.
    """
    dp = np.asarray(dir_plus, dtype=float)
    dm = np.asarray(dir_minus, dtype=float)
    dot = float(np.dot(dp, dm) / (np.linalg.norm(dp) * np.linalg.norm(dm)))
    theta = float(np.arccos(np.clip(-dot, -1.0, 1.0)))
    return NonparallelReport(dot_forward=dot, opening_angle=theta, passes=dot > -1.0 + margin)


@dataclass
class PlanarCurve:
    """Arclength parameterization of the graph ``(x, f(x))``.

    Arclength is tabulated at panel nodes of width ``panel`` on
    ``[-x_max, x_max]`` with 8-point Gauss-Legendre panels and completed by a
    local Gauss-Legendre integral from the nearest node; ``x(s)`` is recovered
    by Newton iteration on ``s(x)``.
    """

    graph: GraphFunction
    orientation: str = "negative"
    alpha_decay: float = 1.0
    x_max: float = 400.0
    panel: float = 0.05
    _x_nodes: np.ndarray = field(init=False, repr=False)
    _s_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {sorted(ORIENTATIONS)}")
        n = int(round(self.x_max / self.panel))
        self._x_nodes = self.panel * np.arange(-n, n + 1)
        a, b = self._x_nodes[:-1], self._x_nodes[1:]
        pieces = self._gl(a, b)
        s = np.concatenate([[0.0], np.cumsum(pieces)])
        self._s_nodes = s - s[n]
        bad = ~np.isfinite(self.speed(self._x_nodes))
        if np.any(bad):
            raise ValueError("non-finite derivative samples along the graph")

    @property
    def sign(self) -> int:
        return ORIENTATIONS[self.orientation]

    @property
    def s_max(self) -> float:
        return float(min(self._s_nodes[-1], -self._s_nodes[0]))

    def speed(self, x) -> np.ndarray:
        return np.sqrt(1.0 + self.graph(x, 1) ** 2)

    def _gl(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[..., None] + half[..., None] * _GL_NODES
        return half * np.sum(_GL_WEIGHTS * self.speed(pts), axis=-1)

    def s_of_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        j = np.clip(np.rint(x / self.panel).astype(int) + (len(self._x_nodes) // 2), 0, len(self._x_nodes) - 1)
        return self._s_nodes[j] + self._gl(self._x_nodes[j], x)

    def x_of_s(self, s, tol: float = 1e-14, max_iter: int = 30) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        x = np.interp(s, self._s_nodes, self._x_nodes)
        for _ in range(max_iter):
            step = (self.s_of_x(x) - s) / self.speed(x)
            x = x - step
            if np.all(np.abs(step) <= tol * (1.0 + np.abs(x))):
                break
        return x

    def frame(self, s) -> dict[str, np.ndarray]:
        """Point, unit tangent and normal, curvature and its first two arclength derivatives."""
        x = self.x_of_s(s)
        return self.frame_at_x(x)

    def frame_at_x(self, x) -> dict[str, np.ndarray]:
        f0, f1, f2, f3, f4 = (self.graph(x, n) for n in range(5))
        L = np.sqrt(1.0 + f1 ** 2)
        o = self.sign
        tangent = np.stack([1.0 / L, f1 / L], axis=-1)
        normal = o * np.stack([f1 / L, -1.0 / L], axis=-1)
        kappa = f2 / L ** 3
        kappa_x = f3 / L ** 3 - 3.0 * f1 * f2 ** 2 / L ** 5
        kappa_xx = (f4 / L ** 3 - 9.0 * f1 * f2 * f3 / L ** 5 - 3.0 * f2 ** 3 / L ** 5
                    + 15.0 * f1 ** 2 * f2 ** 3 / L ** 7)
        L_x = f1 * f2 / L
        return {
            "x": x,
            "gamma": np.stack([x, f0], axis=-1),
            "tangent": tangent,
            "normal": normal,
            "k": -o * kappa,
            "dk": -o * kappa_x / L,
            "d2k": -o * (kappa_xx - kappa_x * L_x / L) / L ** 2,
            "speed": L,
        }

    def gamma(self, s) -> np.ndarray:
        return self.frame(s)["gamma"]

    def tangent(self, s) -> np.ndarray:
        return self.frame(s)["tangent"]

    def normal(self, s) -> np.ndarray:
        return self.frame(s)["normal"]

    def curvature(self, s) -> np.ndarray:
        return self.frame(s)["k"]

    def asymptotic_dirs(self) -> tuple[np.ndarray, np.ndarray]:
        """Forward unit tangents as ``s -> +inf`` and ``s -> -inf``."""
        if self.graph.slopes_at_infinity is not None:
            m_minus, m_plus = self.graph.slopes_at_infinity
        else:
            m_minus = float(self.graph(-self.x_max, 1))
            m_plus = float(self.graph(self.x_max, 1))
        dp = np.array([1.0, m_plus]) / np.hypot(1.0, m_plus)
        dm = np.array([1.0, m_minus]) / np.hypot(1.0, m_minus)
        return dp, dm

    def nonparallel_report(self, margin: float = 1e-6) -> NonparallelReport:
        dp, dm = self.asymptotic_dirs()
        return nonparallelism(dp, dm, margin)

    def default_c0(self) -> float:
        """Flare slope ``0.1 |sin(theta / 2)|`` from the opening angle of the outward rays."""
        return 0.1 * abs(np.sin(0.5 * self.nonparallel_report().opening_angle))

    def decay_profile(self, s) -> np.ndarray:
        """``(1 + |s|)^{1+alpha} (|k| + |k'| + |k''|)`` on the samples ``s``."""
        fr = self.frame(s)
        return (1.0 + np.abs(s)) ** (1.0 + self.alpha_decay) * (np.abs(fr["k"]) + np.abs(fr["dk"]) + np.abs(fr["d2k"]))


def from_graph(graph: GraphFunction, orientation: str = "negative", alpha_decay: float = 1.0,
               x_max: float = 400.0, panel: float = 0.05) -> PlanarCurve:
    """Arclength-parameterized curve of a graph with the chosen normal orientation."""
    return PlanarCurve(graph=graph, orientation=orientation, alpha_decay=alpha_decay, x_max=x_max, panel=panel)


@dataclass(frozen=True)
class ChartPoint:
    """Result of a chart inversion; ``inside`` is false for points outside the neighborhood."""

    s: np.ndarray
    z: np.ndarray
    inside: np.ndarray
    converged: np.ndarray


@dataclass
class FermiChart:
    """The map ``X(s, z) = gamma(s) + z nu(s)`` on ``|z| < delta + c0 |s|``."""

    curve: PlanarCurve
    delta: float = 0.25
    c0: float | None = None
    newton_tol: float = 1e-13
    max_iter: int = 60

    def __post_init__(self):
        if self.c0 is None:
            self.c0 = self.curve.default_c0()

    def forward(self, s, z) -> np.ndarray:
        s, z = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(z, dtype=float))
        fr = self.curve.frame(s)
        return fr["gamma"] + z[..., None] * fr["normal"]

    def width(self, s) -> np.ndarray:
        return self.delta + self.c0 * np.abs(s)

    def jacobian_factor(self, s, z) -> np.ndarray:
        return 1.0 - np.asarray(z) * self.curve.curvature(s)

    def inverse(self, points) -> ChartPoint:
        """Newton solve of ``x = gamma(s) + z nu(s)`` seeded at the graph point above ``x``."""
        p = np.asarray(points, dtype=float)
        s = self.curve.s_of_x(p[..., 0])
        fr = self.curve.frame(s)
        z = np.sum((p - fr["gamma"]) * fr["normal"], axis=-1)
        converged = np.zeros(s.shape, dtype=bool)
        scale = 1.0 + np.linalg.norm(p, axis=-1)
        for _ in range(self.max_iter):
            fr = self.curve.frame(s)
            diff = p - fr["gamma"] - z[..., None] * fr["normal"]
            jac = 1.0 - z * fr["k"]
            jac = np.where(np.abs(jac) < 1e-3, 1e-3, jac)
            ds = np.sum(diff * fr["tangent"], axis=-1) / jac
            dz = np.sum(diff * fr["normal"], axis=-1)
            s = s + ds
            z = z + dz
            converged = np.abs(ds) + np.abs(dz) <= self.newton_tol * scale
            if np.all(converged):
                break
        fr = self.curve.frame(s)
        resid = np.linalg.norm(p - fr["gamma"] - z[..., None] * fr["normal"], axis=-1)
        converged = resid <= 1e-10 * scale
        inside = converged & (np.abs(z) < self.width(s)) & (np.abs(1.0 - z * fr["k"]) > 0.1)
        return ChartPoint(s=s, z=z, inside=inside, converged=converged)


@dataclass(frozen=True)
class Displacement:
    """A normal displacement ``h(sigma)`` of the curve with two derivatives."""

    func: Callable[[np.ndarray, int], np.ndarray] | None = None
    label: str = "zero"

    def __call__(self, sigma, n: int = 0) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        if self.func is None:
            return np.zeros_like(sigma)
        return np.asarray(self.func(sigma, n), dtype=float) + np.zeros_like(sigma)

    @property
    def is_zero(self) -> bool:
        return self.func is None

    @classmethod
    def zero(cls) -> "Displacement":
        return cls()

    @classmethod
    def from_expression(cls, expr: str, label: str | None = None) -> "Displacement":
        x = sp.Symbol("x", real=True)
        e = sp.sympify(expr, locals={"x": x})
        fs = [sp.lambdify(x, sp.diff(e, x, n), modules="numpy") for n in range(3)]

        def func(sigma, n):
            return fs[n](sigma)

        return cls(func=func, label=label or expr)

    @classmethod
    def from_samples(cls, sigma, h, dh, d2h, label: str = "tabulated") -> "Displacement":
        """Hermite interpolation of tabulated ``h, h', h''``; zero outside the table."""
        sigma = np.asarray(sigma, dtype=float)
        spl0 = CubicHermiteSpline(sigma, h, dh)
        spl1 = CubicHermiteSpline(sigma, dh, d2h)
        spl2 = CubicHermiteSpline(sigma, d2h, np.gradient(d2h, sigma))
        splines = (spl0, spl1, spl2)

        def func(x, n):
            inside = (x >= sigma[0]) & (x <= sigma[-1])
            return np.where(inside, splines[n](np.clip(x, sigma[0], sigma[-1])), 0.0)

        return cls(func=func, label=label)

    def scaled(self, factor: float) -> "Displacement":
        if self.func is None:
            return self
        base = self.func
        return Displacement(func=lambda s, n: factor * base(s, n), label=f"{factor}*{self.label}")


@dataclass
class DilatedChart:
    """The chart ``x = gamma(eps s) / eps + (t + h(eps s)) nu(eps s)`` in the dilated plane."""

    chart: FermiChart
    eps: float
    h: Displacement = field(default_factory=Displacement.zero)

    def forward(self, s, t) -> np.ndarray:
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        sigma = self.eps * s
        fr = self.chart.curve.frame(sigma)
        return fr["gamma"] / self.eps + (t + self.h(sigma))[..., None] * fr["normal"]

    def valid(self, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.abs(np.asarray(t) + self.h(self.eps * s)) < self.chart.delta / self.eps + self.chart.c0 * np.abs(s)

    def rho(self, s) -> np.ndarray:
        """Half-width ``delta / eps + c0 |s|`` of the widening core tube."""
        return self.chart.delta / self.eps + self.chart.c0 * np.abs(np.asarray(s, dtype=float))

    def inverse(self, points) -> ChartPoint:
        base = self.chart.inverse(self.eps * np.asarray(points, dtype=float))
        s = base.s / self.eps
        t = base.z / self.eps - self.h(base.s)
        return ChartPoint(s=s, z=t, inside=base.inside & self.valid(s, t), converged=base.converged)

    def jacobian_factor(self, s, t) -> np.ndarray:
        sigma = self.eps * np.asarray(s, dtype=float)
        return 1.0 - self.eps * (np.asarray(t) + self.h(sigma)) * self.chart.curve.curvature(sigma)


def dilated_chart(chart: FermiChart, eps: float, h: Displacement | None = None) -> DilatedChart:
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    return DilatedChart(chart=chart, eps=eps, h=h if h is not None else Displacement.zero())
