"""The inhomogeneity ``a(x, y)``: derivatives, the two example potentials, the Fermi pullback
and the hypothesis checks on a (field, curve) pair.

Partial derivatives up to order four are generated symbolically and
evaluated with numpy.  Pulled-back partials in Fermi coordinates follow from
the chain rule with ``X_s = (1 - z k) gamma'``, ``X_z = nu``, ``gamma'' = k nu``
and ``nu' = -k gamma'``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from artifact.geometry import FermiChart, PlanarCurve

_X, _Y = sp.symbols("x y", real=True)


class PotentialField:
    """A positive scalar field with partial derivatives ``d^i/dx^i d^j/dy^j a`` for ``i + j <= 4``."""

    max_order = 4

    def __init__(self, partial_factory: Callable[[int, int], Callable], name: str,
                 alpha_decay: float, params: dict | None = None):
        self._factory = partial_factory
        self._cache: dict[tuple[int, int], Callable] = {}
        self.name = name
        self.alpha_decay = float(alpha_decay)
        self.params = dict(params or {})

    def _fn(self, i: int, j: int) -> Callable:
        if i + j > self.max_order:
            raise ValueError(f"derivative order {i + j} exceeds {self.max_order}")
        key = (i, j)
        if key not in self._cache:
            self._cache[key] = self._factory(i, j)
        return self._cache[key]

    def partial(self, i: int, j: int, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = self._fn(i, j)(x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    def value(self, x, y) -> np.ndarray:
        return self.partial(0, 0, x, y)

    def grad(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        return self.partial(1, 0, x, y), self.partial(0, 1, x, y)

    def hess(self, x, y) -> np.ndarray:
        axx, axy, ayy = self.partial(2, 0, x, y), self.partial(1, 1, x, y), self.partial(0, 2, x, y)
        return np.stack([np.stack([axx, axy], -1), np.stack([axy, ayy], -1)], -2)

    def multilinear(self, x, y, vectors) -> np.ndarray:
        """``D^n a(x, y)[v_1, ..., v_n]`` for vectors given as ``(..., 2)`` arrays."""
        n = len(vectors)
        if n == 0:
            return self.value(x, y)
        total = 0.0
        for combo in itertools.product((0, 1), repeat=n):
            i = n - sum(combo)
            coef = 1.0
            for v, c in zip(vectors, combo):
                coef = coef * v[..., c]
            total = total + coef * self.partial(i, n - i, x, y)
        return np.asarray(total)

    def sample_bounds(self, xs, ys) -> tuple[float, float]:
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        vals = self.value(X, Y)
        return float(np.min(vals)), float(np.max(vals))


def field_from_expression(expr, name: str = "custom", alpha_decay: float = 1.0,
                          params: dict | None = None) -> PotentialField:
    """Field from a sympy expression (or string) in ``x`` and ``y``."""
    if isinstance(expr, str):
        expr = sp.sympify(expr, locals={"x": _X, "y": _Y})
    expr = expr.subs({sp.Symbol("x"): _X, sp.Symbol("y"): _Y})

    def factory(i, j):
        return sp.lambdify((_X, _Y), sp.diff(expr, _X, i, _Y, j), modules="numpy")

    return PotentialField(factory, name=name, alpha_decay=alpha_decay, params=params)


def constant_potential(value: float = 1.0) -> PotentialField:
    return field_from_expression(sp.Float(value), name="constant", alpha_decay=1.0, params={"value": value})


def example1_potential(alpha: float = 1.0, eta: float = 1.0) -> PotentialField:
    """``a = 1 + (1 + r(x))^{-(2+alpha)} y^2 / cosh y`` with ``r(x) = sqrt(x^2 + eta^2) - eta``.

    ``r`` is a smooth stand-in for ``|x|`` that differs from it by less than ``eta``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    r = sp.sqrt(_X ** 2 + sp.Float(eta) ** 2) - sp.Float(eta)
    expr = 1 + (1 + r) ** (-(2 + sp.Float(alpha))) * _Y ** 2 / sp.cosh(_Y)
    return field_from_expression(expr, name="example1", alpha_decay=alpha, params={"alpha": alpha, "eta": eta})


def _quintic_blend(y0: float, y1: float, low: float, end_values: tuple[float, float, float]):
    """Quintic in ``y`` equal to ``low`` with flat contact at ``y0`` and matching value,
    slope and curvature ``end_values`` at ``y1``."""
    u = (_Y - y0) / (y1 - y0)
    c = sp.symbols("c0:6")
    poly = sum(c[k] * u ** k for k in range(6))
    eqs = [
        poly.subs(_Y, y0) - low,
        sp.diff(poly, _Y).subs(_Y, y0),
        sp.diff(poly, _Y, 2).subs(_Y, y0),
        poly.subs(_Y, y1) - end_values[0],
        sp.diff(poly, _Y).subs(_Y, y1) - end_values[1],
        sp.diff(poly, _Y, 2).subs(_Y, y1) - end_values[2],
    ]
    sol = sp.solve(eqs, c, dict=True)[0]
    return sp.expand(poly.subs(sol))


def example2_potential(omega: float = 0.5, y_blend: float = 0.9, blend_width: float = 0.3) -> PotentialField:
    """``a(y) = sqrt(1+w^2) y / sqrt((1+w^2) y^2 - w^2)`` above ``y_blend``, blended to a constant below.

    The blend is a quintic on ``[y_blend - blend_width, y_blend]`` with C^2 contact
    on both sides; the constant below it is chosen so the blend stays monotone.
    """
    om = float(omega)
    if not 0.0 < abs(om) <= 1.0 / np.sqrt(2.0) + 1e-15:
        raise ValueError(f"omega must satisfy 0 < |omega| <= 1/sqrt(2), got {om}")
    c = 1.0 + om ** 2
    y_sing = abs(om) / np.sqrt(c)
    y0 = y_blend - blend_width
    if y_blend <= y_sing + 0.05 or blend_width <= 0:
        raise ValueError("blend must start above the singular threshold of the closed form")
    closed = sp.sqrt(c) * _Y / sp.sqrt(c * _Y ** 2 - om ** 2)
    ends = tuple(float(sp.diff(closed, _Y, n).subs(_Y, y_blend)) for n in range(3))
    low = ends[0] - 0.5 * ends[1] * blend_width
    blend = _quintic_blend(y0, y_blend, low, ends)
    slope = sp.lambdify(_Y, sp.diff(blend, _Y), modules="numpy")
    ys = np.linspace(y0, y_blend, 2001)
    if np.max(slope(ys)) > 1e-12 or low <= 0:
        raise ValueError("blend is not monotone or not positive")
    pieces = [
        [sp.lambdify(_Y, sp.diff(closed, _Y, n), modules="numpy") for n in range(5)],
        [sp.lambdify(_Y, sp.diff(blend, _Y, n), modules="numpy") for n in range(5)],
    ]

    def factory(i, j):
        if i > 0:
            return lambda x, y: np.zeros_like(np.asarray(y, dtype=float))

        def fn(x, y):
            y = np.asarray(y, dtype=float)
            out = np.empty_like(y)
            hi = y >= y_blend
            mid = (y >= y0) & ~hi
            lo = y < y0
            out[hi] = pieces[0][j](y[hi])
            out[mid] = pieces[1][j](y[mid])
            out[lo] = low if j == 0 else 0.0
            return out

        return fn

    return PotentialField(factory, name="example2", alpha_decay=2.0,
                          params={"omega": om, "y_blend": y_blend, "blend_width": blend_width, "floor": low})


@dataclass
class PulledBackPotential:
    """``a(s, z) = a(X(s, z))`` and its partials on a Fermi chart."""

    field: PotentialField
    chart: FermiChart

    @property
    def curve(self) -> PlanarCurve:
        return self.chart.curve

    def partials(self, s, z) -> dict[str, np.ndarray]:
        """Pulled-back partials up to fourth order in ``z`` and second order overall in ``s``."""
        s, z = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(z, dtype=float))
        fr = self.curve.frame(s)
        return self.partials_from_frame(fr, z)

    def partials_from_frame(self, fr: dict, z) -> dict[str, np.ndarray]:
        z = np.asarray(z, dtype=float)
        T, N, k, dk = fr["tangent"], fr["normal"], fr["k"], fr["dk"]
        P = fr["gamma"] + z[..., None] * N
        x, y = P[..., 0], P[..., 1]
        D = self.field.multilinear
        a = D(x, y, [])
        g_T, g_N = D(x, y, [T]), D(x, y, [N])
        H_TT, H_TN, H_NN = D(x, y, [T, T]), D(x, y, [T, N]), D(x, y, [N, N])
        J = 1.0 - z * k
        return {
            "a": a,
            "a_s": J * g_T,
            "a_z": g_N,
            "a_ss": -z * dk * g_T + J * k * g_N + J ** 2 * H_TT,
            "a_sz": -k * g_T + J * H_TN,
            "a_zz": H_NN,
            "a_zzz": D(x, y, [N, N, N]),
            "a_zzzz": D(x, y, [N, N, N, N]),
        }

    def on_curve(self, s) -> dict[str, np.ndarray]:
        """Coefficients on the curve used by the Jacobi operator and the expansions."""
        s = np.asarray(s, dtype=float)
        fr = self.curve.frame(s)
        p = self.partials_from_frame(fr, np.zeros_like(s))
        a = p["a"]
        q1, q2, q3, q4 = p["a_z"] / a, p["a_zz"] / a, p["a_zzz"] / a, p["a_zzzz"] / a
        k = fr["k"]
        b = p["a_s"] / a
        dz_b = p["a_sz"] / a - p["a_s"] * p["a_z"] / a ** 2
        dzz_qt = q3 - 3.0 * q2 * q1 + 2.0 * q1 ** 3
        dzzz_qt = q4 - 4.0 * q3 * q1 - 3.0 * q2 ** 2 + 12.0 * q2 * q1 ** 2 - 6.0 * q1 ** 4
        Q = q2 - 2.0 * k ** 2
        F0 = 0.5 * dzz_qt
        return {
            "s": s,
            "k": k, "dk": fr["dk"], "d2k": fr["d2k"],
            "a0": a, "a0_s": p["a_s"], "a0_ss": p["a_ss"],
            "b": b, "q_t": q1, "q_tt": q2,
            "Q": Q,
            "qtilde": Q + 0.5 * p["a_ss"] / a - 0.25 * b ** 2,
            "dz_b": dz_b,
            "dzz_qt": dzz_qt,
            "dzzz_qt": dzzz_qt,
            "A0": 2.0 * k,
            "D0": dz_b + 2.0 * k * b,
            "F0": F0,
            "C": -k ** 3 + F0,
            "criticality": p["a_z"] - k * a,
        }


def pull_back(field: PotentialField, chart: FermiChart) -> PulledBackPotential:
    return PulledBackPotential(field=field, chart=chart)


@dataclass(frozen=True)
class CriticalityResidual:
    s: np.ndarray
    r: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.r)))


def criticality_residual(pp: PulledBackPotential, s) -> CriticalityResidual:
    """``r(s) = d_z a(s, 0) - k(s) a(s, 0)``; zero exactly on stationary curves of the weighted length."""
    s = np.asarray(s, dtype=float)
    return CriticalityResidual(s=s, r=pp.on_curve(s)["criticality"])


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    note: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple[HypothesisCheck, ...]

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def by_name(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {c.name: {"passed": c.passed, **c.measured, **({"note": c.note} if c.note else {})}
                for c in self.checks}


def _not_growing(weighted: np.ndarray, s: np.ndarray, factor: float = 2.0) -> bool:
    """True when the weighted profile on the outer tenth stays within ``factor`` of its inner maximum."""
    outer = np.abs(s) > 0.9 * np.max(np.abs(s))
    inner_max = np.max(weighted[~outer])
    return bool(np.all(np.isfinite(weighted)) and np.max(weighted[outer]) <= factor * max(inner_max, 1e-300))


def hypothesis_report(field: PotentialField, chart: FermiChart, s_max: float = 100.0, n_s: int = 2001,
                      n_z: int = 9, box: float = 20.0, criticality_tol: float = 1e-8) -> HypothesisReport:
    """Check positivity bounds, curve decay, nonparallel ends, field decay in the tube and criticality."""
    curve = chart.curve
    alpha = field.alpha_decay
    checks = []

    xs = np.linspace(-box, box, 161)
    lo, hi = field.sample_bounds(xs, xs)
    s = np.linspace(-s_max, s_max, n_s)
    pp = pull_back(field, chart)
    oc = pp.on_curve(s)
    lo, hi = min(lo, float(np.min(oc["a0"]))), max(hi, float(np.max(oc["a0"])))
    checks.append(HypothesisCheck("bounds", bool(lo > 0 and np.isfinite(hi)), {"m": lo, "M": hi}))

    cw = (1.0 + np.abs(s)) ** (1.0 + curve.alpha_decay) * (np.abs(oc["k"]) + np.abs(oc["dk"]) + np.abs(oc["d2k"]))
    checks.append(HypothesisCheck("curve_decay", _not_growing(cw, s),
                                  {"alpha": curve.alpha_decay, "sup_weighted": float(np.max(cw))}))

    npr = curve.nonparallel_report()
    checks.append(HypothesisCheck("nonparallelism", npr.passes,
                                  {"dot_forward": npr.dot_forward, "opening_angle": npr.opening_angle}))

    frac = np.linspace(-1.0, 1.0, n_z)
    S = np.repeat(s[:, None], n_z, axis=1)
    Z = chart.width(S) * frac[None, :]
    p = pp.partials(S, Z)
    grad = np.hypot(p["a_s"], p["a_z"])
    hess = np.maximum.reduce([np.abs(p["a_ss"]), np.abs(p["a_sz"]), np.abs(p["a_zz"])])
    w1 = np.max((1.0 + np.abs(S)) ** (1.0 + alpha) * grad, axis=1)
    w2 = np.max((1.0 + np.abs(S)) ** (2.0 + alpha) * hess, axis=1)
    tail = s > 0.5 * s_max
    on_axis = np.abs(oc["q_tt"] * oc["a0"]) + np.abs(oc["a0_ss"])
    fitted = float("nan")
    if np.all(on_axis[tail] > 0):
        slope = np.polyfit(np.log(1.0 + s[tail]), np.log(on_axis[tail]), 1)[0]
        fitted = float(-slope - 2.0)
    checks.append(HypothesisCheck("field_decay", _not_growing(w1, s) and _not_growing(w2, s),
                                  {"alpha": alpha, "alpha_fitted": fitted,
                                   "sup_grad_weighted": float(np.max(w1)), "sup_hess_weighted": float(np.max(w2))}))

    crit = float(np.max(np.abs(oc["criticality"])))
    checks.append(HypothesisCheck("criticality", crit < criticality_tol, {"sup_residual": crit}))
    return HypothesisReport(tuple(checks))
