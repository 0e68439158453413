"""Finite differences, cumulative quadrature, slope fits and windowed sup norms.

All helpers act on uniformly spaced samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter, maximum_filter1d

_CENTRAL = {
    (1, 2): np.array([-1.0, 0.0, 1.0]) / 2.0,
    (1, 4): np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
    (1, 6): np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0,
    (2, 2): np.array([1.0, -2.0, 1.0]),
    (2, 4): np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0,
    (2, 6): np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0,
}
# Second-order one-sided stencils used in the edge bands.
_ONE_SIDED = {
    1: np.array([-1.5, 2.0, -0.5]),
    2: np.array([2.0, -5.0, 4.0, -1.0]),
}


def derivative(y, dx: float, n: int = 1, accuracy: int = 4, axis: int = -1) -> np.ndarray:
    """Central difference of order ``accuracy`` for the ``n``-th derivative.

    Points closer to the edge than the half stencil width use second-order
    one-sided differences, so the edge bands are less accurate than the
    interior and are meant to be excluded from sup-norm reports.
    """
    y = np.moveaxis(np.asarray(y, dtype=float), axis, -1)
    coef = _CENTRAL[(n, accuracy)]
    p = len(coef) // 2
    size = y.shape[-1]
    if size < 2 * p + 2:
        raise ValueError("too few samples for the requested stencil")
    out = np.empty_like(y)
    acc = np.zeros(y.shape[:-1] + (size - 2 * p,))
    for k, c in enumerate(coef):
        if c != 0.0:
            acc += c * y[..., k:size - 2 * p + k]
    out[..., p:size - p] = acc
    edge = _ONE_SIDED[n]
    sign = (-1.0) ** n
    for i in range(p):
        out[..., i] = sum(c * y[..., i + k] for k, c in enumerate(edge))
        out[..., size - 1 - i] = sign * sum(c * y[..., size - 1 - i - k] for k, c in enumerate(edge))
    out /= dx ** n
    return np.moveaxis(out, -1, axis)


def edge_band(accuracy: int = 4) -> int:
    """Number of samples on each edge that fall back to one-sided stencils."""
    return accuracy // 2


def _interval_integrals(y: np.ndarray, dx: float) -> np.ndarray:
    """Integrals over consecutive intervals from the cubic through four neighbours.

    The local error is O(dx^5) and varies smoothly from interval to interval, so
    running sums can be differenced again without amplifying an alternating
    error pattern.
    """
    n = y.shape[-1]
    if n < 4:
        raise ValueError("need at least four samples")
    out = np.empty(y.shape[:-1] + (n - 1,))
    out[..., 1:n - 2] = (-y[..., 0:n - 3] + 13.0 * y[..., 1:n - 2] + 13.0 * y[..., 2:n - 1] - y[..., 3:n]) / 24.0
    out[..., 0] = (9.0 * y[..., 0] + 19.0 * y[..., 1] - 5.0 * y[..., 2] + y[..., 3]) / 24.0
    out[..., n - 2] = (y[..., n - 4] - 5.0 * y[..., n - 3] + 19.0 * y[..., n - 2] + 9.0 * y[..., n - 1]) / 24.0
    return out * dx


def cumulative_from_left(y, dx: float) -> np.ndarray:
    """Running integral from the first sample, ``int_{x_0}^{x_i} y``."""
    y = np.asarray(y, dtype=float)
    parts = _interval_integrals(y, dx)
    out = np.zeros_like(y)
    out[..., 1:] = np.cumsum(parts, axis=-1)
    return out


def cumulative_from_right(y, dx: float) -> np.ndarray:
    """Running integral up to the last sample, ``int_{x_i}^{x_end} y``."""
    y = np.asarray(y, dtype=float)
    parts = _interval_integrals(y, dx)
    out = np.zeros_like(y)
    out[..., :-1] = np.cumsum(parts[..., ::-1], axis=-1)[..., ::-1]
    return out


def trapezoid_weights(n: int, dx: float) -> np.ndarray:
    """Composite trapezoid weights on ``n`` uniform samples."""
    wts = np.full(n, dx)
    wts[0] = wts[-1] = 0.5 * dx
    return wts


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of ``log y = slope * log x + intercept``.

    ``exact_zero`` marks data that vanish identically; no slope is forced then.
    ``monotone`` reports whether ``y`` decreases together with ``x``.
    """

    slope: float
    intercept: float
    max_residual: float
    monotone: bool
    exact_zero: bool = False


def fit_loglog(x, y, zero_tol: float = 0.0) -> SlopeFit:
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if np.all(y <= zero_tol):
        return SlopeFit(float("nan"), float("nan"), 0.0, True, exact_zero=True)
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    monotone = bool(np.all(np.diff(ys) > 0))
    if np.any(ys <= 0):
        return SlopeFit(float("nan"), float("nan"), float("inf"), monotone)
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    return SlopeFit(float(slope), float(intercept), float(np.max(np.abs(res))), monotone)


def window_max(values, dx: float, radius: float = 1.0, axis: int = -1) -> np.ndarray:
    """Running maximum of ``values`` over windows of half-width ``radius``."""
    r = max(int(round(radius / dx)), 0)
    return maximum_filter1d(np.asarray(values, dtype=float), size=2 * r + 1, axis=axis, mode="nearest")


def holder_quotient(values, dx: float, lam: float, radius: float = 1.0, axis: int = -1) -> np.ndarray:
    """Local Hoelder quotient of exponent ``lam`` at each sample.

    Difference quotients ``|v(x+m dx) - v(x)| / (m dx)^lam`` are taken over
    dyadic offsets ``m`` up to the window radius and the largest one touching
    each sample is recorded there.
    """
    v = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    out = np.zeros_like(v)
    size = v.shape[-1]
    m = 1
    while m * dx <= radius + 1e-12 and m < size:
        q = np.abs(v[..., m:] - v[..., :-m]) / (m * dx) ** lam
        np.maximum(out[..., m:], q, out=out[..., m:])
        np.maximum(out[..., :-m], q, out=out[..., :-m])
        m *= 2
    return np.moveaxis(out, -1, axis)


def window_max_2d(values, steps: tuple[float, float], radius: float = 1.0) -> np.ndarray:
    """Running maximum over rectangles of half-width ``radius`` in both directions."""
    sizes = tuple(2 * max(int(round(radius / d)), 0) + 1 for d in steps)
    return maximum_filter(np.asarray(values, dtype=float), size=sizes, mode="nearest")
