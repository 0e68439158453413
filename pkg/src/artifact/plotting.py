"""Report figures rendered with the Agg backend.

Every figure is written with the ``Software`` metadata entry removed, so two
runs with the same data produce byte-identical PNG files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_scaling(table, path) -> Path:
    """Log-log plot of every quantity of a scaling table with its fitted slope."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, fit in table.fits.items():
            eps, vals = table.values(name)
            if fit.exact_zero:
                continue
            label = f"{name} (slope {fit.slope:.2f})" if np.isfinite(fit.slope) else f"{name} (no fit)"
            ax.loglog(eps, np.abs(vals), "o-", label=label)
        ax.set_xlabel("eps")
        ax.set_ylabel("sup norm")
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        else:
            ax.text(0.5, 0.5, "all quantities vanish identically", transform=ax.transAxes, ha="center")
        return _save(fig, path)


def plot_kernel(s, h1, h2, path, window: float = 40.0) -> Path:
    """The decaying and growing kernel elements near the origin."""
    s = np.asarray(s)
    m = np.abs(s) <= window
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(s[m], np.asarray(h1)[m], label="h1")
        ax.plot(s[m], np.asarray(h2)[m], label="h2")
        ax.set_xlabel("s")
        ax.legend()
        return _save(fig, path)


def plot_iteration_log(logs: dict[str, list[float]], path, ylabel: str = "update norm") -> Path:
    """Semilog plot of update norms per iteration, one curve per label."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, values in logs.items():
            v = np.asarray(values, dtype=float)
            v = np.where(v > 0, v, np.nan)
            ax.semilogy(np.arange(1, len(v) + 1), v, "o-", label=label)
        ax.set_xlabel("iteration")
        ax.set_ylabel(ylabel)
        ax.legend()
        return _save(fig, path)


def plot_profiles(x, curves: dict[str, np.ndarray], path, xlabel: str = "sigma") -> Path:
    """Line plot of several functions of one variable."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in curves.items():
            ax.plot(x, y, label=label)
        ax.set_xlabel(xlabel)
        ax.legend()
        return _save(fig, path)


def plot_field(gf, path, t_window: float = 8.0) -> Path:
    """Color map of a GridField over ``(s, t)``."""
    m = np.abs(gf.t) <= t_window
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        vmax = float(np.max(np.abs(gf.values))) or 1.0
        im = ax.pcolormesh(gf.s, gf.t[m], gf.values[:, m].T, cmap="RdBu_r", vmin=-vmax, vmax=vmax,
                           shading="auto", rasterized=True)
        fig.colorbar(im, ax=ax, label=gf.name)
        ax.set_xlabel("s")
        ax.set_ylabel("t")
        return _save(fig, path)
