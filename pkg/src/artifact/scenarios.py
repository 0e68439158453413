"""Ready-made curve and potential pairs with their one-dimensional layer data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from artifact import field as fieldmod
from artifact import geometry as geo
from artifact.profile import (
    Corrector,
    DoubleWell,
    HeteroclinicProfile,
    corrector_psi0,
    corrector_psi1,
    make_twin_pit,
    solve_heteroclinic,
)

SCENARIOS = ("example1", "example2", "line-constant", "custom")


@dataclass
class Scenario:
    """Everything needed to build layers around one weighted curve."""

    name: str
    curve: geo.PlanarCurve
    potential: fieldmod.PotentialField
    chart: geo.FermiChart
    well: DoubleWell
    profile: HeteroclinicProfile
    psi0: Corrector
    psi1: Corrector
    params: dict = field(default_factory=dict)

    @property
    def pp(self) -> fieldmod.PulledBackPotential:
        return fieldmod.pull_back(self.potential, self.chart)

    @property
    def alpha(self) -> float:
        return self.potential.alpha_decay


def build_scenario(name: str, alpha: float = 1.0, omega: float = 0.5, eta: float = 1.0,
                   delta: float = 0.25, t_cut: float = 12.0, dt: float = 0.01,
                   curve_expr: str | None = None, potential_expr: str | None = None,
                   orientation: str = "negative") -> Scenario:
    """Assemble a named scenario.

    ``custom`` takes a graph expression in ``x`` and a potential expression in
    ``x, y`` (sympy syntax); the limit slopes of the graph are read off at the
    ends of the arclength table.
    """
    if name == "example1":
        graph = geo.line_graph()
        pot = fieldmod.example1_potential(alpha=alpha, eta=eta)
    elif name == "example2":
        graph = geo.hyperbola_graph(omega)
        pot = fieldmod.example2_potential(omega=omega)
    elif name == "line-constant":
        graph = geo.line_graph()
        pot = fieldmod.constant_potential(1.0)
    elif name == "custom":
        if not curve_expr or not potential_expr:
            raise ValueError("custom scenario needs curve and potential expressions")
        graph = geo.graph_from_expression(curve_expr, name="custom-graph")
        pot = fieldmod.field_from_expression(potential_expr, name="custom", alpha_decay=alpha)
    else:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    curve = geo.from_graph(graph, orientation=orientation, alpha_decay=pot.alpha_decay)
    chart = geo.FermiChart(curve, delta=delta)
    well = make_twin_pit()
    profile = solve_heteroclinic(well, t_cut=t_cut, dt=dt)
    params = {"alpha": pot.alpha_decay, "omega": omega, "eta": eta, "delta": delta, "c0": float(chart.c0)}
    return Scenario(name, curve, pot, chart, well, profile, corrector_psi0(profile), corrector_psi1(profile), params)


def symmetric_axis(half_width: float, step: float) -> np.ndarray:
    """Uniform grid on ``[-half_width, half_width]`` through 0."""
    n = int(round(half_width / step))
    return step * np.arange(-n, n + 1)
