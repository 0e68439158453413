"""Command-line experiment runner.

Usage::

    artifact {hypotheses,kernel,scaling,reduce,projected,all} [--config FILE] [--out DIR]
             [--eps 0.2,0.1,0.05] [--threads N]

The configuration is an INI file; every key is optional and defaults to the
values in :data:`DEFAULTS`.  Each run writes CSV tables whose first line is
``# config_hash: <hash>``, GridField files for two-dimensional fields, PNG
figures next to the tables and one ``summary.json``.  Identical configurations
produce identical files.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

COMMANDS = ("hypotheses", "kernel", "scaling", "reduce", "projected")

DEFAULTS: dict[str, dict[str, str]] = {
    "experiment": {
        "scenario": "example1",
        "alpha": "1.0",
        "omega": "0.5",
        "eta": "1.0",
        "delta": "0.25",
        "orientation": "negative",
        "eps": "0.2, 0.1, 0.05",
    },
    "grids": {
        "profile_dt": "0.01",
        "jacobi_s_max": "200",
        "jacobi_ds": "0.002",
        "scaling_sigma_half": "4",
        "scaling_dsigma": "0.005",
        "scaling_t_half": "12",
        "scaling_dt": "0.02",
        "projected_sigma_half": "4",
        "projected_dsigma": "0.005",
        "projected_t_half": "12",
        "projected_dt": "0.05",
        "reduction_sigma_max": "16",
        "reduction_column_stride": "10",
        "reduction_t_half": "12",
        "reduction_dt": "0.1",
    },
    "scaling": {"test_displacement": "0.3*exp(-x**2)"},
    "reduction": {
        "ball_K": "10",
        "max_iter": "50",
        "tol": "1e-10",
        "g2_mode": "surrogate",
        "probe_amplitude": "0.5",
        "probe_iterations": "4",
    },
    "projected": {"bc": "neumann", "tol": "1e-12", "max_iter": "40"},
    "custom": {"curve": "", "potential": ""},
}

STRING_KEYS = {("experiment", "scenario"), ("experiment", "orientation"), ("experiment", "eps"),
               ("scaling", "test_displacement"), ("reduction", "g2_mode"), ("projected", "bc"),
               ("custom", "curve"), ("custom", "potential")}
INT_KEYS = {("grids", "reduction_column_stride"), ("reduction", "max_iter"), ("reduction", "probe_iterations"),
            ("projected", "max_iter")}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass
class ExperimentConfig:
    """Resolved configuration: one value per section and key of :data:`DEFAULTS`."""

    values: dict[str, dict] = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def eps_list(self) -> list[float]:
        return self.values["experiment"]["eps"]

    def canonical(self) -> str:
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]


def _parse_eps(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"eps list {text!r} is not a comma-separated list of numbers") from exc
    if not vals or any(not (0.0 < v < 1.0) for v in vals):
        raise ConfigError(f"eps values must lie in (0, 1), got {text!r}")
    return sorted(set(vals), reverse=True)


def load_config(path: str | None = None, eps_override: str | None = None) -> ExperimentConfig:
    """Read an INI file over the defaults and validate types and ranges."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
                user.optionxform = str
                user.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        for section in user.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"unknown section [{section}]; known: {', '.join(DEFAULTS)}")
            for key, value in user.items(section):
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                parser.set(section, key, value)
    if eps_override is not None:
        parser.set("experiment", "eps", eps_override)
    values: dict[str, dict] = {}
    for section, keys in DEFAULTS.items():
        values[section] = {}
        for key in keys:
            raw = parser.get(section, key).strip()
            if (section, key) in STRING_KEYS:
                values[section][key] = raw
            elif (section, key) in INT_KEYS:
                try:
                    values[section][key] = int(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}") from exc
            else:
                try:
                    num = float(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}") from exc
                if not math.isfinite(num):
                    raise ConfigError(f"[{section}] {key} must be finite")
                values[section][key] = num
    values["experiment"]["eps"] = _parse_eps(values["experiment"]["eps"])
    exp = values["experiment"]
    if exp["scenario"] == "example2" and not (0.0 < abs(exp["omega"]) <= 1.0 / math.sqrt(2.0)):
        raise ConfigError(f"example2 needs 0 < |omega| <= 1/sqrt(2), got omega = {exp['omega']}")
    if exp["orientation"] not in ("negative", "positive"):
        raise ConfigError("orientation must be 'negative' or 'positive'")
    for key, val in values["grids"].items():
        if val <= 0:
            raise ConfigError(f"[grids] {key} must be positive")
    return ExperimentConfig(values)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    try:
        import numpy as np

        if isinstance(v, np.floating):
            return repr(float(v))
        if isinstance(v, np.integer):
            return str(int(v))
        if isinstance(v, np.bool_):
            return "1" if v else "0"
    except ImportError:  # pragma: no cover
        pass
    return str(v)


def write_csv(path: Path, header: list[str], rows, config_hash: str) -> Path:
    """CSV with a ``# config_hash`` first line and ``repr`` formatting of floats."""
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash: {config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int) and not isinstance(obj, bool):
        return obj
    try:
        f = float(obj)
    except (TypeError, ValueError):
        return str(obj)
    if isinstance(obj, (bool,)) or type(obj).__name__ == "bool_":
        return bool(obj)
    return f if math.isfinite(f) else str(f)


class Runner:
    """Runs the requested experiments and collects pass/fail flags."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.results: dict[str, dict] = {}
        self._scenario = None
        self._reduction = None

    @property
    def scenario(self):
        if self._scenario is None:
            from artifact.scenarios import build_scenario

            e = self.cfg["experiment"]
            c = self.cfg["custom"]
            self._scenario = build_scenario(
                e["scenario"], alpha=e["alpha"], omega=e["omega"], eta=e["eta"], delta=e["delta"],
                dt=self.cfg["grids"]["profile_dt"], curve_expr=c["curve"] or None,
                potential_expr=c["potential"] or None, orientation=e["orientation"])
        return self._scenario

    def csv(self, name: str, header, rows) -> Path:
        return write_csv(self.out / name, list(header), rows, self.cfg.hash)

    def run_hypotheses(self) -> dict:
        from artifact.field import hypothesis_report
        from artifact.jacobi import assemble, construct_kernel, nondegeneracy_check

        sc = self.scenario
        g = self.cfg["grids"]
        report = hypothesis_report(sc.potential, sc.chart)
        system = assemble(sc.pp, s_max=g["jacobi_s_max"], ds=g["jacobi_ds"], label=sc.name)
        cert = nondegeneracy_check(system, construct_kernel(system))
        rows = []
        for c in report.checks:
            for key, val in sorted(c.measured.items()):
                rows.append((c.name, c.passed, key, val))
        rows.append(("nondegeneracy", cert.certified, "min_Q", cert.min_Q))
        rows.append(("nondegeneracy", cert.certified, "max_Q", cert.max_Q))
        rows.append(("nondegeneracy", cert.certified, "pass_by_sign", cert.pass_by_sign))
        rows.append(("nondegeneracy", cert.certified, "pass_by_kernel", cert.pass_by_kernel))
        self.csv("hypotheses.csv", ["check", "passed", "quantity", "value"], rows)
        passed = report.all_pass and cert.certified
        return {"passed": passed, "checks": report.as_dict(), "nondegenerate": cert.certified,
                "message": "all hypotheses pass" if passed else "hypothesis check failed"}

    def run_kernel(self) -> dict:
        import numpy as np

        from artifact.jacobi import assemble, construct_kernel, kernel_residual, nondegeneracy_check
        from artifact.plotting import plot_kernel

        sc = self.scenario
        g = self.cfg["grids"]
        system = assemble(sc.pp, s_max=g["jacobi_s_max"], ds=g["jacobi_ds"], label=sc.name)
        kp = construct_kernel(system)
        cert = nondegeneracy_check(system, kp)
        r1, r2 = kernel_residual(system, kp)
        stride = max(1, int(round(0.1 / system.ds)))
        idx = np.arange(0, len(system.s), stride)
        self.csv("kernel.csv", ["s", "h1", "h2", "Q", "b"],
                 zip(system.s[idx], kp.h1[idx], kp.h2[idx], system.Q[idx], system.b[idx]))
        plot_kernel(system.s, kp.h1, kp.h2, self.out / "kernel.png")
        diag = {"wronskian_drift": kp.wronskian_drift, "residual_h1": r1, "residual_h2": r2,
                "degenerate": kp.degenerate, "certified": cert.certified, "alpha3": cert.alpha3,
                "min_Q": cert.min_Q, "max_Q": cert.max_Q}
        self.csv("kernel_diagnostics.csv", ["quantity", "value"], sorted(diag.items()))
        ok = cert.certified and kp.wronskian_drift < 1e-6 and max(r1, r2) < 1e-6
        return {"passed": bool(ok), **diag}

    def run_scaling(self) -> dict:
        from artifact.geometry import Displacement
        from artifact.plotting import plot_scaling
        from artifact.residual import layer_scaling_quantities, scaling_study
        from artifact.scenarios import symmetric_axis

        sc = self.scenario
        g = self.cfg["grids"]
        sigma = symmetric_axis(g["scaling_sigma_half"], g["scaling_dsigma"])
        t = symmetric_axis(g["scaling_t_half"], g["scaling_dt"])
        expr = self.cfg["scaling"]["test_displacement"]
        h = Displacement.from_expression(expr) if expr else None
        oc = sc.pp.on_curve(sigma)
        table = scaling_study(lambda e: layer_scaling_quantities(sc, e, sigma, t, h, oc), self.cfg.eps_list)
        self.csv("scaling.csv", ["quantity", "eps", "value"], ((r.quantity, r.eps, r.value) for r in table.rows))
        self.csv("scaling_slopes.csv", ["quantity", "slope", "intercept", "exact_zero", "monotone"],
                 ((k, f.slope, f.intercept, f.exact_zero, f.monotone) for k, f in table.fits.items()))
        plot_scaling(table, self.out / "scaling.png")
        slopes = {k: f.slope for k, f in table.fits.items()}
        return {"passed": True, "slopes": slopes,
                "exact_zero": {k: f.exact_zero for k, f in table.fits.items()}}

    def _reduction_context(self):
        if self._reduction is None:
            from artifact.reduction import reduction_context

            g = self.cfg["grids"]
            self._reduction = reduction_context(
                self.scenario, s_max=g["jacobi_s_max"], ds=g["jacobi_ds"], sigma_max=g["reduction_sigma_max"],
                column_stride=g["reduction_column_stride"], t_half=g["reduction_t_half"], dt=g["reduction_dt"])
        return self._reduction

    def _projected_context(self):
        from artifact.projected2d import projected_context

        g = self.cfg["grids"]
        return projected_context(self.scenario, sigma_half=g["projected_sigma_half"], dsigma=g["projected_dsigma"],
                                 t_half=g["projected_t_half"], dt=g["projected_dt"], bc=self.cfg["projected"]["bc"])

    def run_reduce(self) -> dict:
        import numpy as np

        from artifact.plotting import plot_iteration_log
        from artifact.projected2d import coupling_callback
        from artifact.reduction import contraction_probe, solve_reduced

        ctx = self._reduction_context()
        r = self.cfg["reduction"]
        if not ctx.certificate.certified:
            return {"passed": False, "message": "Jacobi operator not certified nondegenerate; no reduced solve"}
        cfg = {"ball_K": r["ball_K"], "max_iter": r["max_iter"], "tol": r["tol"], "g2_mode": r["g2_mode"]}
        if r["g2_mode"] == "full":
            cfg["projected"] = coupling_callback(self._projected_context())
        log_rows, probe_rows, h_cols = [], [], {}
        per_eps = {}
        logs = {}
        passed = True
        stride = max(1, int(round(0.05 / ctx.system.ds)))
        idx = np.flatnonzero(np.abs(ctx.system.s) <= 20.0)[::stride]
        for eps in self.cfg.eps_list:
            try:
                st = solve_reduced(ctx, eps, cfg)
                pr = contraction_probe(ctx, eps, r["probe_amplitude"], r["probe_iterations"], cfg)
            except RuntimeError as exc:
                per_eps[repr(eps)] = {"error": str(exc)}
                passed = False
                continue
            log_rows += [(eps, *row) for row in st.log_rows()]
            probe_rows += [(eps, *row) for row in pr.log_rows()]
            logs[f"probe eps={eps:g}"] = pr.updates
            h_cols[eps] = st.h[idx]
            ratio = max(pr.ratios[1:]) if len(pr.ratios) > 1 else float("nan")
            per_eps[repr(eps)] = {"iterations": st.iterations, "converged": st.converged, "stalled": st.stalled,
                                  "sup_h_over_eps": st.sup_h_over_eps,
                                  "fixed_point_residual": st.fixed_point_residual,
                                  "probe_ratio": ratio}
            passed = passed and st.converged and st.fixed_point_residual < 1e-8
        header = ["eps", "k", "update", "ratio", "h_over_eps"]
        self.csv("reduce_log.csv", header, log_rows)
        self.csv("reduce_probe.csv", header, probe_rows)
        eps_keys = sorted(h_cols, reverse=True)
        self.csv("reduce_h.csv", ["sigma"] + [f"h_eps_{e!r}" for e in eps_keys],
                 zip(ctx.system.s[idx], *(h_cols[e] for e in eps_keys)))
        if logs:
            plot_iteration_log(logs, self.out / "reduce_probe.png")
        return {"passed": bool(passed), "g2_mode": r["g2_mode"], "per_eps": per_eps}

    def run_projected(self) -> dict:
        import numpy as np

        from artifact.ansatz import weighted_norms_2d
        from artifact.numerics import fit_loglog
        from artifact.plotting import plot_field, plot_profiles
        from artifact.projected2d import solve_nonlinear_projected

        pctx = self._projected_context()
        pc = self.cfg["projected"]
        rows, c_rows = [], []
        sups, eps_ok = [], []
        passed = True
        curves = {}
        for eps in self.cfg.eps_list:
            try:
                res = solve_nonlinear_projected(None, pctx, eps, tol=pc["tol"], max_iter=pc["max_iter"])
            except RuntimeError as exc:
                rows.append((eps, float("nan"), float("nan"), 0, False, float("nan"), float("nan"), float("nan")))
                passed = False
                self.results.setdefault("projected_errors", {})[repr(eps)] = str(exc)
                continue
            phi = res.phi
            tag = f"{eps:g}".replace(".", "p")
            phi.save(self.out / f"phi_eps_{tag}.gf", self.cfg.hash)
            norms = weighted_norms_2d(phi, eps)
            sup = float(np.max(np.abs(phi.values)))
            rows.append((eps, sup, norms["c2lambda"], res.iterations, res.converged,
                         res.linear.max_orthogonality, res.linear.multiplier_mismatch, res.outer_bound))
            c_rows += [(eps, s, c) for s, c in zip(phi.s, res.c)]
            curves[f"eps={eps:g}"] = res.c
            sups.append(sup)
            eps_ok.append(eps)
            passed = passed and res.converged and res.linear.max_orthogonality < 1e-8
            if eps == self.cfg.eps_list[len(self.cfg.eps_list) // 2]:
                plot_field(phi, self.out / f"phi_eps_{tag}.png")
        self.csv("projected.csv", ["eps", "sup_phi", "weighted_c2lambda", "iterations", "converged",
                                   "orthogonality", "multiplier_mismatch", "outer_bound"], rows)
        self.csv("projected_c.csv", ["eps", "s", "c"], c_rows)
        if curves:
            plot_profiles(pctx.sigma, curves, self.out / "projected_c.png")
        slope = float("nan")
        if len(sups) >= 2:
            fit = fit_loglog(np.array(eps_ok), np.array(sups), 1e-14)
            slope = fit.slope if not fit.exact_zero else float("inf")
        return {"passed": bool(passed), "sup_phi_slope": slope}

    def run(self, commands) -> int:
        hard_fail = False
        for name in commands:
            result = getattr(self, f"run_{name}")()
            self.results[name] = result
            hard_fail = hard_fail or not result.get("passed", False)
        summary = {"config": self.cfg.values, "config_hash": self.cfg.hash, "commands": list(commands),
                   "results": self.results, "passed": not hard_fail}
        with (self.out / "summary.json").open("w", encoding="utf-8") as fh:
            json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return 1 if hard_fail else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artifact", description="Transition-layer experiments around weighted curves.")
    p.add_argument("command", choices=COMMANDS + ("all",))
    p.add_argument("--config", help="INI configuration file (defaults are used for missing keys)")
    p.add_argument("--out", default="artifact-out", help="output directory (created if missing)")
    p.add_argument("--eps", help="comma-separated eps list overriding the configuration")
    p.add_argument("--threads", type=int, help="BLAS/OpenMP thread count; effective only before numpy loads")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        cfg = load_config(args.config, args.eps)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    commands = COMMANDS if args.command == "all" else (args.command,)
    if "scaling" in commands and len(cfg.eps_list) < 3:
        print("error: scaling needs at least three eps values", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        runner = Runner(cfg, out)
        runner.scenario  # noqa: B018  (build early so parameter errors are usage errors)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    code = runner.run(commands)
    status = "PASS" if code == 0 else "FAIL"
    for name in commands:
        r = runner.results[name]
        print(f"{name}: {'pass' if r.get('passed') else 'fail'}{' - ' + r['message'] if 'message' in r else ''}")
    print(f"{status} (config {cfg.hash}, outputs in {out})")
    return code
