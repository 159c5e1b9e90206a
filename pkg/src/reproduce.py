"""
Figure reproduction for qheat.

FigureReproducer runs one figure preset at desk scale, writes each panel's
data as a result table next to a gnuplot script, and evaluates the figure's
acceptance property into a pass/fail summary.
"""

from dataclasses import dataclass, field, replace
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.config import SolverConfig
from src.engine import HeatTransportEngine
from src.errors import QHeatError
from src.fcs import propagate_dynamics, steady_state
from src.model import L, R, SystemSpec
from src.presets import FigurePreset, PresetLoader
from src.rates import RateEngine, default_engine
from src.results import Provenance, ResultTable
from src.transport import (
    STATUS_FAILED,
    STATUS_OK,
    SweepSpec,
    amplification_scan,
    annotate_ndtc,
    current_sweep,
    extremum_location,
    partial_coupling_scan,
    run_ordered,
    three_terminal_currents,
    transition_current_decomposition,
)

logger = logging.getLogger("QHeat.Reproduce")

# Schemes whose steady states conserve energy exactly
_CONSERVING = {("niba", "full"), ("niba", "population"), ("redfield", "population")}


@dataclass
class Check:
    """One acceptance property of a figure.

    ``required`` checks decide the figure's verdict; the others are reported only.
    """

    name: str
    value: Any
    threshold: str
    passed: bool
    required: bool = True

    def line(self) -> str:
        verdict = "PASS" if self.passed else ("FAIL" if self.required else "info")
        value = f"{self.value:.6g}" if isinstance(self.value, float) else str(self.value)
        return f"{verdict:4s}  {self.name}: {value} ({self.threshold})"


@dataclass
class FigureReport:
    figure: str
    files: List[Path] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)

    def summary_lines(self) -> List[str]:
        lines = [f"{self.figure}: {'PASS' if self.passed else 'FAIL'}"]
        lines.extend("  " + check.line() for check in self.checks)
        return lines


def gnuplot_script(data_file: str, x: str, ys: Sequence[str], xlabel: str, ylabel: str, title: str) -> str:
    """Plot script for a CSV written by ResultTable."""
    lines = [
        f"# {title}",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    plots = [f"'{data_file}' using '{x}':'{y}' with linespoints title '{y}'" for y in ys]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def apply_overrides(spec: SystemSpec, overrides: Mapping[str, Any]) -> SystemSpec:
    """Device with ``alpha``, ``alpha_l``, ``alpha_r``, ``epsilon`` or ``u`` replaced."""
    for terminal in spec.terminals:
        side_key = "alpha_r" if terminal == R else "alpha_l"
        for key in ("alpha", side_key):
            if key in overrides:
                spec = spec.with_bath(terminal, spec.baths[terminal].with_alpha(float(overrides[key])))
    if "epsilon" in overrides:
        eps = float(overrides["epsilon"])
        spec = replace(spec, left=replace(spec.left, epsilon=eps), right=replace(spec.right, epsilon=eps))
    if "u" in overrides:
        spec = replace(spec, u=float(overrides["u"]))
    return spec


def _range_check(name: str, value: Optional[float], bounds: Sequence[float]) -> Check:
    lo, hi = bounds
    passed = value is not None and lo <= value <= hi
    return Check(name, value if value is not None else "none", f"in [{lo}, {hi}]", passed)


def _relative_gap(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


class FigureReproducer:
    """Runs figure presets and writes their data."""

    def __init__(
        self,
        output_dir: Union[str, Path],
        loader: Optional[PresetLoader] = None,
        rate_engine: Optional[RateEngine] = None,
        workers: Optional[int] = None,
        progress: bool = False,
    ):
        """Initialize the FigureReproducer.

        Args:
            output_dir: Directory for data files, scripts and summaries.
            loader: Preset source; the bundled presets by default.
            rate_engine: Shared rate cache.
            workers: Concurrent points per sweep; QHEAT_THREADS or the CPU count if omitted.
            progress: Show progress bars.
        """
        self.output_dir = Path(output_dir)
        self.loader = loader or PresetLoader()
        self.rate_engine = rate_engine or default_engine()
        self.workers = workers
        self.progress = progress
        self._handlers: Dict[str, Callable[[FigurePreset, FigureReport], None]] = {
            "unification": self._unification,
            "ndtc": self._ndtc,
            "loops": self._loops,
            "coupling_scan": self._coupling_scan,
            "amplification": self._amplification,
            "dynamics": self._dynamics,
            "transitions": self._transitions,
            "three_terminal": self._three_terminal,
        }

    def run(self, figure: str) -> FigureReport:
        """Reproduce one figure and write ``<figure>_summary.txt``."""
        preset = self.loader.load(figure)
        logger.info("Reproducing %s (%s)", figure, preset.kind)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        report = FigureReport(figure=figure)
        self._handlers[preset.kind](preset, report)

        summary = self.output_dir / f"{figure}_summary.txt"
        summary.write_text("\n".join(report.summary_lines()) + "\n", encoding="utf-8")
        report.files.append(summary)
        logger.info("%s: %s", figure, "PASS" if report.passed else "FAIL")
        return report

    def _config(self, preset: FigurePreset, **changes: Any) -> SolverConfig:
        config = preset.solver.to_config()
        return replace(config, **changes) if changes else config

    def _workers(self, config: SolverConfig) -> int:
        return self.workers or config.worker_count()

    def _write(
        self,
        preset: FigurePreset,
        report: FigureReport,
        name: str,
        frame: pd.DataFrame,
        x: str,
        ys: Sequence[str],
        ylabel: str,
        scheme: Optional[str] = None,
    ) -> None:
        scheme = scheme or preset.solver.scheme
        if "scheme" not in frame.columns:
            frame = frame.assign(scheme=scheme)
        if "status" not in frame.columns:
            frame = frame.assign(status=STATUS_OK)
        provenance = Provenance(
            config_hash=preset.config_hash(),
            scheme=scheme,
            tolerances=preset.solver.to_config().to_dict(),
        )
        stem = f"{preset.figure}_{name}"
        data = ResultTable(frame, provenance).to_csv(self.output_dir / f"{stem}.csv")
        script = self.output_dir / f"{stem}.gp"
        script.write_text(gnuplot_script(data.name, x, ys, x, ylabel, f"{preset.figure} {name}"), encoding="utf-8")
        report.files.extend([data, script])

    def _unification(self, preset: FigurePreset, report: FigureReport) -> None:
        params = preset.parameters
        alphas = preset.sweep.values()
        base = preset.system.to_spec()
        engines = {
            scheme: HeatTransportEngine(self._config(preset, scheme=scheme), self.rate_engine)
            for scheme in ("neptre", "redfield", "niba")
        }
        redfield_max = float(params.get("redfield_max_alpha", 0.1))
        niba_min = float(params.get("niba_min_alpha", 1.0))
        tolerance = float(preset.acceptance.get("tolerance", 0.02))

        def row(spec: SystemSpec, alpha: float) -> Dict[str, Any]:
            values: Dict[str, Any] = {"alpha": alpha, "i_neptre": np.nan, "i_redfield": np.nan, "i_niba": np.nan}
            try:
                values["i_neptre"] = engines["neptre"].current(spec)
                if alpha <= redfield_max:
                    values["i_redfield"] = engines["redfield"].current(spec)
                if alpha >= niba_min:
                    values["i_niba"] = engines["niba"].current(spec)
                values["status"] = STATUS_OK
            except QHeatError as exc:
                logger.warning("alpha=%g failed: %s", alpha, exc)
                values["status"] = STATUS_FAILED
            return values

        for epsilon in params.get("epsilons", [base.left.epsilon]):
            device = apply_overrides(base, {"epsilon": epsilon})
            tasks = [lambda a=a: row(apply_overrides(device, {"alpha": a}), a) for a in alphas]
            frame = pd.DataFrame(run_ordered(tasks, self._workers(engines["neptre"].config), "fig2", self.progress))
            frame["gap_redfield"] = (frame["i_neptre"] - frame["i_redfield"]).abs() / frame["i_redfield"].abs()
            frame["gap_niba"] = (frame["i_neptre"] - frame["i_niba"]).abs() / frame["i_niba"].abs()
            self._write(preset, report, f"eps_{epsilon:g}", frame, "alpha", ["i_neptre", "i_redfield", "i_niba"], "I_R")

            for check in preset.acceptance.get("checks", []):
                reference = check["reference"]
                match = frame[np.isclose(frame["alpha"], check["alpha"])]
                gap = float(match[f"gap_{reference}"].iloc[0]) if len(match) else float("nan")
                report.checks.append(
                    Check(
                        f"eps={epsilon:g} alpha={check['alpha']:g} NE-PTRE vs {reference}",
                        gap,
                        f"< {tolerance}",
                        bool(gap < tolerance),
                    )
                )

    def _ndtc(self, preset: FigurePreset, report: FigureReport) -> None:
        sweep = preset.run_config().to_sweep_spec()
        config = self._config(preset)
        for curve in preset.parameters.get("curves", [{"name": "base"}]):
            spec = replace(sweep, base=apply_overrides(sweep.base, curve))
            table = current_sweep(spec, config, self.rate_engine, self._workers(config), self.progress)
            table, ndtc = annotate_ndtc(table)
            ys = ["normalized_current"] if "normalized_current" in table.columns else ["current"]
            self._write(preset, report, curve["name"], table, sweep.axis.value, ys, "I_R")
            if "expect_ndtc" in curve:
                report.checks.append(
                    Check(f"{curve['name']} has_ndtc", ndtc.has_ndtc, f"expected {curve['expect_ndtc']}", ndtc.has_ndtc == curve["expect_ndtc"])
                )
            if ndtc.turnover is not None:
                report.checks.append(Check(f"{curve['name']} turnover", ndtc.turnover, "reported", True, required=False))

    def _loops(self, preset: FigurePreset, report: FigureReport) -> None:
        sweep = preset.run_config().to_sweep_spec()
        config = self._config(preset)
        workers = self._workers(config)
        table = current_sweep(sweep, config, self.rate_engine, workers, self.progress)
        self._write(preset, report, "loops", table, "delta_t", ["current", "loop_forward", "loop_backward"], "energy current")

        acceptance = preset.acceptance
        fraction = float(acceptance.get("decay_fraction", 0.05))
        decay_from = float(acceptance.get("decay_from", sweep.grid[-1]))
        grid = table["delta_t"].to_numpy(dtype=float)
        for column in ("loop_forward", "loop_backward"):
            values = table[column].to_numpy(dtype=float)
            peak = int(np.nanargmax(values))
            tail = values[grid >= decay_from - 1e-9]
            ratio = float(np.nanmax(tail) / values[peak]) if tail.size else float("nan")
            report.checks.append(Check(f"{column} at delta_t>={decay_from:g} / max", ratio, f"< {fraction}", bool(ratio < fraction)))
            after = values[peak:]
            monotone = bool(np.all(np.diff(after) <= 1e-12 * values[peak]))
            report.checks.append(Check(f"{column} decreasing after its maximum", monotone, "expected True", monotone))

        low = replace(sweep, grid=tuple(preset.parameters.get("low_bias_grid", [0.05, 0.1, 0.15, 0.2])))
        low_table = current_sweep(low, config, self.rate_engine, workers, self.progress)
        conductance = (low_table["current"] / low_table["delta_t"]).to_numpy(dtype=float)
        spread = float((np.max(conductance) - np.min(conductance)) / abs(np.mean(conductance)))
        tolerance = float(acceptance.get("linearity_tolerance", 0.1))
        low_table = low_table.assign(conductance=conductance)
        self._write(preset, report, "low_bias", low_table, "delta_t", ["conductance"], "I/dT")
        report.checks.append(Check("low-bias I/dT spread", spread, f"< {tolerance}", bool(spread < tolerance)))

    def _coupling_scan(self, preset: FigurePreset, report: FigureReport) -> None:
        sweep = preset.run_config().to_sweep_spec()
        config = self._config(preset)
        scan = partial_coupling_scan(
            sweep.base,
            preset.parameters["alpha_r_grid"],
            sweep.grid,
            t0=sweep.t0,
            scheme=config.scheme,
            config=config,
            rate_engine=self.rate_engine,
            workers=self._workers(config),
            progress=self.progress,
        )
        self._write(preset, report, "scan", scan.to_frame(), "alpha_r", ["has_ndtc"], "NDTC")
        curves = pd.concat(
            [table.assign(alpha_r=alpha) for alpha, table in zip(scan.alpha_r, scan.tables)], ignore_index=True
        )
        ys = ["normalized_current"] if "normalized_current" in curves.columns else ["current"]
        self._write(preset, report, "curves", curves, "delta_t", ys, "I_R")

        acceptance = preset.acceptance
        if "onset_range" in acceptance:
            report.checks.append(_range_check("NDTC onset alpha_R", scan.onset, acceptance["onset_range"]))
        flags = dict(zip(scan.alpha_r, (r.has_ndtc for r in scan.reports)))
        for key, expected in (("absent_at", False), ("present_at", True)):
            if key in acceptance:
                alpha = float(acceptance[key])
                value = flags.get(alpha)
                report.checks.append(Check(f"alpha_R={alpha:g} has_ndtc", value, f"expected {expected}", value is expected))

    def _amplification(self, preset: FigurePreset, report: FigureReport) -> None:
        grid = preset.sweep.values()
        step = preset.sweep.dT_step
        acceptance = preset.acceptance
        base = preset.system.to_spec()
        for case in preset.parameters.get("cases", [{"name": "base", "expect": "reported"}]):
            changes = {k: case[k] for k in ("scheme", "redfield_form") if k in case}
            config = self._config(preset, **changes)
            spec = apply_overrides(base, case)
            scan = amplification_scan(spec, grid, step, config, self.rate_engine, self._workers(config), self.progress)
            frame = scan.to_frame()
            self._write(preset, report, case["name"], frame, "t_r", ["beta_lh", "beta_lc", "i_r"], "beta", config.scheme)

            name, beta = case["name"], scan.max_beta_lh()
            expect = case.get("expect", "reported")
            if expect == "below_one":
                report.checks.append(Check(f"{name} max beta_Lh", beta, "< 1", bool(beta < 1.0)))
            elif expect in ("above_one", "divergent"):
                report.checks.append(Check(f"{name} max beta_Lh", beta, "> 1", bool(beta > 1.0)))
            if expect == "divergent":
                flagged = any(scan.divergence_flags)
                report.checks.append(Check(f"{name} divergence flagged", flagged, "expected True", flagged))
                if "turnover_range" in acceptance:
                    report.checks.append(_range_check(f"{name} I_R turnover", scan.turnover, acceptance["turnover_range"]))

            exact = (config.scheme, config.redfield_form) in _CONSERVING
            tolerance = float(acceptance.get("identity_tolerance", 1e-6))
            identity = scan.beta_identity_residual()
            report.checks.append(Check(f"{name} beta_Lc identity residual", identity, f"< {tolerance}", bool(identity < tolerance), exact))
            residual = scan.energy_residual()
            report.checks.append(Check(f"{name} max |sum I|", residual, "< 1e-08", bool(residual < 1e-8), exact))

    def _dynamics(self, preset: FigurePreset, report: FigureReport) -> None:
        config = self._config(preset)
        spec = preset.system.to_spec()
        engine = HeatTransportEngine(config, self.rate_engine)
        gen = engine.generator(spec)
        steady = steady_state(gen, config.zero_tol)

        psi = np.full(4, 0.5, dtype=complex)
        rho0 = np.outer(psi, psi.conj())
        params = preset.parameters
        times = np.linspace(0.0, float(params.get("t_max", 2e4)), int(params.get("points", 41)))
        trajectory = propagate_dynamics(gen, rho0, times, config.dynamics_rtol, config.dynamics_atol)

        pairs = [(n, m) for n in range(4) for m in range(n + 1, 4)]
        frame = pd.DataFrame({"t": trajectory.times})
        for n, m in pairs:
            frame[f"re_rho_{n + 1}{m + 1}"] = trajectory.states[:, n, m].real
        frame["trace"] = trajectory.traces()
        columns = [f"re_rho_{n + 1}{m + 1}" for n, m in pairs]
        self._write(preset, report, "coherences", frame, "t", columns, "Re rho_nm")

        acceptance = preset.acceptance
        initial = max(abs(rho0[n, m]) for n, m in pairs)
        final = max(abs(trajectory.states[-1, n, m] - steady.rho[n, m]) for n, m in pairs)
        ratio = float(final / initial)
        limit = float(acceptance.get("coherence_ratio", 0.05))
        report.checks.append(Check("coherence distance to steady state, final / initial", ratio, f"< {limit}", bool(ratio < limit)))
        drift = float(np.max(np.abs(trajectory.traces() - 1.0)))
        trace_tol = float(acceptance.get("trace_tolerance", 1e-6))
        report.checks.append(Check("trace drift", drift, f"< {trace_tol}", bool(drift < trace_tol)))

        full = engine.current(spec)
        population = HeatTransportEngine(replace(config, redfield_form="population"), self.rate_engine).current(spec)
        gap = _relative_gap(population, full)
        limit = float(acceptance.get("population_gap", 1e-3))
        report.checks.append(Check("population vs full Redfield current", gap, f"< {limit}", bool(gap < limit)))

    def _transitions(self, preset: FigurePreset, report: FigureReport) -> None:
        sweep = preset.run_config().to_sweep_spec()
        config = self._config(preset)
        engine = HeatTransportEngine(config, self.rate_engine)

        def row(value: float) -> Dict[str, Any]:
            spec = sweep.point(value)
            result = engine.solve(spec, (sweep.terminal,))
            decomposition = transition_current_decomposition(spec, result.steady, config.scheme, sweep.terminal, config.freq_tol)
            values: Dict[str, Any] = {"delta_t": value}
            values.update({f"j_{n}{m}": j for (n, m), j in decomposition.currents.items()})
            values["total"] = decomposition.total
            values["current"] = result.currents[sweep.terminal]
            values["analytic"] = result.analytic[sweep.terminal]
            return values

        tasks = [lambda v=value: row(v) for value in sweep.grid]
        frame = pd.DataFrame(run_ordered(tasks, self._workers(config), "transitions", self.progress))
        columns = [c for c in frame.columns if c.startswith("j_")]
        self._write(preset, report, "transitions", frame, "delta_t", columns + ["total"], "J_nm")

        acceptance = preset.acceptance
        biased = frame[frame["total"].abs() > 1e-12]
        fraction = float(acceptance.get("negligible_fraction", 0.05))
        for n, m in acceptance.get("negligible", []):
            share = float((biased[f"j_{n}{m}"].abs() / biased["total"].abs()).max()) if len(biased) else 0.0
            report.checks.append(Check(f"|J_{n}{m}| / |total|", share, f"< {fraction}", bool(share < fraction)))
        tolerance = float(acceptance.get("sum_tolerance", 1e-10))
        scale = max(float(frame["analytic"].abs().max()), 1e-300)
        bookkeeping = float((frame["total"] - frame["analytic"]).abs().max() / scale)
        report.checks.append(Check("sum J_nm vs Redfield current", bookkeeping, f"< {tolerance}", bool(bookkeeping < tolerance)))

    def _three_terminal(self, preset: FigurePreset, report: FigureReport) -> None:
        sweep = preset.run_config().to_sweep_spec()
        config = self._config(preset)

        def row(t_r: float) -> Dict[str, Any]:
            currents = three_terminal_currents(sweep.point(t_r), config, self.rate_engine)
            values = {"t_r": t_r, "i_lh": currents.i_lh, "i_lc": currents.i_lc, "i_r": currents.i_r}
            if currents.components is not None:
                values["upper"], values["lower"] = currents.components
            values["i_r_analytic"] = currents.analytic_r
            return values

        tasks = [lambda t=t_r: row(t) for t_r in sweep.grid]
        frame = pd.DataFrame(run_ordered(tasks, self._workers(config), "three-terminal", self.progress))
        ys = ["i_lh", "i_lc", "i_r"] + [c for c in ("upper", "lower") if c in frame.columns]
        self._write(preset, report, "currents", frame, "t_r", ys, "energy current")

        acceptance = preset.acceptance
        if "upper" in frame.columns:
            tolerance = float(acceptance.get("identity_tolerance", 1e-8))
            composed = frame["upper"] - frame["lower"]
            scale = max(float(frame["i_r"].abs().max()), 1e-300)
            identity = float((frame["i_r"] - composed).abs().max() / scale)
            report.checks.append(Check("counted I_R vs upper - lower", identity, f"< {tolerance}", bool(identity < tolerance)))
        tolerance = float(acceptance.get("conservation_tolerance", 1e-8))
        residual = float((frame["i_lh"] + frame["i_lc"] + frame["i_r"]).abs().max())
        report.checks.append(Check("max |I_Lh + I_Lc + I_R|", residual, f"< {tolerance}", bool(residual < tolerance)))
        if "turnover_range" in acceptance:
            turnover = extremum_location(frame["t_r"], frame["i_r"])
            report.checks.append(_range_check("I_R turnover", turnover, acceptance["turnover_range"]))
