#!/usr/bin/env python3
"""
qheat - Heat transport in a two-qubit spin-boson device

This is the main entry point for qheat. It computes single-point heat
currents, runs parameter sweeps, reproduces the figure presets and runs the
invariant property suite from the command line.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 validation failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src import __version__
from src.engine import HeatTransportEngine
from src.errors import ConfigError, QHeatError, TooFewPointsError, ValidationFailure
from src.presets import FIGURES, PresetLoader
from src.reproduce import FigureReproducer
from src.results import Provenance, ResultTable
from src.run_config import RunConfig, load_run_config
from src.transport import STATUS_OK, SweepAxis, amplification_scan, annotate_ndtc, current_sweep
from src.validation import FAULTS, GRIDS, PropertySuite

logger = logging.getLogger("QHeat.CLI")

EXIT_OK = 0
EXIT_CONFIG = ConfigError.exit_code
EXIT_SOLVER = QHeatError.exit_code
EXIT_VALIDATION = ValidationFailure.exit_code


def parse_arguments(argv: Optional[List[str]] = None, prog: Optional[str] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog=prog,
        description="qheat - steady-state heat currents of a two-qubit spin-boson device",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    # Logging arguments
    log_group = parser.add_argument_group("Logging")
    log_group.add_argument("-v", "--verbose", action="store_true", help="Log debug details")
    log_group.add_argument("-q", "--quiet", action="store_true", help="Log warnings and errors only")
    log_group.add_argument("--progress", action="store_true", help="Show progress bars for sweeps")

    commands = parser.add_subparsers(dest="command", required=True)

    current = commands.add_parser("current", help="Steady currents at one parameter point")
    current.add_argument("-c", "--config", required=True, help="Run file (JSON)")

    sweep = commands.add_parser("sweep", help="Current along a one-dimensional grid")
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument("-c", "--config", help="Run file (JSON) with a sweep section")
    source.add_argument("--preset", choices=FIGURES, help="Use the primary sweep of a figure preset")
    output_group = sweep.add_argument_group("Output")
    output_group.add_argument("-o", "--output", help="Output file; the suffix follows --format")
    output_group.add_argument(
        "--format",
        choices=("csv", "jsonl", "both"),
        default=None,
        help="Output format (default: the run file's, else csv)",
    )

    reproduce = commands.add_parser("reproduce", help="Reproduce a figure preset and check its property")
    reproduce.add_argument("figure", choices=FIGURES + ("all",), help="Figure id, or all")
    reproduce.add_argument("-o", "--output", required=True, help="Output directory")

    validate = commands.add_parser("validate", help="Run the invariant property suite")
    validate.add_argument(
        "--grid",
        choices=sorted(GRIDS),
        default="small",
        help="Parameter grid (default: small)",
    )
    validate.add_argument("--inject-fault", choices=FAULTS, default=None, help="Break one rate to exercise the suite")

    return parser.parse_args(argv)


def cmd_current(args: argparse.Namespace) -> int:
    """Print the currents into every bath and the solver diagnostics."""
    config = load_run_config(args.config)
    spec = config.to_system_spec()
    engine = HeatTransportEngine(config.to_solver_config())
    result = engine.solve(spec, noise=config.solver.cumulants == 2)

    print(f"scheme: {result.scheme}")
    for terminal in result.terminals:
        line = f"I_{terminal} = {result.currents[terminal]:.12g}"
        if result.noise[terminal] is not None:
            line += f"  noise = {result.noise[terminal]:.12g}"
        if result.analytic[terminal] is not None:
            line += f"  analytic = {result.analytic[terminal]:.12g}"
        print(line)
    print(f"populations: {', '.join(f'{p:.10g}' for p in result.steady.populations)}")
    diagnostics = result.diagnostics
    print(f"steady_residual: {diagnostics['steady_residual']:.3e}")
    print(f"trace_defect: {diagnostics['trace_defect']:.3e}")
    print(f"coherence_norm: {diagnostics['coherence_norm']:.3e}")
    if "energy_residual" in diagnostics:
        print(f"energy_residual: {diagnostics['energy_residual']:.3e}")
    if "redfield_verbatim" in diagnostics:
        forms = diagnostics["redfield_verbatim"]
        print(f"redfield_verbatim: {', '.join(f'I_{t}={v:.12g}' for t, v in forms.items())}")
    cache = diagnostics["cache"]
    print(f"rate_cache: {', '.join(f'{k}={v}' for k, v in sorted(cache.items()))}")
    return EXIT_OK


def _sweep_table(config: RunConfig, progress: bool):
    solver = config.to_solver_config()
    if config.sweep.analysis == "amplification":
        report = amplification_scan(
            config.to_system_spec(),
            config.sweep.values(),
            dT_step=config.sweep.dT_step,
            config=solver,
            progress=progress,
        )
        return report.to_frame().assign(scheme=solver.scheme, status=STATUS_OK)

    spec = config.to_sweep_spec()
    table = current_sweep(spec, solver, progress=progress)
    if spec.axis is SweepAxis.DELTA_T:
        column = "normalized_current" if "normalized_current" in table.columns else "current"
        try:
            table, report = annotate_ndtc(table, column)
            logger.info("NDTC %s, turnover at %s", "present" if report.has_ndtc else "absent", report.turnover)
        except TooFewPointsError as exc:
            logger.warning("No NDTC analysis: %s", exc)
    return table


def cmd_sweep(args: argparse.Namespace) -> int:
    """Run a sweep and write its result table."""
    if args.preset:
        config = PresetLoader().run_config(args.preset)
    else:
        config = load_run_config(args.config)
    if config.sweep is None:
        raise ConfigError("run file has no sweep section", key="sweep")

    target = args.output or config.output.path
    if not target:
        raise ConfigError("no output file: pass -o or set output.path", key="output.path")
    fmt = args.format or config.output.format

    table = ResultTable(
        _sweep_table(config, args.progress),
        Provenance(
            config_hash=config.config_hash(),
            scheme=config.solver.scheme,
            tolerances=config.to_solver_config().to_dict(),
        ),
    )
    for path in table.write(Path(target), fmt):
        print(path)

    if table.all_failed():
        logger.error("All %d sweep points failed", len(table.frame))
        return EXIT_SOLVER
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace) -> int:
    """Reproduce one figure (or all) and print the acceptance summaries."""
    reproducer = FigureReproducer(args.output, progress=args.progress)
    figures = FIGURES if args.figure == "all" else (args.figure,)
    failed = []
    for figure in figures:
        report = reproducer.run(figure)
        print("\n".join(report.summary_lines()))
        if not report.passed:
            failed.append(figure)
    if failed:
        logger.error("Acceptance failed for %s", ", ".join(failed))
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    """Run the property suite and print its residual table."""
    report = PropertySuite(args.grid, args.inject_fault).run()
    print(report.render())
    if not report.passed:
        raise ValidationFailure(report.failed())
    return EXIT_OK


COMMANDS = {
    "current": cmd_current,
    "sweep": cmd_sweep,
    "reproduce": cmd_reproduce,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None, prog: Optional[str] = None) -> int:
    """Main function; returns the process exit code."""
    args = parse_arguments(argv, prog)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return e.exit_code
    except ValidationFailure as e:
        logger.error("%s", e)
        return e.exit_code
    except QHeatError as e:
        logger.error("Solver error: %s: %s", type(e).__name__, e)
        return e.exit_code
    except ValueError as e:
        logger.error("Invalid input: %s", e)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("\nInterrupted.")
        return 130


if __name__ == "__main__":
    sys.exit(main())
