"""
Invariant property suite for qheat.

Runs the cross-module invariants (detailed balance, renormalization
identity, trace preservation, cumulant sanity, energy conservation and the
closed-form oracles) over a parameter grid and reports, per suite, the
largest residual found against its tolerance.
"""

from dataclasses import dataclass, field, replace
import logging
import math
import time
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.baths import (
    BathKernel,
    BathSpec,
    composite_phase,
    composite_renorm_factor,
    phase_closed_form,
    renorm_factor,
    renorm_factor_closed_form,
)
from src.config import SolverConfig
from src.currents import analytic_niba_populations, niba_side_current
from src.engine import HeatTransportEngine
from src.errors import QHeatError
from src.fcs import cgf, propagate_dynamics, steady_state
from src.model import L, L_C, L_H, R, QubitSpec, SystemSpec, Topology, build_lab_frame, side_of
from src.rates import RateEngine, build_niba_rate_table, check_kms, default_engine, redfield_spectrum
from src.transport import loop_decomposition

logger = logging.getLogger("QHeat.Validation")

GRIDS = {
    "small": {
        "alphas": [0.05, 2.0],
        "temperatures": [(1.5, 0.5)],
        "epsilons": [1.0],
    },
    "full": {
        "alphas": [0.01, 0.05, 0.5, 2.0, 5.0],
        "temperatures": [(1.5, 0.5), (2.0, 1.0), (3.0, 0.2)],
        "epsilons": [0.0, 1.0],
    },
}

FAULTS = ("rate-sign",)

# (scheme, redfield_form) pairs every generator check runs over
_SCHEMES = (("neptre", "full"), ("redfield", "full"), ("redfield", "population"), ("niba", "full"))


@dataclass
class SuiteResult:
    """Largest residual of one invariant over the grid."""

    name: str
    residual: float
    tolerance: float
    cases: int
    seconds: float
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and math.isfinite(self.residual) and self.residual <= self.tolerance


@dataclass
class ValidationReport:
    grid: str
    results: List[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failed(self) -> List[str]:
        return [r.name for r in self.results if not r.passed]

    @property
    def seconds(self) -> float:
        return sum(r.seconds for r in self.results)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "invariant": [r.name for r in self.results],
                "max_residual": [r.residual for r in self.results],
                "tolerance": [r.tolerance for r in self.results],
                "cases": [r.cases for r in self.results],
                "seconds": [round(r.seconds, 3) for r in self.results],
                "status": ["pass" if r.passed else "FAIL" for r in self.results],
            }
        )

    def render(self) -> str:
        frame = self.to_frame()
        frame["max_residual"] = frame["max_residual"].map(lambda v: f"{v:.3e}")
        frame["tolerance"] = frame["tolerance"].map(lambda v: f"{v:.1e}")
        lines = [frame.to_string(index=False), f"total: {self.seconds:.1f}s, {len(self.failed())} failed"]
        for result in self.results:
            if result.error:
                lines.append(f"{result.name}: {result.error}")
        return "\n".join(lines)


def _device(alpha: float, t_l: float, t_r: float, epsilon: float) -> SystemSpec:
    qubit = QubitSpec(epsilon=epsilon, delta=1.0)
    return SystemSpec(
        u=0.1,
        left=qubit,
        right=qubit,
        baths={L: BathSpec(alpha, 5.0, t_l), R: BathSpec(alpha, 5.0, t_r)},
    )


def _three_terminal(alpha: float, t_r: float, epsilon: float) -> SystemSpec:
    qubit = QubitSpec(epsilon=epsilon, delta=1.0)
    return SystemSpec(
        u=0.1,
        left=qubit,
        right=qubit,
        topology=Topology.THREE_TERMINAL,
        baths={L_H: BathSpec(alpha, 5.0, 2.0), L_C: BathSpec(alpha, 5.0, 0.2), R: BathSpec(alpha, 5.0, t_r)},
    )


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


class PropertySuite:
    """Runs every invariant over one grid."""

    def __init__(
        self,
        grid: str = "small",
        fault: Optional[str] = None,
        config: Optional[SolverConfig] = None,
        rate_engine: Optional[RateEngine] = None,
    ):
        """Initialize the PropertySuite.

        Args:
            grid: ``small`` or ``full``.
            fault: Deliberate defect to inject; ``rate-sign`` breaks detailed balance.
            config: Base solver settings.
            rate_engine: Shared rate cache.
        """
        if grid not in GRIDS:
            raise ValueError(f"grid must be one of {sorted(GRIDS)}, got {grid!r}")
        if fault is not None and fault not in FAULTS:
            raise ValueError(f"fault must be one of {FAULTS}, got {fault!r}")
        self.grid = grid
        self.fault = fault
        self.config = config or SolverConfig()
        self.rate_engine = rate_engine or default_engine()
        self._suites: List[Tuple[str, float, Callable[[], Iterator[float]]]] = [
            ("kms detailed balance", 1e-6, self._kms),
            ("kms redfield spectra", 1e-10, self._redfield_kms),
            ("eta^2 exp(Q(0)) = 1", 1e-8, self._eta_identity),
            ("composite phase vs closed form", 1e-7, self._composite_phase),
            ("eta closed form vs quadrature", 1e-8, self._eta_closed_form),
            ("trace preservation", 1e-10, self._trace),
            ("G(0) = 0", 1e-10, self._cgf_zero),
            ("FCS vs analytic current", 1e-6, self._fcs_vs_analytic),
            ("NIBA populations vs null space", 1e-10, self._niba_populations),
            ("loop currents vs NIBA current", 1e-10, self._loops),
            ("three-terminal sum of currents", 1e-8, self._three_terminal_sum),
            ("noise floor", 1e-8, self._noise_floor),
            ("dynamics vs null space", 1e-8, self._dynamics),
        ]

    def _engine(self, scheme: str, form: str = "full") -> HeatTransportEngine:
        return HeatTransportEngine(replace(self.config, scheme=scheme, redfield_form=form), self.rate_engine)

    def _devices(self) -> Iterator[SystemSpec]:
        grid = GRIDS[self.grid]
        for alpha in grid["alphas"]:
            for t_l, t_r in grid["temperatures"]:
                for epsilon in grid["epsilons"]:
                    yield _device(alpha, t_l, t_r, epsilon)

    def _kms(self) -> Iterator[float]:
        for spec in self._devices():
            table = build_niba_rate_table(spec, self.config.quadrature, self.rate_engine)
            if self.fault == "rate-sign":
                table.kappa = dict(table.kappa)
                table.kappa[(2, 1, R)] = -table.kappa[(2, 1, R)]
            for side in (L, R):
                yield check_kms(table, side)

    def _redfield_kms(self) -> Iterator[float]:
        for spec in self._devices():
            frame = build_lab_frame(spec, self.config.freq_tol)
            for terminal, bath in spec.baths.items():
                for w, _ in frame.groups(side_of(terminal), "z"):
                    if w <= 0.0:
                        continue
                    ratio = redfield_spectrum(bath, w)[0] / redfield_spectrum(bath, -w)[0]
                    yield _relative(ratio, math.exp(w / bath.temperature))

    def _eta_identity(self) -> Iterator[float]:
        # quadrature eta against the trigamma phase at tau = 0
        for spec in self._devices():
            for bath in spec.baths.values():
                eta = renorm_factor(bath, self.config.quadrature)
                q0 = float(phase_closed_form(bath, 0.0).real)
                yield abs(eta ** 2 * math.exp(q0) - 1.0)
        for alpha in GRIDS[self.grid]["alphas"]:
            left = _three_terminal(alpha, 0.5, 1.0).baths_on(L)
            eta = composite_renorm_factor(left, self.config.quadrature)
            q0 = sum(float(phase_closed_form(bath, 0.0).real) for bath in left)
            yield abs(eta ** 2 * math.exp(q0) - 1.0)

    def _composite_phase(self) -> Iterator[float]:
        for alpha in GRIDS[self.grid]["alphas"]:
            left = _three_terminal(alpha, 0.5, 1.0).baths_on(L)
            kernel = BathKernel(tuple(left), self.config.quadrature)
            scale = abs(complex(kernel.phase(0.0)))
            for tau in (0.0, 0.3, 1.0):
                numeric = composite_phase(left, tau, self.config.quadrature)
                yield abs(numeric - complex(kernel.phase(tau))) / scale

    def _eta_closed_form(self) -> Iterator[float]:
        for spec in self._devices():
            for bath in spec.baths.values():
                yield _relative(renorm_factor(bath, self.config.quadrature), renorm_factor_closed_form(bath))

    def _generators(self) -> Iterator:
        for spec in self._devices():
            for scheme, form in _SCHEMES:
                yield self._engine(scheme, form).generator(spec, R)

    def _trace(self) -> Iterator[float]:
        for gen in self._generators():
            yield float(np.max(np.abs(gen.trace_vector() @ gen(0.0))))

    def _cgf_zero(self) -> Iterator[float]:
        for gen in self._generators():
            yield abs(cgf(gen, 0.0, track=False))

    def _fcs_vs_analytic(self) -> Iterator[float]:
        for spec in self._devices():
            for scheme, form in _SCHEMES:
                result = self._engine(scheme, form).solve(spec, (R,))
                if result.analytic.get(R) is None:
                    continue
                yield _relative(result.currents[R], result.analytic[R])

    def _niba_populations(self) -> Iterator[float]:
        for spec in self._devices():
            gen = self._engine("niba").generator(spec, R)
            numeric = steady_state(gen, self.config.zero_tol).populations
            yield float(np.max(np.abs(analytic_niba_populations(gen.table) - numeric)))

    def _loops(self) -> Iterator[float]:
        for spec in self._devices():
            gen = self._engine("niba").generator(spec, R)
            populations = steady_state(gen, self.config.zero_tol).populations
            current = niba_side_current(gen.table, populations, R)
            yield _relative(loop_decomposition(gen.table).total, current) if abs(current) > 1e-14 else 0.0

    def _three_terminal_sum(self) -> Iterator[float]:
        grid = GRIDS[self.grid]
        for alpha in grid["alphas"]:
            for epsilon in grid["epsilons"]:
                spec = _three_terminal(alpha, 0.5, epsilon)
                for scheme, form in (("niba", "full"), ("redfield", "population")):
                    yield self._engine(scheme, form).solve(spec).energy_residual

    def _noise_floor(self) -> Iterator[float]:
        for spec in self._devices():
            for scheme, form in (("niba", "full"), ("redfield", "population")):
                noise = self._engine(scheme, form).solve(spec, (R,), noise=True).noise[R]
                yield max(0.0, -noise)

    def _dynamics(self) -> Iterator[float]:
        for spec in self._devices():
            gen = self._engine("niba").generator(spec, R)
            matrix = gen(0.0)
            steady = steady_state(gen, self.config.zero_tol)
            decay = sorted(abs(ev.real) for ev in np.linalg.eigvals(matrix))[1]
            t_end = 40.0 / decay
            trajectory = propagate_dynamics(gen, np.array([1.0, 0.0, 0.0, 0.0]), [0.0, t_end], 1e-12, 1e-14)
            yield float(np.max(np.abs(trajectory.states[-1].real - steady.populations)))

    def run(self) -> ValidationReport:
        """Run every suite; a suite that raises is reported as failed."""
        report = ValidationReport(grid=self.grid)
        for name, tolerance, suite in self._suites:
            start = time.perf_counter()
            worst, cases, error = 0.0, 0, ""
            try:
                for residual in suite():
                    worst = max(worst, float(residual)) if math.isfinite(residual) else float("nan")
                    cases += 1
            except QHeatError as exc:
                error = f"{type(exc).__name__}: {exc}"
                logger.error("Suite %r raised %s", name, error)
            elapsed = time.perf_counter() - start
            result = SuiteResult(name, worst, tolerance, cases, elapsed, error)
            logger.info("%-32s %.3e (tol %.1e) %s", name, worst, tolerance, "pass" if result.passed else "FAIL")
            report.results.append(result)
        return report

