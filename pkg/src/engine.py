"""
Single-point heat transport driver for qheat.

HeatTransportEngine ties the pieces together for one device: it builds the
counted generator of the configured scheme for every requested terminal,
solves the shared steady state once, extracts current (and noise) from the
cumulant generating function, and cross-checks against the closed-form
current where one exists.
"""

from dataclasses import dataclass, field
import logging
import time
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np

from src.config import SolverConfig
from src.currents import analytic_current, redfield_current_verbatim
from src.errors import SchemeMismatchError
from src.fcs import SteadyState, cumulant, steady_state
from src.generators import Scheme, TiltedGenerator, tilted_generator
from src.model import R, SystemSpec
from src.rates import RateEngine, default_engine

logger = logging.getLogger("QHeat.Engine")


@dataclass
class TransportResult:
    """Currents of one solve.

    Attributes:
        scheme: Solver scheme.
        currents: First cumulant per counted terminal (energy per time into the bath).
        noise: Second cumulant per terminal, None when not requested.
        analytic: Closed-form current per terminal, None where there is none.
        steady: Shared steady state.
        diagnostics: Residuals, timing and rate-cache statistics.
    """

    scheme: str
    currents: Dict[str, float]
    noise: Dict[str, Optional[float]]
    analytic: Dict[str, Optional[float]]
    steady: SteadyState
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def terminals(self) -> Tuple[str, ...]:
        return tuple(self.currents)

    @property
    def energy_residual(self) -> float:
        return float(abs(sum(self.currents.values())))

    def current(self, terminal: str = R) -> float:
        return self.currents[terminal]

    def max_analytic_gap(self) -> Optional[float]:
        """Largest relative gap between counting-statistics and closed-form currents."""
        gaps = []
        for terminal, value in self.analytic.items():
            if value is None:
                continue
            scale = max(abs(value), abs(self.currents[terminal]), 1e-300)
            gaps.append(abs(self.currents[terminal] - value) / scale)
        return max(gaps) if gaps else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme,
            "currents": dict(self.currents),
            "noise": dict(self.noise),
            "analytic": dict(self.analytic),
            "populations": [float(p) for p in self.steady.populations],
            "diagnostics": dict(self.diagnostics),
        }


class HeatTransportEngine:
    """Solves steady-state heat currents for one solver configuration."""

    def __init__(self, config: Optional[SolverConfig] = None, rate_engine: Optional[RateEngine] = None):
        """Initialize the engine.

        Args:
            config: Solver settings; defaults to NE-PTRE with default tolerances.
            rate_engine: Shared rate cache; the process-wide one if omitted.
        """
        self.config = config or SolverConfig()
        self.rate_engine = rate_engine or default_engine()

    def generator(self, spec: SystemSpec, terminal: str = R) -> TiltedGenerator:
        return tilted_generator(spec, self.config, terminal, self.rate_engine)

    def solve(
        self,
        spec: SystemSpec,
        terminals: Optional[Iterable[str]] = None,
        noise: bool = False,
    ) -> TransportResult:
        """Currents into ``terminals`` (default: all of the device's baths).

        Raises:
            QHeatError: Any solver failure; nothing is caught here.
        """
        start = time.perf_counter()
        terminals = tuple(terminals) if terminals is not None else spec.terminals
        unknown = [t for t in terminals if t not in spec.terminals]
        if unknown:
            raise ValueError(f"terminals must be among {spec.terminals}, got {unknown}")

        generators = {terminal: self.generator(spec, terminal) for terminal in terminals}
        first = generators[terminals[0]]
        steady = steady_state(first, self.config.zero_tol)
        trace_defect = float(np.max(np.abs(first.trace_vector() @ first(0.0))))

        currents, noises, analytic, verbatim = {}, {}, {}, {}
        for terminal, gen in generators.items():
            result = cumulant(
                gen,
                order=2 if noise else 1,
                chi_step=self.config.chi_step,
                noise_step=self.config.noise_step,
                steady=steady,
                zero_tol=self.config.zero_tol,
            )
            currents[terminal] = result.current
            noises[terminal] = result.noise
            analytic[terminal] = self._analytic(gen, steady, terminal)
            if gen.scheme is Scheme.REDFIELD and gen.form == "population":
                # printed emission-weighted form, reported next to the net-flux reference
                verbatim[terminal] = redfield_current_verbatim(gen.system, gen.frame, steady.populations, terminal)

        elapsed = time.perf_counter() - start
        diagnostics = {
            "steady_residual": steady.residual,
            "trace_defect": trace_defect,
            "coherence_norm": steady.coherence_norm(),
            "cache": self.rate_engine.stats(),
            "seconds": elapsed,
        }
        if verbatim:
            diagnostics["redfield_verbatim"] = verbatim
        result = TransportResult(
            scheme=self.config.scheme,
            currents=currents,
            noise=noises,
            analytic=analytic,
            steady=steady,
            diagnostics=diagnostics,
        )
        if set(terminals) == set(spec.terminals):
            diagnostics["energy_residual"] = result.energy_residual
        logger.debug(
            "Solved %s point in %.2fs: %s",
            self.config.scheme,
            elapsed,
            ", ".join(f"I_{t}={v:.6e}" for t, v in currents.items()),
        )
        return result

    def current(self, spec: SystemSpec, terminal: str = R) -> float:
        """Steady heat current into one bath."""
        return self.solve(spec, (terminal,)).currents[terminal]

    @staticmethod
    def _analytic(gen: TiltedGenerator, steady: SteadyState, terminal: str) -> Optional[float]:
        try:
            return analytic_current(gen, steady, terminal)
        except SchemeMismatchError as exc:
            logger.debug("No closed-form current for %s: %s", terminal, exc)
            return None
