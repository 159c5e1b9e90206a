"""
Transport analysis for qheat.

Parameter sweeps over one device with NDTC detection, the NIBA loop and
Redfield transition-current decompositions, three-terminal currents, heat
amplification factors and the partial-coupling NDTC scan.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from enum import Enum
import logging
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.config import SolverConfig
from src.currents import niba_loop_currents, niba_right_components, redfield_transition_currents
from src.engine import HeatTransportEngine
from src.errors import QHeatError, SchemeMismatchError, TooFewPointsError
from src.fcs import SteadyState
from src.model import L, L_C, L_H, R, SystemSpec, Topology, build_lab_frame
from src.rates import NibaRateTable, RateEngine, build_niba_rate_table

logger = logging.getLogger("QHeat.Transport")

# Result-table column of each terminal's current
CURRENT_COLUMNS = {L: "i_l", R: "i_r", L_H: "i_lh", L_C: "i_lc"}

STATUS_OK = "ok"
STATUS_FAILED = "failed"


class SweepAxis(str, Enum):
    """Swept parameter."""

    DELTA_T = "delta_t"
    ALPHA_BOTH = "alpha_both"
    ALPHA_RIGHT = "alpha_right"
    T_R = "t_r"
    EPSILON = "epsilon"
    U = "u"


class Normalization(str, Enum):
    NONE = "none"
    PER_ALPHA_MAX = "per_alpha_max"


@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sweep of a device.

    Attributes:
        base: Device at the sweep's reference point.
        axis: Swept parameter.
        grid: Strictly monotone grid values.
        scheme: Solver scheme.
        normalization: ``per_alpha_max`` divides currents by the sweep maximum.
        t0: Mean temperature for ``delta_t`` sweeps; the base's mean if omitted.
        terminal: Terminal whose current fills the ``current`` column.
        all_terminals: Also count every other terminal.
        noise: Add the second cumulant of ``terminal``.
    """

    base: SystemSpec
    axis: SweepAxis
    grid: Tuple[float, ...]
    scheme: str = "neptre"
    normalization: Normalization = Normalization.NONE
    t0: Optional[float] = None
    terminal: str = R
    all_terminals: bool = False
    noise: bool = False

    def __post_init__(self):
        object.__setattr__(self, "axis", SweepAxis(self.axis))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if not self.grid:
            raise ValueError("grid must not be empty")
        steps = np.diff(self.grid)
        if steps.size and not (np.all(steps > 0.0) or np.all(steps < 0.0)):
            raise ValueError(f"grid must be strictly monotone, got {list(self.grid)}")
        if self.terminal not in self.base.terminals:
            raise ValueError(f"terminal must be one of {self.base.terminals}, got {self.terminal!r}")
        if self.axis is SweepAxis.DELTA_T and self.base.topology is not Topology.TWO_TERMINAL:
            raise ValueError("delta_t sweeps need a two-terminal device")

    @property
    def mean_temperature(self) -> float:
        if self.t0 is not None:
            return self.t0
        return 0.5 * (self.base.baths[L].temperature + self.base.baths[R].temperature)

    def point(self, value: float) -> SystemSpec:
        """Device at one grid value."""
        base = self.base
        if self.axis is SweepAxis.DELTA_T:
            t0 = self.mean_temperature
            return base.with_temperatures(L=t0 + 0.5 * value, R=t0 - 0.5 * value)
        if self.axis is SweepAxis.T_R:
            return base.with_temperatures(R=value)
        if self.axis is SweepAxis.ALPHA_RIGHT:
            return base.with_bath(R, base.baths[R].with_alpha(value))
        if self.axis is SweepAxis.ALPHA_BOTH:
            spec = base
            for terminal in base.terminals:
                spec = spec.with_bath(terminal, base.baths[terminal].with_alpha(value))
            return spec
        if self.axis is SweepAxis.EPSILON:
            return replace(base, left=replace(base.left, epsilon=value), right=replace(base.right, epsilon=value))
        return replace(base, u=value)

    def counted_terminals(self) -> Tuple[str, ...]:
        if self.all_terminals:
            return (self.terminal,) + tuple(t for t in self.base.terminals if t != self.terminal)
        return (self.terminal,)


@dataclass(frozen=True)
class NdtcReport:
    """Negative differential thermal conductance of one current curve.

    Attributes:
        turnover: Grid value of the interior maximum, from a quadratic fit.
        has_ndtc: Some interior slope is negative after an earlier positive one.
        dI_dT: Finite-difference slopes on the grid.
    """

    turnover: Optional[float]
    has_ndtc: bool
    dI_dT: List[float]


class LoopCurrents(NamedTuple):
    forward: float
    backward: float
    total: float


@dataclass(frozen=True)
class TransitionDecomposition:
    """Net pairwise energy flows J_nm into one weak-coupling bath."""

    currents: Dict[Tuple[int, int], float]

    @property
    def total(self) -> float:
        return float(sum(self.currents.values()))

    def dominant(self, count: int = 4) -> List[Tuple[int, int]]:
        """Channels with the largest |J_nm|, largest first."""
        return sorted(self.currents, key=lambda pair: -abs(self.currents[pair]))[:count]


@dataclass(frozen=True)
class ThreeTerminalCurrents:
    """Steady currents of a three-terminal device.

    ``components`` holds the NIBA split of I_R into its upper and lower
    transition terms when the scheme is NIBA.
    """

    i_lh: float
    i_lc: float
    i_r: float
    components: Optional[Tuple[float, float]] = None
    analytic_r: Optional[float] = None

    @property
    def energy_residual(self) -> float:
        return abs(self.i_lh + self.i_lc + self.i_r)


@dataclass
class AmplificationReport:
    """Heat amplification over a T_R grid.

    beta_* are NaN at divergent points; the raw T_R slopes are kept next to
    them so the divergence can be inspected.
    """

    tr_grid: List[float]
    i_lh: List[float]
    i_lc: List[float]
    i_r: List[float]
    di_lh: List[float]
    di_lc: List[float]
    di_r: List[float]
    beta_lh: List[float]
    beta_lc: List[float]
    theta: List[int]
    divergence_flags: List[bool]
    turnover: Optional[float] = None

    def max_beta_lh(self) -> float:
        finite = [b for b in self.beta_lh if np.isfinite(b)]
        return max(finite) if finite else float("nan")

    def beta_identity_residual(self) -> float:
        """max |beta_Lc - |beta_Lh + (-1)^theta|| over finite points."""
        worst = 0.0
        for lh, lc, theta in zip(self.beta_lh, self.beta_lc, self.theta):
            if np.isfinite(lh) and np.isfinite(lc):
                worst = max(worst, abs(lc - abs(lh + (-1.0) ** theta)))
        return worst

    def energy_residual(self) -> float:
        return float(max(abs(a + b + c) for a, b, c in zip(self.i_lh, self.i_lc, self.i_r)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t_r": self.tr_grid,
                "i_lh": self.i_lh,
                "i_lc": self.i_lc,
                "i_r": self.i_r,
                "beta_lh": self.beta_lh,
                "beta_lc": self.beta_lc,
                "theta": self.theta,
                "divergent_flag": self.divergence_flags,
                "di_lh_dtr": self.di_lh,
                "di_lc_dtr": self.di_lc,
                "di_r_dtr": self.di_r,
            }
        )


@dataclass
class CouplingScanReport:
    """NDTC boundary in the right coupling strength."""

    alpha_l: float
    alpha_r: List[float]
    reports: List[NdtcReport] = field(default_factory=list)
    tables: List[pd.DataFrame] = field(default_factory=list, repr=False)

    @property
    def onset(self) -> Optional[float]:
        """Smallest alpha_R whose sweep shows NDTC."""
        showing = [alpha for alpha, report in zip(self.alpha_r, self.reports) if report.has_ndtc]
        return min(showing) if showing else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "alpha_r": self.alpha_r,
                "has_ndtc": [r.has_ndtc for r in self.reports],
                "turnover": [np.nan if r.turnover is None else r.turnover for r in self.reports],
            }
        )


def run_ordered(
    tasks: Sequence[Callable[[], Any]],
    workers: int,
    desc: str,
    progress: bool,
) -> List[Any]:
    """Run independent tasks concurrently; results come back in task order."""
    results: List[Any] = [None] * len(tasks)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {pool.submit(task): index for index, task in enumerate(tasks)}
        with tqdm(total=len(tasks), desc=desc, disable=not progress, leave=False) as pbar:
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                pbar.update(1)
    return results


def _engine_for(scheme: str, config: Optional[SolverConfig], rate_engine: Optional[RateEngine]) -> HeatTransportEngine:
    config = config or SolverConfig()
    if config.scheme != scheme:
        config = replace(config, scheme=scheme)
    return HeatTransportEngine(config, rate_engine)


def _sweep_row(engine: HeatTransportEngine, spec: SweepSpec, value: float) -> Dict[str, Any]:
    row: Dict[str, Any] = {spec.axis.value: value, "scheme": engine.config.scheme}
    try:
        point = spec.point(value)
        result = engine.solve(point, spec.counted_terminals(), noise=spec.noise)
    except (QHeatError, ValueError) as exc:
        logger.warning("Sweep point %s=%g failed: %s", spec.axis.value, value, exc)
        row.update({"current": np.nan, "status": STATUS_FAILED, "error": str(exc)})
        return row

    row["current"] = result.currents[spec.terminal]
    if spec.all_terminals:
        for terminal, current in result.currents.items():
            row[CURRENT_COLUMNS[terminal]] = current
    if spec.noise:
        row["noise"] = result.noise[spec.terminal]
    if engine.config.scheme == "niba" and point.topology is Topology.TWO_TERMINAL and point.symmetric_splitting:
        table = build_niba_rate_table(point, engine.config.quadrature, engine.rate_engine)
        loops = loop_decomposition(table)
        row["loop_forward"] = loops.forward
        row["loop_backward"] = loops.backward
    row["steady_residual"] = result.steady.residual
    row.update({"status": STATUS_OK, "error": ""})
    return row


def current_sweep(
    spec: SweepSpec,
    config: Optional[SolverConfig] = None,
    rate_engine: Optional[RateEngine] = None,
    workers: Optional[int] = None,
    progress: bool = False,
) -> pd.DataFrame:
    """Current along a sweep, one row per grid value in grid order.

    Points that fail keep their row with ``status=failed`` and a NaN current.
    """
    engine = _engine_for(spec.scheme, config, rate_engine)
    workers = workers or engine.config.worker_count()
    logger.info("Sweeping %s over %d points (%s, %d workers)", spec.axis.value, len(spec.grid), spec.scheme, workers)

    tasks = [lambda v=value: _sweep_row(engine, spec, v) for value in spec.grid]
    rows = run_ordered(tasks, workers, f"{spec.scheme} {spec.axis.value}", progress)
    table = pd.DataFrame(rows)

    if spec.normalization is Normalization.PER_ALPHA_MAX:
        scale = np.nanmax(np.abs(table["current"].to_numpy(dtype=float))) if table["current"].notna().any() else np.nan
        table["normalized_current"] = table["current"] / scale if scale and np.isfinite(scale) else np.nan

    failed = int((table["status"] == STATUS_FAILED).sum())
    if failed:
        logger.warning("%d of %d sweep points failed", failed, len(table))
    columns = [c for c in table.columns if c not in ("scheme", "status", "error")] + ["scheme", "status", "error"]
    return table[columns]


def detect_ndtc(grid: Sequence[float], current: Sequence[float]) -> NdtcReport:
    """Slopes, NDTC flag and turnover of a current curve.

    Raises:
        TooFewPointsError: For fewer than four points.
    """
    x = np.asarray(grid, dtype=float)
    y = np.asarray(current, dtype=float)
    if x.size < 4:
        raise TooFewPointsError(f"NDTC detection needs at least 4 points, got {x.size}")
    slopes = np.gradient(y, x)
    scale = np.max(np.abs(y)) / max(abs(x[-1] - x[0]), 1e-300)
    tol = 1e-9 * scale

    rising = False
    falling_at = None
    for k, slope in enumerate(slopes):
        if 0 < k < x.size - 1 and rising and slope < -tol:
            falling_at = k
            break
        if slope > tol:
            rising = True
    if falling_at is None:
        return NdtcReport(turnover=None, has_ndtc=False, dI_dT=slopes.tolist())

    peak = int(np.argmax(y[: falling_at + 1]))
    peak = min(max(peak, 1), x.size - 2)
    a, b, _ = np.polyfit(x[peak - 1 : peak + 2], y[peak - 1 : peak + 2], 2)
    turnover = float(x[peak])
    if a < 0.0:
        lo, hi = sorted((x[peak - 1], x[peak + 1]))
        turnover = float(np.clip(-b / (2.0 * a), lo, hi))
    return NdtcReport(turnover=turnover, has_ndtc=True, dI_dT=slopes.tolist())


def detect_ndtc_table(table: pd.DataFrame, column: str = "current") -> NdtcReport:
    """detect_ndtc on a sweep table, skipping failed rows."""
    ok = table[table["status"] == STATUS_OK] if "status" in table.columns else table
    return detect_ndtc(ok.iloc[:, 0].to_numpy(dtype=float), ok[column].to_numpy(dtype=float))


def annotate_ndtc(table: pd.DataFrame, column: str = "current") -> Tuple[pd.DataFrame, NdtcReport]:
    """Copy of a sweep table with ``slope`` and ``has_ndtc`` columns, and the report."""
    report = detect_ndtc_table(table, column)
    annotated = table.copy()
    ok = annotated["status"] == STATUS_OK if "status" in annotated.columns else np.ones(len(annotated), dtype=bool)
    annotated["slope"] = np.nan
    annotated.loc[ok, "slope"] = report.dI_dT
    annotated["has_ndtc"] = report.has_ndtc
    return annotated, report


def extremum_location(grid: Sequence[float], values: Sequence[float]) -> Optional[float]:
    """Interior maximum or minimum of a curve, whichever comes first."""
    values = np.asarray(values, dtype=float)
    peak = detect_ndtc(grid, values)
    if peak.has_ndtc:
        return peak.turnover
    return detect_ndtc(grid, -values).turnover


def loop_decomposition(table: NibaRateTable) -> LoopCurrents:
    """Forward and backward NIBA loop currents and their difference.

    Raises:
        AsymmetricSplittingError: If eps_L != eps_R.
    """
    return LoopCurrents(*niba_loop_currents(table))


def transition_current_decomposition(
    spec: SystemSpec,
    steady: SteadyState,
    scheme: str = "redfield",
    terminal: str = R,
    freq_tol: float = 1e-9,
) -> TransitionDecomposition:
    """Pairwise transition currents into a weak-coupling bath.

    Raises:
        SchemeMismatchError: Unless the steady state comes from the Redfield scheme.
    """
    if scheme != "redfield":
        raise SchemeMismatchError(f"transition currents need the redfield scheme, got {scheme!r}")
    frame = build_lab_frame(spec, freq_tol)
    return TransitionDecomposition(redfield_transition_currents(spec, frame, steady.populations, terminal))


def three_terminal_currents(
    spec: SystemSpec,
    config: Optional[SolverConfig] = None,
    rate_engine: Optional[RateEngine] = None,
) -> ThreeTerminalCurrents:
    """Each bath's current from its own counting field on the shared steady state."""
    if spec.topology is not Topology.THREE_TERMINAL:
        raise ValueError(f"three_terminal_currents needs a three-terminal device, got {spec.topology.value}")
    engine = HeatTransportEngine(config, rate_engine)
    result = engine.solve(spec)
    components = None
    if engine.config.scheme == "niba":
        table = build_niba_rate_table(spec, engine.config.quadrature, engine.rate_engine)
        components = niba_right_components(table, result.steady.populations)
    currents = ThreeTerminalCurrents(
        result.currents[L_H], result.currents[L_C], result.currents[R], components, result.analytic.get(R)
    )
    if currents.energy_residual > 1e-8:
        logger.warning("Three-terminal energy residual %.3e", currents.energy_residual)
    return currents


def _slope(engine: HeatTransportEngine, spec: SystemSpec, t_r: float, step: float) -> Dict[str, float]:
    """dI_v/dT_R by central differences with one Richardson step."""

    def currents(t: float) -> Dict[str, float]:
        return engine.solve(spec.with_temperatures(R=t)).currents

    def central(h: float) -> Dict[str, float]:
        up, down = currents(t_r + h), currents(t_r - h)
        return {t: (up[t] - down[t]) / (2.0 * h) for t in up}

    fine, coarse = central(step), central(2.0 * step)
    return {t: (4.0 * fine[t] - coarse[t]) / 3.0 for t in fine}


def amplification_scan(
    spec: SystemSpec,
    tr_grid: Sequence[float],
    dT_step: float = 1e-3,
    config: Optional[SolverConfig] = None,
    rate_engine: Optional[RateEngine] = None,
    workers: Optional[int] = None,
    progress: bool = False,
) -> AmplificationReport:
    """Amplification factors beta_Lh, beta_Lc = |dI_Lu/dT_R| / |dI_R/dT_R| on a T_R grid."""
    if spec.topology is not Topology.THREE_TERMINAL:
        raise ValueError(f"amplification_scan needs a three-terminal device, got {spec.topology.value}")
    if not dT_step > 0.0:
        raise ValueError(f"dT_step must be > 0, got {dT_step}")
    grid = [float(t) for t in tr_grid]
    if min(grid) - 2.0 * dT_step <= 0.0:
        raise ValueError(f"tr_grid must stay above 2 * dT_step ({2.0 * dT_step}), got min {min(grid)}")

    engine = HeatTransportEngine(config, rate_engine)
    workers = workers or engine.config.worker_count()

    def point(t_r: float) -> Tuple[Dict[str, float], Dict[str, float]]:
        return engine.solve(spec.with_temperatures(R=t_r)).currents, _slope(engine, spec, t_r, dT_step)

    points = run_ordered([lambda t=t_r: point(t) for t_r in grid], workers, "amplification", progress)
    currents = [p[0] for p in points]
    slopes = [p[1] for p in points]

    di_r = np.array([s[R] for s in slopes])
    di_lh = np.array([s[L_H] for s in slopes])
    di_lc = np.array([s[L_C] for s in slopes])

    divergent = np.abs(di_r) < 1e-10 * np.abs(di_lh)
    crossings = np.nonzero(np.sign(di_r[:-1]) * np.sign(di_r[1:]) < 0)[0]
    for k in crossings:
        divergent[k] = divergent[k + 1] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        beta_lh = np.where(divergent, np.nan, np.abs(di_lh / di_r))
        beta_lc = np.where(divergent, np.nan, np.abs(di_lc / di_r))
        theta = np.where(di_lh / di_r >= 0.0, 0, 1)

    turnover = None
    if crossings.size:
        k = int(crossings[0])
        # linear zero of dI_R/dT_R between the two bracketing points
        turnover = float(grid[k] - di_r[k] * (grid[k + 1] - grid[k]) / (di_r[k + 1] - di_r[k]))

    logger.info("Amplification scan: %d points, %d divergent", len(grid), int(divergent.sum()))
    return AmplificationReport(
        tr_grid=grid,
        i_lh=[c[L_H] for c in currents],
        i_lc=[c[L_C] for c in currents],
        i_r=[c[R] for c in currents],
        di_lh=di_lh.tolist(),
        di_lc=di_lc.tolist(),
        di_r=di_r.tolist(),
        beta_lh=beta_lh.tolist(),
        beta_lc=beta_lc.tolist(),
        theta=[int(t) for t in theta],
        divergence_flags=[bool(d) for d in divergent],
        turnover=turnover,
    )


def partial_coupling_scan(
    base: SystemSpec,
    alpha_r_grid: Sequence[float],
    dt_grid: Sequence[float],
    t0: Optional[float] = None,
    scheme: str = "neptre",
    config: Optional[SolverConfig] = None,
    rate_engine: Optional[RateEngine] = None,
    workers: Optional[int] = None,
    progress: bool = False,
) -> CouplingScanReport:
    """Delta-T sweep and NDTC detection for each alpha_R at the base's alpha_L."""
    if base.topology is not Topology.TWO_TERMINAL:
        raise ValueError("partial_coupling_scan needs a two-terminal device")
    report = CouplingScanReport(alpha_l=base.baths[L].alpha, alpha_r=[float(a) for a in alpha_r_grid])
    for alpha_r in report.alpha_r:
        sweep = SweepSpec(
            base=base.with_bath(R, base.baths[R].with_alpha(alpha_r)),
            axis=SweepAxis.DELTA_T,
            grid=tuple(dt_grid),
            scheme=scheme,
            t0=t0,
        )
        table = current_sweep(sweep, config, rate_engine, workers, progress)
        ndtc = detect_ndtc_table(table)
        logger.info("alpha_R=%g: has_ndtc=%s turnover=%s", alpha_r, ndtc.has_ndtc, ndtc.turnover)
        report.reports.append(ndtc)
        report.tables.append(table)
    return report
