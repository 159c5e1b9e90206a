"""
Run configuration files for qheat.

A run file is JSON with four sections, ``system``, ``solver``, ``sweep`` and
``output``. Parsing is strict: unknown keys, duplicate keys and values that
violate a physical constraint are all rejected with a ConfigError naming the
offending key and, when it can be found, its line in the file.
"""

import hashlib
import json
import logging
from pathlib import Path
import re
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.baths import BathSpec
from src.config import QuadratureConfig, SolverConfig
from src.errors import ConfigError
from src.model import QubitSpec, SystemSpec, Topology
from src.transport import SweepSpec

logger = logging.getLogger("QHeat.RunConfig")

_FIELD_IN_MESSAGE = re.compile(r"(\w+) must")


class StrictModel(BaseModel):
    """Base for every section: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")


class QubitModel(StrictModel):
    epsilon: float = Field(default=0.0, description="Splitting energy")
    delta: float = Field(default=1.0, ge=0.0, description="Tunneling strength")


class BathModel(StrictModel):
    alpha: float = Field(..., ge=0.0, description="Dimensionless coupling")
    omega_c: float = Field(default=5.0, gt=0.0, description="Cutoff frequency")
    temperature: float = Field(..., gt=0.0, description="Bath temperature")


class SystemModel(StrictModel):
    """Device section."""

    u: float = Field(default=0.1, description="Inter-qubit coupling")
    left: QubitModel = Field(default_factory=QubitModel)
    right: QubitModel = Field(default_factory=QubitModel)
    topology: Literal["two_terminal", "three_terminal"] = "two_terminal"
    baths: Dict[str, BathModel]

    @model_validator(mode="after")
    def _check_device(self) -> "SystemModel":
        self.to_spec()
        return self

    def to_spec(self) -> SystemSpec:
        return SystemSpec(
            u=self.u,
            left=QubitSpec(self.left.epsilon, self.left.delta),
            right=QubitSpec(self.right.epsilon, self.right.delta),
            topology=Topology(self.topology),
            baths={t: BathSpec(b.alpha, b.omega_c, b.temperature) for t, b in self.baths.items()},
        )


class QuadratureModel(StrictModel):
    rel_tol: float = 1e-10
    abs_floor: float = 1e-14
    quad_limit: int = 400
    omega_max_factor: float = 40.0
    gauss_order: int = 16
    panel_scale: float = 1.0
    panel_growth: float = 1.15
    horizon_factor: float = 200.0
    phase_method: Literal["closed_form", "quadrature"] = "closed_form"
    negative_rate_floor: float = -1e-12

    @model_validator(mode="after")
    def _check(self) -> "QuadratureModel":
        QuadratureConfig(**self.model_dump())
        return self


class SolverModel(StrictModel):
    """Solver section; ``cumulants`` = 2 adds the noise."""

    scheme: Literal["neptre", "redfield", "niba"] = "neptre"
    redfield_form: Literal["full", "population"] = "full"
    secular: bool = False
    neglect_lamb_shift: bool = False
    chi_step: float = 1e-4
    noise_step: float = 1e-3
    freq_tol: float = 1e-9
    zero_tol: float = 1e-9
    dynamics_rtol: float = 1e-10
    dynamics_atol: float = 1e-12
    threads: int = 0
    cumulants: Literal[1, 2] = 1
    quadrature: QuadratureModel = Field(default_factory=QuadratureModel)

    @model_validator(mode="after")
    def _check(self) -> "SolverModel":
        self.to_config()
        return self

    def to_config(self) -> SolverConfig:
        data = self.model_dump(exclude={"cumulants", "quadrature"})
        return SolverConfig(quadrature=QuadratureConfig(**self.quadrature.model_dump()), **data)


class GridRange(StrictModel):
    """Evenly spaced grid, stop included."""

    start: float
    stop: float
    step: float = Field(..., gt=0.0)

    def values(self) -> List[float]:
        count = int(np.floor(abs(self.stop - self.start) / self.step + 1e-9)) + 1
        direction = 1.0 if self.stop >= self.start else -1.0
        return [float(np.round(self.start + direction * k * self.step, 12)) for k in range(count)]


class SweepModel(StrictModel):
    """Sweep section; give either ``grid`` or ``range``."""

    axis: Literal["delta_t", "alpha_both", "alpha_right", "t_r", "epsilon", "u"]
    grid: Optional[List[float]] = None
    range: Optional[GridRange] = None
    normalization: Literal["none", "per_alpha_max"] = "none"
    t0: Optional[float] = Field(default=None, gt=0.0)
    terminal: Literal["L", "R", "L_h", "L_c"] = "R"
    all_terminals: bool = False
    analysis: Literal["current", "amplification"] = "current"
    dT_step: float = Field(default=1e-3, gt=0.0)

    @model_validator(mode="after")
    def _check_grid(self) -> "SweepModel":
        if (self.grid is None) == (self.range is None):
            raise ValueError("sweep needs exactly one of grid or range")
        if self.grid is not None and not self.grid:
            raise ValueError("grid must not be empty")
        if self.analysis == "amplification" and self.axis != "t_r":
            raise ValueError(f"amplification analysis sweeps t_r, got axis {self.axis!r}")
        return self

    def values(self) -> List[float]:
        return list(self.grid) if self.grid is not None else self.range.values()


class OutputModel(StrictModel):
    path: Optional[str] = None
    format: Literal["csv", "jsonl", "both"] = "csv"


class RunConfig(StrictModel):
    """Complete run file."""

    system: SystemModel
    solver: SolverModel = Field(default_factory=SolverModel)
    sweep: Optional[SweepModel] = None
    output: OutputModel = Field(default_factory=OutputModel)

    @model_validator(mode="after")
    def _check_sweep(self) -> "RunConfig":
        if self.sweep is not None:
            self.to_sweep_spec()
        return self

    def to_system_spec(self) -> SystemSpec:
        return self.system.to_spec()

    def to_solver_config(self) -> SolverConfig:
        return self.solver.to_config()

    def to_sweep_spec(self) -> SweepSpec:
        if self.sweep is None:
            raise ConfigError("run file has no sweep section", key="sweep")
        return SweepSpec(
            base=self.to_system_spec(),
            axis=self.sweep.axis,
            grid=tuple(self.sweep.values()),
            scheme=self.solver.scheme,
            normalization=self.sweep.normalization,
            t0=self.sweep.t0,
            terminal=self.sweep.terminal,
            all_terminals=self.sweep.all_terminals,
            noise=self.solver.cumulants == 2,
        )

    def dumps(self) -> str:
        """Canonical JSON text; parsing it gives back an equal config."""
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _reject_duplicates(pairs: Sequence[Tuple[str, Any]]) -> Dict[str, Any]:
    result: Dict[str, Any] = {}
    for key, value in pairs:
        if key in result:
            raise ConfigError(f"duplicate key {key!r}", key=key)
        result[key] = value
    return result


def _line_of(text: str, path: Sequence[Union[str, int]]) -> Optional[int]:
    """Line of the last key of ``path``, following the keys in file order."""
    lines = text.splitlines()
    start, found = 0, None
    for part in path:
        if not isinstance(part, str):
            continue
        needle = f'"{part}"'
        for number in range(start, len(lines)):
            if needle in lines[number]:
                start = found = number
                break
        else:
            break
    return None if found is None else found + 1


def config_error(exc: ValidationError, text: str) -> ConfigError:
    error = exc.errors()[0]
    path = [part for part in error["loc"] if not str(part).startswith("function-")]
    message = error["msg"]
    # errors from __post_init__ checks name the field in their message
    match = _FIELD_IN_MESSAGE.search(message)
    if error["type"] == "value_error" and match and (not path or path[-1] != match.group(1)):
        path.append(match.group(1))
    key = ".".join(str(part) for part in path) or None
    extra = f" (and {len(exc.errors()) - 1} more)" if len(exc.errors()) > 1 else ""
    return ConfigError(f"{message}{extra}", key=key, line=_line_of(text, path))


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse run-file text.

    Raises:
        ConfigError: On malformed JSON or any invalid value.
    """
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON: {exc.msg}", line=exc.lineno) from exc
    except ConfigError as exc:
        raise ConfigError(f"{source}: duplicate key {exc.key!r}", key=exc.key, line=_line_of(text, [exc.key])) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise config_error(exc, text) from exc


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read and parse a run file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    logger.debug("Loading run config %s", path)
    return parse_run_config(path.read_text(encoding="utf-8"), str(path))
