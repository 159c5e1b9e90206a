"""
Figure presets for qheat.

Each figure's parameter set lives in a version-controlled JSON file under
``presets/``. A preset holds the device and solver sections of a run file,
the primary sweep, figure-specific parameters and the acceptance property
that ``qheat reproduce`` checks.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import Field, ValidationError

from src.errors import ConfigError
from src.run_config import RunConfig, SolverModel, StrictModel, SweepModel, SystemModel, config_error

logger = logging.getLogger("QHeat.Presets")

PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "figA1", "figA2", "figB1", "figC1")

PresetKind = Literal[
    "unification",
    "ndtc",
    "loops",
    "coupling_scan",
    "amplification",
    "dynamics",
    "transitions",
    "three_terminal",
]


class FigurePreset(StrictModel):
    """One figure's parameters."""

    figure: str
    description: str = ""
    kind: PresetKind
    system: SystemModel
    solver: SolverModel = Field(default_factory=SolverModel)
    sweep: Optional[SweepModel] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)
    acceptance: Dict[str, Any] = Field(default_factory=dict)

    def run_config(self) -> RunConfig:
        """The primary panel as a run file."""
        return RunConfig(system=self.system, solver=self.solver, sweep=self.sweep)

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class PresetLoader:
    """Loads figure presets from a directory."""

    def __init__(self, preset_dir: Union[str, Path, None] = None):
        """Initialize the PresetLoader.

        Args:
            preset_dir: Directory of ``<figure>.json`` files; the bundled one by default.
        """
        self.preset_dir = Path(preset_dir) if preset_dir is not None else PRESET_DIR
        self._cache: Dict[str, FigurePreset] = {}

    def available(self) -> List[str]:
        """Figure ids with a preset file, in canonical order."""
        present = {p.stem for p in self.preset_dir.glob("*.json")}
        known = [f for f in FIGURES if f in present]
        return known + sorted(present - set(FIGURES))

    def load(self, figure: str) -> FigurePreset:
        """Load and validate one preset.

        Raises:
            ConfigError: If the preset is missing or invalid.
        """
        if figure in self._cache:
            return self._cache[figure]
        path = self.preset_dir / f"{figure}.json"
        if not path.exists():
            raise ConfigError(f"unknown figure {figure!r}; available: {', '.join(self.available())}")

        text = path.read_text(encoding="utf-8")
        try:
            preset = FigurePreset.model_validate(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from exc
        except ValidationError as exc:
            raise config_error(exc, text) from exc
        if preset.figure != figure:
            raise ConfigError(f"{path}: figure field is {preset.figure!r}, expected {figure!r}", key="figure")

        logger.debug("Loaded preset %s (%s)", figure, preset.kind)
        self._cache[figure] = preset
        return preset

    def run_config(self, figure: str) -> RunConfig:
        """Primary sweep of a figure as a run file."""
        preset = self.load(figure)
        if preset.sweep is None:
            raise ConfigError(f"preset {figure!r} has no sweep section", key="sweep")
        return preset.run_config()

    def load_all(self) -> Dict[str, FigurePreset]:
        return {figure: self.load(figure) for figure in self.available()}
