"""
Configuration module for qheat.

This module defines the configuration classes that hold numerical settings
for the bath quadratures and the master-equation solvers.
"""

from dataclasses import dataclass, field, fields
import os
from typing import Any, Dict, Optional


PHASE_METHODS = ("closed_form", "quadrature")
SCHEMES = ("neptre", "redfield", "niba")
REDFIELD_FORMS = ("full", "population")


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings for every integral over frequency or time.

    Frozen so kernels that carry it stay hashable and can key the rate cache.
    """

    # Adaptive frequency quadrature (renormalization factor, phase function)
    rel_tol: float = 1e-10
    abs_floor: float = 1e-14
    quad_limit: int = 400
    omega_max_factor: float = 40.0

    # Panel integration of the time kernels
    gauss_order: int = 16
    panel_scale: float = 1.0
    panel_growth: float = 1.15
    horizon_factor: float = 200.0

    # How kernel grids evaluate the phase function
    phase_method: str = "closed_form"

    # Rates between this floor and zero are clamped to zero
    negative_rate_floor: float = -1e-12

    def __post_init__(self):
        """Validate the settings."""
        if not 0.0 < self.rel_tol < 1e-2:
            raise ValueError(f"rel_tol must be in (0, 1e-2), got {self.rel_tol}")
        if self.abs_floor < 0.0:
            raise ValueError(f"abs_floor must be non-negative, got {self.abs_floor}")
        if self.quad_limit < 50:
            raise ValueError(f"quad_limit must be at least 50, got {self.quad_limit}")
        if self.omega_max_factor < 20.0:
            raise ValueError(f"omega_max_factor must be at least 20, got {self.omega_max_factor}")
        if self.gauss_order < 4:
            raise ValueError(f"gauss_order must be at least 4, got {self.gauss_order}")
        if self.panel_scale <= 0.0:
            raise ValueError(f"panel_scale must be positive, got {self.panel_scale}")
        if self.panel_growth < 1.0:
            raise ValueError(f"panel_growth must be >= 1, got {self.panel_growth}")
        if self.horizon_factor < 20.0:
            raise ValueError(f"horizon_factor must be at least 20, got {self.horizon_factor}")
        if self.phase_method not in PHASE_METHODS:
            raise ValueError(f"phase_method must be one of {PHASE_METHODS}, got {self.phase_method!r}")
        if self.negative_rate_floor > 0.0:
            raise ValueError(f"negative_rate_floor must be <= 0, got {self.negative_rate_floor}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert the config to a dictionary.

        Returns:
            A dictionary representation of the config.
        """
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "QuadratureConfig":
        """Create a QuadratureConfig from a dictionary."""
        return cls(**config_dict)


@dataclass
class SolverConfig:
    """Settings for generators, steady states and counting statistics."""

    scheme: str = "neptre"
    redfield_form: str = "full"
    secular: bool = False
    neglect_lamb_shift: bool = False

    # Counting-field steps for the first and second cumulant
    chi_step: float = 1e-4
    noise_step: float = 1e-3

    freq_tol: float = 1e-9
    zero_tol: float = 1e-9

    dynamics_rtol: float = 1e-10
    dynamics_atol: float = 1e-12

    # Sweep concurrency, 0 = one worker per CPU
    threads: int = 0

    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        """Run validation after initialization."""
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.redfield_form not in REDFIELD_FORMS:
            raise ValueError(f"redfield_form must be one of {REDFIELD_FORMS}, got {self.redfield_form!r}")
        if not 0.0 < self.chi_step <= 1e-2:
            raise ValueError(f"chi_step must be in (0, 1e-2], got {self.chi_step}")
        if not 0.0 < self.noise_step <= 1e-1:
            raise ValueError(f"noise_step must be in (0, 0.1], got {self.noise_step}")
        if self.freq_tol <= 0.0:
            raise ValueError(f"freq_tol must be positive, got {self.freq_tol}")
        if self.zero_tol <= 0.0:
            raise ValueError(f"zero_tol must be positive, got {self.zero_tol}")
        if self.threads < 0:
            raise ValueError(f"threads must be >= 0, got {self.threads}")
        if isinstance(self.quadrature, dict):
            self.quadrature = QuadratureConfig.from_dict(self.quadrature)

    def to_dict(self) -> Dict[str, Any]:
        """Convert the config to a dictionary.

        Returns:
            A dictionary representation of the config, quadrature nested.
        """
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "quadrature"}
        data["quadrature"] = self.quadrature.to_dict()
        return data

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> "SolverConfig":
        """Create a SolverConfig from a dictionary.

        Args:
            config_dict: A dictionary containing configuration values.

        Returns:
            A SolverConfig instance with the provided values.
        """
        return cls(**config_dict)

    def worker_count(self, env: Optional[Dict[str, str]] = None) -> int:
        """Number of sweep workers, honouring QHEAT_THREADS."""
        env = os.environ if env is None else env
        threads = self.threads
        raw = env.get("QHEAT_THREADS")
        if raw is not None and raw.strip():
            try:
                threads = int(raw)
            except ValueError:
                raise ValueError(f"QHEAT_THREADS must be an integer, got {raw!r}")
            if threads < 0:
                raise ValueError(f"QHEAT_THREADS must be >= 0, got {threads}")
        if threads == 0:
            threads = os.cpu_count() or 1
        return threads
