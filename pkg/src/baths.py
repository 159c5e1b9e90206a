"""
Bath functions for qheat.

Everything here depends on a single bosonic bath (or, for the left side of the
three-terminal device, on the pair of baths that share the left qubit): the
super-Ohmic spectral density, the Bose occupation, the renormalization factor
eta, the phase function Q(tau), the polaron correlation kernels C_x / C_y and
the NIBA kernel D. Counting fields enter the kernels only as a real shift of
the time argument, which callers apply before evaluation.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
import logging
import math
import warnings
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

from src.config import QuadratureConfig
from src.errors import NegativeFrequencyError, QuadratureFailure, ZeroFrequencyError

logger = logging.getLogger("QHeat.Baths")

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Lowest supported temperature in units of the cutoff frequency
MIN_TEMPERATURE_RATIO = 1e-3

# Bernoulli coefficients B_2k of the trigamma asymptotic series
_TRIGAMMA_SERIES = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0)
_TRIGAMMA_SHIFT = 10.0


class Axis(str, Enum):
    """Polaron coupling channel, sigma_x or sigma_y."""

    X = "x"
    Y = "y"


@dataclass(frozen=True)
class BathSpec:
    """Super-Ohmic bosonic bath.

    Attributes:
        alpha: Dimensionless system-bath coupling.
        omega_c: Cutoff frequency.
        temperature: Bath temperature (k_B = 1).
    """

    alpha: float
    omega_c: float
    temperature: float

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.omega_c > 0.0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if not self.temperature > 0.0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.temperature < MIN_TEMPERATURE_RATIO * self.omega_c:
            raise ValueError(
                f"temperature must be >= {MIN_TEMPERATURE_RATIO} * omega_c "
                f"({MIN_TEMPERATURE_RATIO * self.omega_c}), got {self.temperature}"
            )

    def with_temperature(self, temperature: float) -> "BathSpec":
        """Copy of this bath at another temperature."""
        return BathSpec(self.alpha, self.omega_c, temperature)

    def with_alpha(self, alpha: float) -> "BathSpec":
        """Copy of this bath with another coupling."""
        return BathSpec(alpha, self.omega_c, self.temperature)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "omega_c": self.omega_c, "temperature": self.temperature}


def spectral_density(spec: BathSpec, omega: ArrayLike) -> Union[float, np.ndarray]:
    """Super-Ohmic spectral density J(w) = pi alpha w^3 exp(-w/w_c) / w_c^2.

    Args:
        spec: The bath.
        omega: Non-negative frequency or array of frequencies.

    Returns:
        J(omega), a float for scalar input.

    Raises:
        NegativeFrequencyError: If any frequency is negative.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise NegativeFrequencyError(f"omega must be >= 0, got {omega}")
    value = np.pi * spec.alpha * w ** 3 * np.exp(-w / spec.omega_c) / spec.omega_c ** 2
    return float(value) if value.ndim == 0 else value


def bose_occupation(temperature: float, omega: ArrayLike) -> Union[float, np.ndarray]:
    """Bose-Einstein occupation 1 / (exp(w/T) - 1).

    Negative frequencies are allowed and satisfy n(-w) = -(1 + n(w)).

    Raises:
        ZeroFrequencyError: If any frequency is exactly zero.
    """
    if not temperature > 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    w = np.asarray(omega, dtype=float)
    if np.any(w == 0.0):
        raise ZeroFrequencyError("Bose occupation is singular at omega = 0; use the series limit")
    with np.errstate(over="ignore"):
        value = 1.0 / np.expm1(w / temperature)
    return float(value) if value.ndim == 0 else value


def trigamma(z: ArrayLike) -> np.ndarray:
    """Trigamma function psi_1(z) for complex z with positive real part.

    Shifts every argument by the same integer count until Re z >= 10 and then
    sums the asymptotic Bernoulli series.
    """
    z = np.asarray(z, dtype=complex)
    if z.size and np.min(z.real) <= 0.0:
        raise ValueError(f"trigamma needs Re z > 0, got min Re z = {np.min(z.real)}")
    shift = 0 if not z.size else max(0, int(math.ceil(_TRIGAMMA_SHIFT - float(np.min(z.real)))))
    total = np.zeros_like(z)
    w = z.copy()
    for _ in range(shift):
        total += 1.0 / (w * w)
        w = w + 1.0
    inv = 1.0 / w
    inv2 = inv * inv
    series = np.zeros_like(w)
    for coefficient in reversed(_TRIGAMMA_SERIES):
        series = series * inv2 + coefficient
    return total + inv + 0.5 * inv2 + inv * inv2 * series


def phase_closed_form(spec: BathSpec, tau: ArrayLike) -> np.ndarray:
    """Phase function Q(tau) from its trigamma closed form.

    With x = T/w_c and u = w_c tau,
    Q = alpha[(u^2 - 1)/(1 + u^2)^2 + 2 x^2 Re psi_1(x(1 + iu))] - i alpha 2u/(1 + u^2)^2.
    """
    tau = np.asarray(tau, dtype=float)
    if spec.alpha == 0.0:
        return np.zeros(tau.shape, dtype=complex)
    x = spec.temperature / spec.omega_c
    u = spec.omega_c * tau
    denom = (1.0 + u * u) ** 2
    real = (u * u - 1.0) / denom + 2.0 * x * x * trigamma(x * (1.0 + 1j * u)).real
    imag = -2.0 * u / denom
    return spec.alpha * (real + 1j * imag)


def renorm_factor_closed_form(spec: BathSpec) -> float:
    """eta = exp{(alpha/2)[1 - 2 x^2 psi_1(x)]} with x = T/w_c."""
    if spec.alpha == 0.0:
        return 1.0
    x = spec.temperature / spec.omega_c
    return math.exp(0.5 * spec.alpha * (1.0 - 2.0 * x * x * float(special.polygamma(1, x))))


def _x_coth_x(y: float) -> float:
    return 1.0 if abs(y) < 1e-8 else y / math.tanh(y)


def _omega_max(spec: BathSpec, quadrature: QuadratureConfig) -> float:
    return spec.omega_c * max(quadrature.omega_max_factor, 10.0 * spec.omega_c / spec.temperature)


def adaptive_quad(
    func: Callable[[float], float], lower: float, upper: float, quadrature: QuadratureConfig, what: str, **kwargs
) -> float:
    """scipy quad on [lower, upper] that raises QuadratureFailure instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, error = integrate.quad(
                func,
                lower,
                upper,
                limit=quadrature.quad_limit,
                epsabs=quadrature.abs_floor,
                epsrel=quadrature.rel_tol,
                **kwargs,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"{what} did not converge: {exc}") from exc
    logger.debug("%s = %.12g (error estimate %.2e)", what, value, error)
    return value


def _coth_weight(spec: BathSpec) -> Callable[[float], float]:
    # J/(pi w^2) coth(w/2T), regular at w = 0
    scale = 2.0 * spec.temperature * spec.alpha / spec.omega_c ** 2

    def integrand(w: float) -> float:
        return scale * math.exp(-w / spec.omega_c) * _x_coth_x(0.5 * w / spec.temperature)

    return integrand


def renorm_factor(spec: BathSpec, quadrature: QuadratureConfig = None) -> float:
    """Renormalization factor eta = exp[-(1/2) int J/(pi w^2) coth(w/2T) dw].

    Args:
        spec: The bath.
        quadrature: Tolerances, defaults to QuadratureConfig().

    Returns:
        eta in (0, 1]; exactly 1 when alpha = 0.

    Raises:
        QuadratureFailure: If the adaptive quadrature does not converge.
    """
    if spec.alpha == 0.0:
        return 1.0
    quadrature = quadrature or QuadratureConfig()
    exponent = adaptive_quad(_coth_weight(spec), 0.0, _omega_max(spec, quadrature), quadrature, "renormalization integral")
    return math.exp(-0.5 * exponent)


def phase_function(spec: BathSpec, tau: float, quadrature: QuadratureConfig = None) -> complex:
    """Phase Q(tau) = int J/(pi w^2)[coth(w/2T) cos(w tau) - i sin(w tau)] dw by quadrature.

    Raises:
        QuadratureFailure: If either part fails to converge.
    """
    if spec.alpha == 0.0:
        return 0.0 + 0.0j
    quadrature = quadrature or QuadratureConfig()
    upper = _omega_max(spec, quadrature)
    tau = float(tau)
    if tau == 0.0:
        return complex(adaptive_quad(_coth_weight(spec), 0.0, upper, quadrature, "phase Q(0)"), 0.0)

    real = adaptive_quad(_coth_weight(spec), 0.0, upper, quadrature, f"Re Q({tau})", weight="cos", wvar=tau)
    scale = spec.alpha / spec.omega_c ** 2
    imag = -adaptive_quad(
        lambda w: scale * w * math.exp(-w / spec.omega_c),
        0.0,
        upper,
        quadrature,
        f"Im Q({tau})",
        weight="sin",
        wvar=tau,
    )
    return complex(real, imag)


def composite_phase(specs: Sequence[BathSpec], tau: float, quadrature: QuadratureConfig = None) -> complex:
    """Sum of the phases of baths that couple to the same qubit operator."""
    return sum((phase_function(spec, tau, quadrature) for spec in specs), 0.0 + 0.0j)


def composite_renorm_factor(specs: Sequence[BathSpec], quadrature: QuadratureConfig = None) -> float:
    """Joint eta of baths on the same qubit, the product of the single-bath factors."""
    return math.prod(renorm_factor(spec, quadrature) for spec in specs)


def phase_spectrum(spec: BathSpec, nu: ArrayLike) -> Union[float, np.ndarray]:
    """Fourier transform of the phase, Q(nu) = 2 J(nu)/nu^2 (1 + n(nu)).

    J is continued as an odd function to negative nu. The nu -> 0 limit is
    2 pi alpha T / w_c^2.
    """
    shape = np.shape(nu)
    flat = np.atleast_1d(np.asarray(nu, dtype=float)).ravel()
    limit = 2.0 * np.pi * spec.alpha * spec.temperature / spec.omega_c ** 2
    out = np.full(flat.shape, limit)
    nonzero = flat != 0.0
    w = flat[nonzero]
    a = np.abs(w)
    with np.errstate(over="ignore"):
        # 2 J(|nu|)/nu^2 times (1 + n(nu)) for nu > 0 and n(|nu|) for nu < 0
        occupation = np.where(w > 0.0, -1.0 / np.expm1(-a / spec.temperature), 1.0 / np.expm1(a / spec.temperature))
    out[nonzero] = 2.0 * np.pi * spec.alpha * a * np.exp(-a / spec.omega_c) / spec.omega_c ** 2 * occupation
    return float(out[0]) if shape == () else out.reshape(shape)


@dataclass(frozen=True)
class BathKernel:
    """Time-domain kernels of one bath, or of the baths sharing one qubit.

    Hashable, so it can key the rate cache. Kernel grids evaluate Q through
    ``quadrature.phase_method``; eta is taken from the same evaluation at
    tau = 0, which makes eta^2 exp(Q(0)) = 1 hold to rounding.
    """

    specs: Tuple[BathSpec, ...]
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if not 1 <= len(self.specs) <= 2:
            raise ValueError(f"specs must hold one or two baths, got {len(self.specs)}")

    @classmethod
    def single(cls, spec: BathSpec, quadrature: QuadratureConfig = None) -> "BathKernel":
        return cls((spec,), quadrature or QuadratureConfig())

    @classmethod
    def composite(cls, hot: BathSpec, cold: BathSpec, quadrature: QuadratureConfig = None) -> "BathKernel":
        return cls((hot, cold), quadrature or QuadratureConfig())

    @property
    def is_composite(self) -> bool:
        return len(self.specs) == 2

    @property
    def alpha_total(self) -> float:
        return sum(spec.alpha for spec in self.specs)

    @property
    def omega_c(self) -> float:
        return max(spec.omega_c for spec in self.specs)

    @property
    def min_temperature(self) -> float:
        return min(spec.temperature for spec in self.specs)

    @property
    def beta(self) -> float:
        """Longest thermal time among the baths."""
        return 1.0 / self.min_temperature

    def phase(self, tau: ArrayLike, shifts: Optional[Sequence[float]] = None) -> np.ndarray:
        """Q(tau) summed over the baths, vectorised.

        Args:
            tau: Times.
            shifts: Per-bath counting shifts; bath k is evaluated at tau - shifts[k].
        """
        tau = np.asarray(tau, dtype=float)
        shifts = self.shift_tuple(shifts)
        total = np.zeros(tau.shape, dtype=complex)
        for spec, shift in zip(self.specs, shifts):
            if self.quadrature.phase_method == "closed_form":
                total = total + phase_closed_form(spec, tau - shift)
            else:
                values = [phase_function(spec, t, self.quadrature) for t in (tau - shift).ravel()]
                total = total + np.array(values, dtype=complex).reshape(tau.shape)
        return total

    def shift_tuple(self, shifts: Optional[Sequence[float]]) -> Tuple[float, ...]:
        if shifts is None:
            return (0.0,) * len(self.specs)
        if len(shifts) != len(self.specs):
            raise ValueError(f"shifts must have {len(self.specs)} entries, got {len(shifts)}")
        return tuple(float(s) for s in shifts)

    @cached_property
    def q0(self) -> float:
        """Q(0), equal to -2 ln eta."""
        return float(self.phase(np.zeros(1))[0].real)

    @property
    def eta_sq_log(self) -> float:
        return -self.q0

    @cached_property
    def eta(self) -> float:
        return math.exp(-0.5 * self.q0)


def _axis(axis: Union[Axis, str]) -> Axis:
    return axis if isinstance(axis, Axis) else Axis(axis)


def correlation_xy(
    kernel: BathKernel,
    delta: float,
    axis: Union[Axis, str],
    tau: ArrayLike,
    shifts: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Polaron correlation kernels.

    C_x = (eta Delta/2)^2 [cosh Q - 1] and C_y = (eta Delta/2)^2 sinh Q. A
    counting field enters either through tau itself or, bath by bath, through
    ``shifts``.
    """
    axis = _axis(axis)
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    q = kernel.phase(tau, shifts)
    prefactor = (kernel.eta * delta / 2.0) ** 2
    if axis is Axis.X:
        # 2 sinh^2(Q/2) keeps precision where cosh Q - 1 cancels
        return prefactor * 2.0 * np.sinh(q / 2.0) ** 2
    return prefactor * np.sinh(q)


def niba_kernel(
    kernel: BathKernel,
    delta: float,
    tau: ArrayLike,
    subtract_coherent: bool = False,
    shifts: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """NIBA transition kernel D(tau) = (Delta/2)^2 eta^2 exp(Q(tau)).

    With ``subtract_coherent`` the constant long-time value (Delta/2)^2 eta^2
    is removed, leaving C_x + C_y, the part that decays and yields rates.
    """
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    q = kernel.phase(tau, shifts)
    prefactor = (delta / 2.0) ** 2
    if subtract_coherent:
        return prefactor * kernel.eta ** 2 * np.expm1(q)
    return prefactor * np.exp(q - kernel.q0)
