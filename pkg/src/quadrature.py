"""
Panel integration of half-Fourier transforms of bath kernels.

Semi-infinite integrals int_0^inf C(tau) exp(i w tau) d tau are evaluated
with composite Gauss-Legendre panels that start short (resolving the fast
initial decay of the polaron kernels), grow geometrically and are capped at a
quarter of the shortest oscillation period of interest. Beyond the horizon
the kernel is continued as C(tau_h) (tau_h / tau)^2, whose transform is
available through the sine and cosine integrals.
"""

from dataclasses import dataclass
from functools import lru_cache
import logging
import math
from typing import Callable, Sequence

import numpy as np
from scipy import special

from src.baths import BathKernel
from src.config import QuadratureConfig
from src.errors import NonDecayingKernelError

logger = logging.getLogger("QHeat.Quadrature")

KernelFunction = Callable[[np.ndarray], np.ndarray]

_CHUNK = 8192

# tau^2 |C| may not grow by more than this between tau_h/2 and tau_h
_GROWTH_LIMIT = 2.5
_NEGLIGIBLE = 1e-13


@lru_cache(maxsize=8)
def _legendre(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def reference_frequency(omegas: Sequence[float]) -> float:
    """Bucket the largest |w| to a power of two >= 1 so nearby requests share a grid."""
    top = max([1.0] + [abs(float(w)) for w in omegas])
    return float(2.0 ** math.ceil(math.log2(top)))


def tail_transform(omegas: np.ndarray, start: float) -> np.ndarray:
    """int_a^inf exp(i w tau) / tau^2 d tau for each w, with a = ``start``."""
    omegas = np.asarray(omegas, dtype=float)
    a = float(start)
    w = np.abs(omegas)
    out = np.full(omegas.shape, 1.0 / a, dtype=complex)
    moving = w > 0.0
    if np.any(moving):
        wm = w[moving]
        si, ci = special.sici(wm * a)
        real = np.cos(wm * a) / a - wm * (0.5 * np.pi - si)
        imag = np.sin(wm * a) / a - wm * ci
        out[moving] = real + 1j * np.sign(omegas[moving]) * imag
    return out


@dataclass(frozen=True)
class PanelGrid:
    """Composite Gauss-Legendre rule on [0, horizon]."""

    breakpoints: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def panel_count(self) -> int:
        return len(self.breakpoints) - 1

    @classmethod
    def from_breakpoints(cls, breakpoints: Sequence[float], order: int) -> "PanelGrid":
        """Gauss-Legendre nodes of the given order on every panel."""
        breakpoints = np.asarray(breakpoints, dtype=float)
        x, w = _legendre(order)
        left = breakpoints[:-1, np.newaxis]
        half = 0.5 * np.diff(breakpoints)[:, np.newaxis]
        nodes = (left + half * (x + 1.0)).ravel()
        weights = (half * w).ravel()
        return cls(breakpoints=breakpoints, nodes=nodes, weights=weights)

    @classmethod
    def for_kernel(cls, kernel: BathKernel, omega_ref: float, quadrature: QuadratureConfig = None) -> "PanelGrid":
        """Grid matched to the kernel's decay and to frequencies up to ``omega_ref``."""
        quadrature = quadrature or kernel.quadrature
        scale = quadrature.panel_scale
        h_min = scale / (4.0 * kernel.omega_c * (1.0 + 2.0 * kernel.alpha_total))
        h_max = scale * math.pi / (2.0 * max(omega_ref, kernel.min_temperature))
        horizon = quadrature.horizon_factor * max(kernel.beta, 1.0 / kernel.omega_c)

        points = [0.0]
        h = min(h_min, h_max)
        while points[-1] + h < horizon:
            points.append(points[-1] + h)
            h = min(h * quadrature.panel_growth, h_max)
        points.append(horizon)
        grid = cls.from_breakpoints(points, quadrature.gauss_order)
        logger.debug(
            "Panel grid: %d panels, %d nodes, horizon %.4g, h_min %.3g, h_max %.3g",
            grid.panel_count,
            grid.nodes.size,
            horizon,
            h_min,
            h_max,
        )
        return grid

    def half_fourier(self, func: KernelFunction, omegas: Sequence[float]) -> np.ndarray:
        """int_0^inf func(tau) exp(i w tau) d tau for every w in ``omegas``.

        Raises:
            NonDecayingKernelError: If tau^2 |func| still grows at the horizon.
        """
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        tau_h = self.horizon
        checkpoints = np.array([0.0, 0.5 * tau_h, tau_h])
        values = np.asarray(func(np.concatenate([self.nodes, checkpoints])), dtype=complex)
        at_zero, at_half, at_horizon = values[-3:]
        values = values[:-3]
        self._check_decay(at_zero, at_half, at_horizon)

        weighted = values * self.weights
        total = np.zeros(omegas.shape, dtype=complex)
        for start in range(0, self.nodes.size, _CHUNK):
            phase = np.exp(1j * np.outer(self.nodes[start:start + _CHUNK], omegas))
            total += weighted[start:start + _CHUNK] @ phase
        return total + at_horizon * tau_h ** 2 * tail_transform(omegas, tau_h)

    def _check_decay(self, at_zero: complex, at_half: complex, at_horizon: complex) -> None:
        tau_h = self.horizon
        if abs(at_horizon) <= _NEGLIGIBLE * abs(at_zero):
            return
        late = tau_h ** 2 * abs(at_horizon)
        early = 0.25 * tau_h ** 2 * abs(at_half)
        if late > _GROWTH_LIMIT * early:
            raise NonDecayingKernelError(
                f"kernel does not decay within horizon {tau_h:.4g}: "
                f"tau^2|C| grew from {early:.3e} to {late:.3e}"
            )
