"""
Transition rates for qheat.

Half-Fourier rates Gamma_{a,+/-}(chi, w) of the polaron kernels for NE-PTRE,
full-Fourier NIBA rates kappa^{ij}, and the weak-coupling bath spectra used
by the Redfield scheme. Quadratures are memoized in a RateEngine that is safe
to share between sweep workers.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
import logging
import math
import threading
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from src.baths import (
    Axis,
    BathKernel,
    BathSpec,
    adaptive_quad,
    bose_occupation,
    correlation_xy,
    niba_kernel,
    phase_spectrum,
    spectral_density,
)
from src.config import QuadratureConfig
from src.errors import QuadratureFailure, ZeroGapError
from src.model import L, R, LocalBasisEnergies, SystemSpec, local_basis_energies, side_of
from src.quadrature import PanelGrid, reference_frequency

logger = logging.getLogger("QHeat.RateEngine")

# Single-flip transitions (i -> j) driven by each side's bath
SIDE_TRANSITIONS = {
    L: ((1, 3), (3, 1), (2, 4), (4, 2)),
    R: ((1, 2), (2, 1), (3, 4), (4, 3)),
}

ABSORB = "absorb"
EMIT = "emit"

# Least recently used entries beyond these are dropped
DEFAULT_MAX_ENTRIES = 20_000
DEFAULT_MAX_GRIDS = 64

# Least recently used entries beyond these are dropped
DEFAULT_MAX_ENTRIES = 20_000
DEFAULT_MAX_GRIDS = 64


@dataclass(frozen=True)
class RateRequest:
    """One half-Fourier rate.

    Attributes:
        kernel: Bath kernel of the coupled side.
        delta: Tunneling strength of the coupled qubit.
        axis: Polaron channel.
        sign: +1 for Gamma_+ (kernel at +tau), -1 for Gamma_- (kernel at -tau).
        omega: Bohr frequency.
        chi: Counting-field shift of the kernel argument, 0 when uncounted.
    """

    kernel: BathKernel
    delta: float
    axis: Axis
    sign: int
    omega: float
    chi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")


class RateEngine:
    """Memoizing evaluator of rate quadratures.

    Results are keyed by the exact request bits and kept in a least recently
    used cache of ``max_entries`` rate arrays and ``max_grids`` panel grids.
    Concurrent callers may compute the same entry twice but always store
    identical values.
    """

    def __init__(self, max_entries: int = DEFAULT_MAX_ENTRIES, max_grids: int = DEFAULT_MAX_GRIDS):
        if max_entries < 1:
            raise ValueError(f"max_entries must be at least 1, got {max_entries}")
        if max_grids < 1:
            raise ValueError(f"max_grids must be at least 1, got {max_grids}")
        self.max_entries = max_entries
        self.max_grids = max_grids
        self._cache: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
        self._grids: "OrderedDict[tuple, PanelGrid]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def stats(self) -> Dict[str, int]:
        """Cache statistics."""
        with self._lock:
            return {
                "entries": len(self._cache),
                "hits": self.hits,
                "misses": self.misses,
                "evictions": self.evictions,
            }

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()
            self._grids.clear()
            self.hits = 0
            self.misses = 0
            self.evictions = 0

    def _lookup(self, key: tuple) -> Optional[np.ndarray]:
        with self._lock:
            value = self._cache.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
                self._cache.move_to_end(key)
            return value

    def _store(self, key: tuple, value: np.ndarray) -> np.ndarray:
        value.setflags(write=False)
        with self._lock:
            stored = self._cache.setdefault(key, value)
            self._cache.move_to_end(key)
            while len(self._cache) > self.max_entries:
                self._cache.popitem(last=False)
                self.evictions += 1
            return stored

    def grid(self, kernel: BathKernel, omega_ref: float) -> PanelGrid:
        key = (kernel, omega_ref)
        with self._lock:
            grid = self._grids.get(key)
            if grid is not None:
                self._grids.move_to_end(key)
        if grid is None:
            grid = PanelGrid.for_kernel(kernel, omega_ref)
            with self._lock:
                grid = self._grids.setdefault(key, grid)
                self._grids.move_to_end(key)
                while len(self._grids) > self.max_grids:
                    self._grids.popitem(last=False)
        return grid

    def gamma(
        self,
        kernel: BathKernel,
        delta: float,
        axis: Union[Axis, str],
        sign: int,
        omegas: Sequence[float],
        shifts: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """Gamma_{a,sign}(w) = int_0^inf C_a(sign tau - shift) exp(i w tau) d tau for each w."""
        axis = Axis(axis)
        omegas = tuple(float(w) for w in omegas)
        shifts = kernel.shift_tuple(shifts)
        key = ("gamma", kernel, float(delta), axis.value, int(sign), omegas, shifts)
        cached = self._lookup(key)
        if cached is not None:
            return cached
        if delta == 0.0 or not omegas:
            values = np.zeros(len(omegas), dtype=complex)
        else:
            grid = self.grid(kernel, reference_frequency(omegas))
            values = grid.half_fourier(lambda t: correlation_xy(kernel, delta, axis, sign * t, shifts), omegas)
            logger.debug("Gamma_%s%s for %d frequencies, shifts %s", axis.value, "+" if sign > 0 else "-", len(omegas), shifts)
        return self._store(key, values)

    def niba_transform(
        self,
        kernel: BathKernel,
        delta: float,
        energies: Sequence[float],
        shifts: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """Full Fourier transform of the subtracted NIBA kernel at each energy.

        int D_sub(tau - s) exp(iE tau) d tau over the whole real line, split as
        int_0^inf [D_sub(tau - s) e^{iE tau} + D_sub(-tau - s) e^{-iE tau}].
        """
        energies = tuple(float(e) for e in energies)
        shifts = kernel.shift_tuple(shifts)
        key = ("niba", kernel, float(delta), energies, shifts)
        cached = self._lookup(key)
        if cached is not None:
            return cached
        if delta == 0.0 or not energies:
            values = np.zeros(len(energies), dtype=complex)
        else:
            grid = self.grid(kernel, reference_frequency(energies))
            forward = grid.half_fourier(lambda t: niba_kernel(kernel, delta, t, True, shifts), energies)
            backward = grid.half_fourier(lambda t: niba_kernel(kernel, delta, -t, True, shifts), [-e for e in energies])
            values = forward + backward
        return self._store(key, values)


_default_engine = RateEngine()


def default_engine() -> RateEngine:
    """Process-wide engine used when callers do not pass their own."""
    return _default_engine


def gamma_half_fourier(req: RateRequest, engine: Optional[RateEngine] = None) -> complex:
    """Gamma^v_{a,+/-}(chi, w) for a single request.

    The counting field shifts every bath of the kernel alike; use
    RateEngine.gamma with explicit shifts for one bath of a composite kernel.
    """
    engine = engine or default_engine()
    shifts = (req.chi,) * len(req.kernel.specs)
    return complex(engine.gamma(req.kernel, req.delta, req.axis, req.sign, [req.omega], shifts)[0])


def gamma_x_lowest_order(
    kernel: BathKernel,
    delta: float,
    omega: float,
    sign: int,
    quadrature: Optional[QuadratureConfig] = None,
) -> float:
    """Two-phonon limit of Re Gamma_{x,sign}(w).

    Re Gamma_x = (eta Delta/2)^2 / (8 pi) int Q(nu) Q(sign w - nu) d nu with
    Q(nu) the Fourier-transformed phase. Valid only for weak coupling.
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if delta == 0.0 or kernel.alpha_total == 0.0:
        return 0.0
    if kernel.alpha_total > 0.1:
        logger.warning("gamma_x_lowest_order used at alpha = %.3g > 0.1; two-phonon truncation is unreliable", kernel.alpha_total)
    quadrature = quadrature or kernel.quadrature
    target = sign * omega

    def spectrum(nu: float) -> float:
        return sum(phase_spectrum(spec, nu) for spec in kernel.specs)

    reach = quadrature.omega_max_factor * kernel.omega_c
    lower, upper = min(0.0, target) - reach, max(0.0, target) + reach
    points = sorted({0.0, target})
    convolution = adaptive_quad(
        lambda nu: spectrum(nu) * spectrum(target - nu),
        lower,
        upper,
        quadrature,
        f"two-phonon convolution at w={target}",
        points=points,
    )
    return (kernel.eta * delta / 2.0) ** 2 / (8.0 * math.pi) * convolution


def _clamp(value: float, floor: float, what: str) -> float:
    if value >= 0.0:
        return value
    if value >= floor:
        logger.warning("Clamped negative %s = %.3e to 0", what, value)
        return 0.0
    raise QuadratureFailure(f"{what} is negative beyond quadrature noise: {value:.3e}")


def niba_rate(
    kernel: BathKernel,
    delta: float,
    e_ij: float,
    chi: float = 0.0,
    engine: Optional[RateEngine] = None,
) -> complex:
    """kappa^{ij}(chi) = exp(i E_ij chi) kappa^{ij}.

    The uncounted rate is 2 Re int_0^inf D_sub(tau) exp(i E_ij tau) d tau;
    the counted one is its phase dressing, never re-integrated.
    """
    engine = engine or default_engine()
    transform = engine.niba_transform(kernel, delta, [e_ij])[0]
    kappa = _clamp(float(transform.real), kernel.quadrature.negative_rate_floor, f"kappa(E={e_ij})")
    return complex(np.exp(1j * e_ij * chi) * kappa)


@dataclass
class NibaRateTable:
    """Uncounted NIBA rates kappa[(i, j, side)] with their energies and kernels."""

    kappa: Dict[Tuple[int, int, str], float]
    energies: LocalBasisEnergies
    kernels: Dict[str, BathKernel]
    deltas: Dict[str, float]
    temperatures: Dict[str, Optional[float]] = field(default_factory=dict)

    def rate(self, i: int, j: int, side: str) -> float:
        return self.kappa[(i, j, side)]

    def side_rates(self, side: str) -> Dict[Tuple[int, int], float]:
        return {(i, j): self.kappa[(i, j, side)] for i, j in SIDE_TRANSITIONS[side]}

    def counted_rates(
        self,
        terminal: str,
        chi: float,
        engine: Optional[RateEngine] = None,
    ) -> Dict[Tuple[int, int], complex]:
        """Gain rates of the counted side at counting field ``chi``.

        A bath that is alone on its qubit dresses every rate by exp(i E_ij chi);
        one bath of a composite side is counted by re-integrating the kernel
        with only that bath shifted.
        """
        side = side_of(terminal)
        kernel = self.kernels[side]
        if terminal == side or not kernel.is_composite:
            return {
                (i, j): complex(np.exp(1j * self.energies.gap(i, j) * chi) * self.kappa[(i, j, side)])
                for i, j in SIDE_TRANSITIONS[side]
            }
        engine = engine or default_engine()
        position = 0 if terminal.endswith("_h") else 1
        shifts = tuple(chi if k == position else 0.0 for k in range(len(kernel.specs)))
        pairs = SIDE_TRANSITIONS[side]
        values = engine.niba_transform(kernel, self.deltas[side], [self.energies.gap(i, j) for i, j in pairs], shifts)
        return {pair: complex(v) for pair, v in zip(pairs, values)}


def side_kernels(spec: SystemSpec, quadrature: Optional[QuadratureConfig] = None) -> Dict[str, BathKernel]:
    """Polaron kernel of each qubit side, composite on the left of a three-terminal device."""
    quadrature = quadrature or QuadratureConfig()
    kernels = {}
    for side in (L, R):
        baths = spec.baths_on(side)
        kernels[side] = BathKernel(tuple(baths), quadrature)
    return kernels


def build_niba_rate_table(
    spec: SystemSpec,
    quadrature: Optional[QuadratureConfig] = None,
    engine: Optional[RateEngine] = None,
) -> NibaRateTable:
    """All single-flip NIBA rates of a device."""
    engine = engine or default_engine()
    kernels = side_kernels(spec, quadrature)
    energies = local_basis_energies(spec.u, spec.left.epsilon, spec.right.epsilon)
    kappa: Dict[Tuple[int, int, str], float] = {}
    for side, pairs in SIDE_TRANSITIONS.items():
        delta = spec.qubit(side).delta
        gaps = [energies.gap(i, j) for i, j in pairs]
        transform = engine.niba_transform(kernels[side], delta, gaps)
        for (i, j), value in zip(pairs, transform):
            kappa[(i, j, side)] = _clamp(float(value.real), kernels[side].quadrature.negative_rate_floor, f"kappa^{i}{j}_{side}")
    temperatures = {side: (kernels[side].specs[0].temperature if not kernels[side].is_composite else None) for side in (L, R)}
    return NibaRateTable(
        kappa=kappa,
        energies=energies,
        kernels=kernels,
        deltas={side: spec.qubit(side).delta for side in (L, R)},
        temperatures=temperatures,
    )


def redfield_sequential_rate(bath: BathSpec, delta: float, e_gap: float, direction: str) -> float:
    """Weak-coupling transition rate J(E) n(E)/2 (absorb) or J(E)(1 + n(E))/2 (emit).

    ``delta`` enters the scheme only through the sigma_z matrix elements,
    which the solver applies; it is validated here and otherwise unused.

    Raises:
        ZeroGapError: If ``e_gap`` is zero.
    """
    if delta < 0.0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if e_gap == 0.0:
        raise ZeroGapError("sequential rates need a nonzero energy gap")
    energy = abs(e_gap)
    occupation = bose_occupation(bath.temperature, energy)
    if direction == ABSORB:
        return 0.5 * spectral_density(bath, energy) * occupation
    if direction == EMIT:
        return 0.5 * spectral_density(bath, energy) * (1.0 + occupation)
    raise ValueError(f"direction must be '{ABSORB}' or '{EMIT}', got {direction!r}")


def redfield_spectrum(bath: BathSpec, omega: Union[float, Iterable[float]]) -> np.ndarray:
    """S(w) = J(w)(1 + n(w))/2 with J odd in w; S(0) = 0.

    Emission at positive w, absorption at negative w.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.zeros(w.shape)
    nonzero = w != 0.0
    wn = w[nonzero]
    a = np.abs(wn)
    j_odd = np.sign(wn) * spectral_density(bath, a)
    with np.errstate(over="ignore"):
        one_plus_n = -1.0 / np.expm1(-wn / bath.temperature)
    out[nonzero] = 0.5 * j_odd * one_plus_n
    return out


def redfield_gamma(bath: BathSpec, sign: int, omegas: Sequence[float], chi: float = 0.0) -> np.ndarray:
    """Redfield rates without Lamb shift: Gamma_+ = S(w) e^{i w chi}/2, Gamma_- = S(-w) e^{-i w chi}/2."""
    w = np.asarray(omegas, dtype=float)
    if sign == 1:
        return 0.5 * redfield_spectrum(bath, w) * np.exp(1j * w * chi)
    if sign == -1:
        return 0.5 * redfield_spectrum(bath, -w) * np.exp(-1j * w * chi)
    raise ValueError(f"sign must be +1 or -1, got {sign}")


def check_kms(table: NibaRateTable, side: str) -> float:
    """Largest relative deviation of kappa^{ij}/kappa^{ji} from exp(E_ij/T) on one side."""
    temperature = table.temperatures.get(side)
    if temperature is None:
        raise ValueError(f"side {side} has no single temperature")
    worst = 0.0
    for i, j in SIDE_TRANSITIONS[side]:
        forward, backward = table.kappa[(i, j, side)], table.kappa[(j, i, side)]
        expected = math.exp(table.energies.gap(i, j) / temperature)
        worst = max(worst, abs(forward - expected * backward) / max(abs(forward), 1e-300))
    return worst

