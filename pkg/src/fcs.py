"""
Steady states and full counting statistics for qheat.

The cumulant generating function is the eigenvalue of the tilted generator
L(chi) that connects to the zero mode at chi = 0; current and noise are its
first two derivatives in i chi, taken by central differences with one
Richardson step.
"""

from dataclasses import dataclass
import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate, linalg

from src.errors import BranchCrossingError, DegenerateSteadyStateError, StepSizeUnderflowError
from src.generators import TiltedGenerator, unvec, vec

logger = logging.getLogger("QHeat.FCS")

DEFAULT_CHI_STEP = 1e-4
DEFAULT_NOISE_STEP = 1e-3
_MIN_OVERLAP = 0.5


@dataclass(frozen=True)
class SteadyState:
    """Null vector of a generator, normalized to unit trace.

    ``rho`` is a 4 x 4 Hermitian matrix for density generators and a vector of
    four populations for population generators.
    """

    rho: np.ndarray
    residual: float

    @property
    def is_population(self) -> bool:
        return self.rho.ndim == 1

    @property
    def populations(self) -> np.ndarray:
        if self.is_population:
            return self.rho.real
        return np.diag(self.rho).real

    @property
    def vector(self) -> np.ndarray:
        return self.rho if self.is_population else vec(self.rho)

    @property
    def trace(self) -> float:
        return float(np.sum(self.populations))

    def coherence_norm(self) -> float:
        """Largest off-diagonal magnitude; zero for populations."""
        if self.is_population:
            return 0.0
        off = self.rho - np.diag(np.diag(self.rho))
        return float(np.max(np.abs(off)))


@dataclass(frozen=True)
class CumulantResult:
    """Current cumulants of the counted terminal.

    Attributes:
        current: First cumulant, energy per time into the counted bath.
        noise: Second cumulant, when requested.
        chi_step: Counting-field step of the first-cumulant stencil.
        method: Finite-difference scheme used.
    """

    current: float
    noise: Optional[float]
    chi_step: float
    method: str


@dataclass(frozen=True)
class Trajectory:
    """States on a time grid; density matrices or population vectors."""

    times: np.ndarray
    states: np.ndarray

    def traces(self) -> np.ndarray:
        if self.states.ndim == 2:
            return self.states.sum(axis=1).real
        return np.trace(self.states, axis1=1, axis2=2).real


def _matrix(gen: Union[TiltedGenerator, np.ndarray], chi: float = 0.0) -> np.ndarray:
    return gen(chi) if isinstance(gen, TiltedGenerator) else np.asarray(gen)


def _trace_vector(dim: int) -> np.ndarray:
    return np.ones(4) if dim == 4 else vec(np.eye(4))


def steady_state(gen: Union[TiltedGenerator, np.ndarray], zero_tol: float = 1e-9) -> SteadyState:
    """Steady state of the uncounted generator.

    Solves L x = 0 with one equation replaced by the trace condition.

    Raises:
        DegenerateSteadyStateError: If more than one eigenvalue lies within ``zero_tol`` of zero.
    """
    matrix = _matrix(gen, 0.0)
    dim = matrix.shape[0]
    eigenvalues = linalg.eigvals(matrix)
    zero_modes = int(np.sum(np.abs(eigenvalues) < zero_tol))
    if zero_modes > 1:
        raise DegenerateSteadyStateError(f"generator has {zero_modes} eigenvalues within {zero_tol} of zero")

    bordered = np.array(matrix, dtype=complex)
    bordered[0, :] = _trace_vector(dim)
    rhs = np.zeros(dim, dtype=complex)
    rhs[0] = 1.0
    solution = linalg.solve(bordered, rhs)
    residual = float(np.max(np.abs(matrix @ solution)))

    if dim == 4:
        rho = solution.real.copy()
    else:
        rho = unvec(solution)
        rho = 0.5 * (rho + rho.conj().T)
    logger.debug("Steady state residual %.3e", residual)
    return SteadyState(rho=rho, residual=residual)


def cgf(
    gen: Union[TiltedGenerator, np.ndarray],
    chi: float,
    track: bool = True,
    reference: Optional[np.ndarray] = None,
    zero_tol: float = 1e-9,
) -> complex:
    """Cumulant generating function G(chi).

    Picks the eigenvalue with the largest real part and, when ``track`` is set,
    checks that its eigenvector still overlaps the chi = 0 null vector.

    Raises:
        BranchCrossingError: If another eigenvector follows the zero mode more closely.
    """
    matrix = _matrix(gen, chi)
    eigenvalues, vectors = linalg.eig(matrix)
    leading = int(np.argmax(eigenvalues.real))
    if not track:
        return complex(eigenvalues[leading])

    if reference is None:
        reference = steady_state(gen if isinstance(gen, TiltedGenerator) else _matrix(gen, 0.0), zero_tol).vector
    reference = reference / np.linalg.norm(reference)
    overlaps = np.abs(reference.conj() @ vectors) / np.linalg.norm(vectors, axis=0)
    best = int(np.argmax(overlaps))
    if overlaps[leading] < _MIN_OVERLAP and best != leading:
        raise BranchCrossingError(
            f"leading eigenvalue at chi={chi} overlaps the zero mode by {overlaps[leading]:.3f}, "
            f"another branch by {overlaps[best]:.3f}"
        )
    return complex(eigenvalues[leading])


def cumulant(
    gen: Callable[[float], np.ndarray],
    order: int = 1,
    chi_step: float = DEFAULT_CHI_STEP,
    noise_step: float = DEFAULT_NOISE_STEP,
    steady: Optional[SteadyState] = None,
    zero_tol: float = 1e-9,
) -> CumulantResult:
    """First (and for ``order=2`` also second) current cumulant.

    I = dG/d(i chi) from -i[G(h) - G(-h)]/(2h); noise = d^2G/d(i chi)^2 from
    -[G(h) - 2G(0) + G(-h)]/h^2. Each is Richardson-extrapolated once
    from steps h and 2h.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if steady is None:
        steady = steady_state(gen(0.0), zero_tol)
    reference = steady.vector

    def g(chi: float) -> complex:
        if chi == 0.0:
            return cgf(gen(0.0), 0.0, track=False)
        return cgf(gen(chi), chi, True, reference, zero_tol)

    def first(h: float) -> float:
        return float((-1j * (g(h) - g(-h)) / (2.0 * h)).real)

    current = (4.0 * first(chi_step) - first(2.0 * chi_step)) / 3.0
    noise = None
    method = "central difference, Richardson"
    if order == 2:
        g0 = g(0.0)

        def second(h: float) -> float:
            return float((-(g(h) - 2.0 * g0 + g(-h)) / h ** 2).real)

        noise = (4.0 * second(noise_step) - second(2.0 * noise_step)) / 3.0
    return CumulantResult(current=current, noise=noise, chi_step=chi_step, method=method)


def propagate_dynamics(
    gen: Union[TiltedGenerator, np.ndarray],
    rho0: np.ndarray,
    t_grid: Sequence[float],
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> Trajectory:
    """Integrate d rho/dt = L(0) rho with an adaptive Runge-Kutta method (DOP853).

    Args:
        gen: Uncounted generator.
        rho0: Initial density matrix (4 x 4) or population vector (4,).
        t_grid: Increasing output times; the first is the initial time.

    Raises:
        StepSizeUnderflowError: If the integrator cannot proceed.
    """
    matrix = _matrix(gen, 0.0)
    rho0 = np.asarray(rho0, dtype=complex)
    population = rho0.ndim == 1
    y0 = rho0 if population else vec(rho0)
    if y0.size != matrix.shape[0]:
        raise ValueError(f"rho0 must have {matrix.shape[0]} entries when vectorised, got {y0.size}")
    times = np.asarray(t_grid, dtype=float)

    solution = integrate.solve_ivp(
        lambda t, y: matrix @ y,
        (float(times[0]), float(times[-1])),
        y0,
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if solution.status == -1:
        raise StepSizeUnderflowError(f"dynamics integration failed: {solution.message}")
    states = solution.y.T
    if not population:
        states = np.array([unvec(y) for y in states])
    return Trajectory(times=solution.t, states=states)
