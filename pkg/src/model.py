"""
Two-qubit device model for qheat.

Builds the lab-frame and polaron-frame system Hamiltonians in the product
basis (|uu>, |ud>, |du>, |dd>), their eigensystems and the Bohr-frequency
decomposition of the qubit coupling operators.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
import logging
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.baths import BathSpec
from src.errors import NonSymmetricError

logger = logging.getLogger("QHeat.Model")

# Terminal ids
L = "L"
R = "R"
L_H = "L_h"
L_C = "L_c"

SIDES = (L, R)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
IDENTITY_2 = np.eye(2)

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


class Topology(str, Enum):
    """Device layout."""

    TWO_TERMINAL = "two_terminal"
    THREE_TERMINAL = "three_terminal"

    @property
    def terminals(self) -> Tuple[str, ...]:
        if self is Topology.TWO_TERMINAL:
            return (L, R)
        return (L_H, L_C, R)


def side_of(terminal: str) -> str:
    """Qubit side a terminal couples to."""
    if terminal in (L, L_H, L_C):
        return L
    if terminal == R:
        return R
    raise ValueError(f"terminal must be one of L, L_h, L_c, R, got {terminal!r}")


def qubit_operator(side: str, name: str) -> np.ndarray:
    """Pauli operator ``name`` acting on qubit ``side`` in the product basis."""
    pauli = _PAULI[name]
    if side == L:
        return np.kron(pauli, IDENTITY_2)
    if side == R:
        return np.kron(IDENTITY_2, pauli)
    raise ValueError(f"side must be L or R, got {side!r}")


@dataclass(frozen=True)
class QubitSpec:
    """Single qubit: splitting energy and tunneling strength."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.delta >= 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class SystemSpec:
    """Two-qubit device and its baths.

    Attributes:
        u: Inter-qubit coupling.
        left: Left qubit.
        right: Right qubit.
        topology: Two- or three-terminal layout.
        baths: Terminal id to bath; {L, R} or {L_h, L_c, R}.
    """

    u: float
    left: QubitSpec
    right: QubitSpec
    topology: Topology = Topology.TWO_TERMINAL
    baths: Mapping[str, BathSpec] = field(default_factory=dict)

    def __post_init__(self):
        topology = Topology(self.topology)
        object.__setattr__(self, "topology", topology)
        expected = set(topology.terminals)
        if set(self.baths) != expected:
            raise ValueError(f"baths must have exactly {sorted(expected)} for {topology.value}, got {sorted(self.baths)}")
        for terminal, bath in self.baths.items():
            if not bath.temperature > 0.0:
                raise ValueError(f"temperature of bath {terminal} must be > 0, got {bath.temperature}")

    @property
    def terminals(self) -> Tuple[str, ...]:
        return self.topology.terminals

    def qubit(self, side: str) -> QubitSpec:
        return self.left if side == L else self.right

    def baths_on(self, side: str) -> Tuple[BathSpec, ...]:
        """Baths attached to one qubit, hot before cold."""
        return tuple(self.baths[t] for t in self.terminals if side_of(t) == side)

    def terminals_on(self, side: str) -> Tuple[str, ...]:
        return tuple(t for t in self.terminals if side_of(t) == side)

    @property
    def symmetric_splitting(self) -> bool:
        return self.left.epsilon == self.right.epsilon

    def with_bath(self, terminal: str, bath: BathSpec) -> "SystemSpec":
        baths = dict(self.baths)
        baths[terminal] = bath
        return replace(self, baths=baths)

    def with_temperatures(self, **temperatures: float) -> "SystemSpec":
        """Copy with new temperatures, e.g. ``with_temperatures(L=2.0, R=1.0)``."""
        spec = self
        for terminal, temperature in temperatures.items():
            spec = spec.with_bath(terminal, spec.baths[terminal].with_temperature(temperature))
        return spec

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "left": {"epsilon": self.left.epsilon, "delta": self.left.delta},
            "right": {"epsilon": self.right.epsilon, "delta": self.right.delta},
            "topology": self.topology.value,
            "baths": {t: self.baths[t].to_dict() for t in self.terminals},
        }


@dataclass(frozen=True)
class LocalBasisEnergies:
    """Energies E_1..E_4 of |uu>, |ud>, |du>, |dd> without tunneling."""

    e: Tuple[float, float, float, float]

    def __getitem__(self, state: int) -> float:
        """1-based state index."""
        return self.e[state - 1]

    def gap(self, i: int, j: int) -> float:
        """E_ij = E_i - E_j."""
        return self.e[i - 1] - self.e[j - 1]


@dataclass(frozen=True)
class Eigensystem:
    """Ascending eigenvalues and column eigenvectors of a Hamiltonian."""

    values: np.ndarray
    vectors: np.ndarray

    def to_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ op @ self.vectors

    def from_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.vectors @ op @ self.vectors.conj().T


BohrGroups = List[Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class PolaronFrame:
    """System Hamiltonian with its eigensystem and decomposed coupling operators.

    ``bohr_groups`` is keyed by (side, operator name) with names x, y for the
    polaron frame and z for the lab frame; matrices are in the eigenbasis.
    """

    eta: Dict[str, float]
    h_prime: np.ndarray
    eigensystem: Eigensystem
    bohr_groups: Dict[Tuple[str, str], BohrGroups]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigensystem.values

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eigensystem.vectors

    def groups(self, side: str, name: str) -> BohrGroups:
        return self.bohr_groups[(side, name)]


def build_polaron_hamiltonian(spec: SystemSpec, eta: Mapping[str, float]) -> np.ndarray:
    """H' = U sz sz + sum_v (eps_v/2 sz + eta_v Delta_v/2 sx)_v.

    Args:
        spec: The device.
        eta: Renormalization factor per side; 1 for the lab frame.

    Returns:
        4x4 real symmetric matrix in the product basis.
    """
    h = spec.u * np.kron(SIGMA_Z, SIGMA_Z)
    for side in SIDES:
        factor = eta[side]
        if not 0.0 <= factor <= 1.0:
            raise ValueError(f"eta[{side}] must be in [0, 1], got {factor}")
        qubit = spec.qubit(side)
        h = h + 0.5 * qubit.epsilon * qubit_operator(side, "z")
        h = h + 0.5 * factor * qubit.delta * qubit_operator(side, "x")
    return h


def eigensystem(h: np.ndarray, tol: float = 1e-12) -> Eigensystem:
    """Eigen-decomposition with a fixed sign convention.

    Each eigenvector is flipped so that its largest-magnitude entry (the first
    one, among entries equal within ``tol``) is positive.

    Raises:
        NonSymmetricError: If ``h`` is not symmetric within ``tol``.
    """
    h = np.asarray(h)
    asymmetry = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if asymmetry > tol:
        raise NonSymmetricError(f"matrix must be symmetric within {tol}, got residual {asymmetry:.3e}")
    values, vectors = np.linalg.eigh(h)
    vectors = np.array(vectors)
    for k in range(vectors.shape[1]):
        column = vectors[:, k]
        magnitude = np.abs(column)
        lead = int(np.flatnonzero(magnitude >= magnitude.max() - tol)[0])
        if column[lead].real < 0.0:
            vectors[:, k] = -column
    return Eigensystem(values=values, vectors=vectors)


def bohr_decompose(op: np.ndarray, eigs: Eigensystem, freq_tol: float = 1e-9) -> BohrGroups:
    """Split an operator into Bohr-frequency components.

    P(w) collects the eigenbasis elements <n|op|m> with E_m - E_n = w.
    Frequencies closer than ``freq_tol`` are merged; zero elements are
    skipped, so only frequencies the operator actually connects appear.

    Returns:
        (w, P(w)) pairs sorted by w, with P(w) in the eigenbasis.
    """
    if freq_tol <= 0.0:
        raise ValueError(f"freq_tol must be positive, got {freq_tol}")
    a = eigs.to_eigenbasis(np.asarray(op))
    energies = eigs.values
    omega = energies[np.newaxis, :] - energies[:, np.newaxis]
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    present = np.abs(a) > 1e-14 * scale

    # Cluster on |w| so that the +w and -w groups mirror exactly
    magnitudes = np.unique(np.abs(omega[present]))
    members: List[List[float]] = []
    for value in magnitudes:
        if members and value - members[-1][-1] <= freq_tol:
            members[-1].append(value)
        else:
            members.append([value])
    centre_of = {value: float(np.mean(cluster)) for cluster in members for value in cluster}

    groups: Dict[float, np.ndarray] = {}
    for n, m in zip(*np.nonzero(present)):
        w = omega[n, m]
        centre = centre_of[abs(w)]
        key = 0.0 if centre <= freq_tol else (centre if w > 0.0 else -centre)
        block = groups.setdefault(key, np.zeros_like(a))
        block[n, m] = a[n, m]
    return sorted(groups.items(), key=lambda item: item[0])


def local_basis_energies(u: float, eps_l: float, eps_r: float) -> LocalBasisEnergies:
    """Diagonal of U sz sz + sum_v eps_v sz_v / 2."""
    h = u * np.kron(SIGMA_Z, SIGMA_Z) + 0.5 * eps_l * qubit_operator(L, "z") + 0.5 * eps_r * qubit_operator(R, "z")
    return LocalBasisEnergies(tuple(float(x) for x in np.diag(h)))


def _frame(spec: SystemSpec, eta: Dict[str, float], names: Tuple[str, ...], freq_tol: float) -> PolaronFrame:
    h = build_polaron_hamiltonian(spec, eta)
    eigs = eigensystem(h)
    groups = {
        (side, name): bohr_decompose(qubit_operator(side, name), eigs, freq_tol)
        for side in SIDES
        for name in names
    }
    logger.debug("Frame eta=%s eigenvalues=%s", eta, np.round(eigs.values, 12))
    return PolaronFrame(eta=dict(eta), h_prime=h, eigensystem=eigs, bohr_groups=groups)


def build_polaron_frame(spec: SystemSpec, eta: Mapping[str, float], freq_tol: float = 1e-9) -> PolaronFrame:
    """Polaron frame with sigma_x and sigma_y decompositions on both sides."""
    return _frame(spec, dict(eta), ("x", "y"), freq_tol)


def build_lab_frame(spec: SystemSpec, freq_tol: float = 1e-9, eta: Optional[Mapping[str, float]] = None) -> PolaronFrame:
    """Lab frame (eta = 1) with the sigma_z coupling operators decomposed."""
    return _frame(spec, dict(eta or {L: 1.0, R: 1.0}), ("z",), freq_tol)
