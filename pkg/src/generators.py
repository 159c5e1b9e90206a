"""
Counting-field tilted generators for qheat.

Density matrices are vectorised by column stacking, so that
vec(X rho Y) = kron(Y^T, X) vec(rho). The NE-PTRE and full Redfield
generators act on the 16-dimensional vec(rho) in the system eigenbasis; NIBA
and the population form of Redfield act on the four populations.

Energy counting enters only the gain (jump) terms: emitting energy w into
the counted bath multiplies the jump by exp(i w chi), so the first
derivative of the cumulant generating function in i chi is the heat current
into that bath.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.baths import Axis, BathKernel
from src.config import SolverConfig
from src.model import (
    L,
    R,
    SIDES,
    BohrGroups,
    PolaronFrame,
    SystemSpec,
    build_lab_frame,
    build_polaron_frame,
    qubit_operator,
    side_of,
)
from src.rates import (
    SIDE_TRANSITIONS,
    NibaRateTable,
    RateEngine,
    build_niba_rate_table,
    default_engine,
    redfield_gamma,
    redfield_spectrum,
    side_kernels,
)

logger = logging.getLogger("QHeat.Generators")

_I4 = np.eye(4)


class Scheme(str, Enum):
    """Master-equation scheme."""

    NEPTRE = "neptre"
    REDFIELD = "redfield"
    NIBA = "niba"


@dataclass
class TiltedGenerator:
    """Generator L(chi) of one scheme with one terminal counted.

    Attributes:
        scheme: The scheme.
        chi_terminal: Terminal whose energy exchange is counted.
        dim: 16 for density-matrix generators, 4 for population generators.
        build: chi -> dim x dim complex matrix.
        system: The device the generator was built for.
        frame: Eigensystem and coupling decomposition, when the scheme has one.
        table: NIBA rates, for the NIBA scheme.
        rates: Polaron kernels, for the NE-PTRE scheme.
        form: "full" or "population".
        secular: Cross-frequency terms dropped.
        neglect_lamb_shift: Rates replaced by half their full Fourier transform.
    """

    scheme: Scheme
    chi_terminal: str
    dim: int
    build: Callable[[float], np.ndarray]
    system: Optional[SystemSpec] = None
    frame: Optional[PolaronFrame] = None
    table: Optional[NibaRateTable] = None
    rates: Optional["NeptreRates"] = None
    form: str = "full"
    secular: bool = False
    neglect_lamb_shift: bool = False
    _at_zero: Optional[np.ndarray] = field(default=None, repr=False)

    def __call__(self, chi: float = 0.0) -> np.ndarray:
        if chi == 0.0:
            if self._at_zero is None:
                self._at_zero = self.build(0.0)
            return self._at_zero
        return self.build(chi)

    @property
    def is_population(self) -> bool:
        return self.dim == 4

    def trace_vector(self) -> np.ndarray:
        """Row vector whose product with vec(rho) (or populations) is the trace."""
        if self.is_population:
            return np.ones(4)
        return _I4.reshape(-1, order="F")


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(vector: np.ndarray) -> np.ndarray:
    return np.asarray(vector).reshape(4, 4, order="F")


def coherent_superoperator(h: np.ndarray) -> np.ndarray:
    """-i[H, .] as a 16 x 16 matrix."""
    return -1j * (np.kron(_I4, h) - np.kron(h.T, _I4))


def partner_indices(omegas: Sequence[float]) -> List[int]:
    """Index of -w for every w of a symmetric frequency list."""
    index = {w: k for k, w in enumerate(omegas)}
    return [index[-w if w != 0.0 else 0.0] for w in omegas]


def lamb_free(forward: np.ndarray, backward: np.ndarray, partners: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Half the full Fourier transform in place of each half-Fourier rate.

    Gamma_+(w) -> [Gamma_+(w) + Gamma_-(-w)]/2 and Gamma_-(w) -> [Gamma_-(w) + Gamma_+(-w)]/2,
    which reduce to Re Gamma_+/- when uncounted.
    """
    partners = list(partners)
    return 0.5 * (forward + backward[partners]), 0.5 * (backward + forward[partners])


def dissipator(
    op: np.ndarray,
    groups: BohrGroups,
    loss: Tuple[np.ndarray, np.ndarray],
    gain: Tuple[np.ndarray, np.ndarray],
    secular: bool = False,
) -> np.ndarray:
    """Second-order dissipator of one coupling operator.

    With Lambda_s = sum_w Gamma_s(w) P(w),
    D(rho) = A rho G_- + G_+ rho A - A Lambda_+ rho - rho Lambda_- A,
    where G_+/- are built from the (possibly counted) gain rates. The secular
    variant keeps only the P(w) rho P(w)^dagger pairings.

    Args:
        op: Coupling operator in the eigenbasis.
        groups: Its Bohr decomposition.
        loss: (Gamma_+, Gamma_-) per group frequency, uncounted.
        gain: (Gamma_+, Gamma_-) per group frequency, counted.
        secular: Drop cross-frequency terms.
    """
    loss_plus, loss_minus = loss
    gain_plus, gain_minus = gain
    projectors = [p for _, p in groups]
    if secular:
        partners = partner_indices([w for w, _ in groups])
        superop = np.zeros((16, 16), dtype=complex)
        for k, p in enumerate(projectors):
            pp = p.conj().T @ p
            jump = gain_minus[partners[k]] + gain_plus[k]
            superop += jump * np.kron(p.conj(), p)
            superop -= loss_plus[k] * np.kron(_I4, pp)
            superop -= loss_minus[partners[k]] * np.kron(pp.T, _I4)
        return superop

    def combine(rates: np.ndarray) -> np.ndarray:
        return sum((r * p for r, p in zip(rates, projectors)), np.zeros((4, 4), dtype=complex))

    lam_plus, lam_minus = combine(loss_plus), combine(loss_minus)
    g_plus, g_minus = combine(gain_plus), combine(gain_minus)
    return (
        np.kron(g_minus.T, op)
        + np.kron(op.T, g_plus)
        - np.kron(_I4, op @ lam_plus)
        - np.kron((lam_minus @ op).T, _I4)
    )


def counting_shifts(kernel: BathKernel, side: str, chi_terminal: str, chi: float) -> Tuple[float, ...]:
    """Per-bath kernel shifts on ``side`` when ``chi_terminal`` is counted."""
    zero = (0.0,) * len(kernel.specs)
    if chi == 0.0 or side_of(chi_terminal) != side:
        return zero
    if not kernel.is_composite or chi_terminal == side:
        return (chi,) * len(kernel.specs)
    position = 0 if chi_terminal.endswith("_h") else 1
    return tuple(chi if k == position else 0.0 for k in range(len(kernel.specs)))


@dataclass
class NeptreRates:
    """Polaron kernels and tunneling strengths of both sides, with the engine that integrates them."""

    kernels: Dict[str, BathKernel]
    deltas: Dict[str, float]
    engine: RateEngine = field(default_factory=default_engine)

    @classmethod
    def for_system(cls, spec: SystemSpec, config: SolverConfig, engine: Optional[RateEngine] = None) -> "NeptreRates":
        return cls(
            kernels=side_kernels(spec, config.quadrature),
            deltas={side: spec.qubit(side).delta for side in SIDES},
            engine=engine or default_engine(),
        )

    def eta(self) -> Dict[str, float]:
        return {side: self.kernels[side].eta for side in SIDES}

    def rates(
        self,
        side: str,
        axis: Axis,
        omegas: Sequence[float],
        shifts: Optional[Sequence[float]] = None,
        neglect_lamb_shift: bool = False,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(Gamma_+, Gamma_-) on a symmetric frequency list."""
        kernel, delta = self.kernels[side], self.deltas[side]
        forward = self.engine.gamma(kernel, delta, axis, 1, omegas, shifts)
        backward = self.engine.gamma(kernel, delta, axis, -1, omegas, shifts)
        if neglect_lamb_shift:
            return lamb_free(forward, backward, partner_indices(list(omegas)))
        return forward, backward


def build_neptre_generator(
    frame: PolaronFrame,
    rates: NeptreRates,
    chi_terminal: str,
    chi: float,
    secular: bool = False,
    neglect_lamb_shift: bool = False,
) -> np.ndarray:
    """16 x 16 NE-PTRE generator in the polaron-frame eigenbasis, coherent part included."""
    h = np.diag(frame.eigenvalues).astype(complex)
    superop = coherent_superoperator(h)
    for side in SIDES:
        kernel = rates.kernels[side]
        shifts = counting_shifts(kernel, side, chi_terminal, chi)
        for axis in (Axis.X, Axis.Y):
            groups = frame.groups(side, axis.value)
            if not groups:
                continue
            omegas = [w for w, _ in groups]
            op = frame.eigensystem.to_eigenbasis(qubit_operator(side, axis.value))
            loss = rates.rates(side, axis, omegas, None, neglect_lamb_shift)
            gain = rates.rates(side, axis, omegas, shifts, neglect_lamb_shift) if any(shifts) else loss
            superop += dissipator(op, groups, loss, gain, secular)
    return superop


def _redfield_rates(spec: SystemSpec, terminal: str, omegas: Sequence[float], chi: float) -> Tuple[np.ndarray, np.ndarray]:
    bath = spec.baths[terminal]
    return redfield_gamma(bath, 1, omegas, chi), redfield_gamma(bath, -1, omegas, chi)


def build_redfield_generator(
    spec: SystemSpec,
    chi: float,
    form: str = "full",
    chi_terminal: str = R,
    frame: Optional[PolaronFrame] = None,
    secular: bool = False,
    freq_tol: float = 1e-9,
) -> np.ndarray:
    """Weak-coupling Redfield generator in the lab-frame eigenbasis.

    ``full`` gives the 16 x 16 non-secular generator with sigma_z couplings;
    ``population`` gives the 4 x 4 kinetic matrix on eigenstate populations
    with rates |sigma_z^{nm}|^2 S(E_n - E_m), the counted bath's jumps dressed by
    exp(i (E_n - E_m) chi).
    """
    frame = frame or build_lab_frame(spec, freq_tol)
    if form == "population":
        return _redfield_population(spec, frame, chi_terminal, chi)
    if form != "full":
        raise ValueError(f"form must be 'full' or 'population', got {form!r}")

    h = np.diag(frame.eigenvalues).astype(complex)
    superop = coherent_superoperator(h)
    for terminal in spec.terminals:
        side = side_of(terminal)
        groups = frame.groups(side, "z")
        omegas = [w for w, _ in groups]
        op = frame.eigensystem.to_eigenbasis(qubit_operator(side, "z"))
        loss = _redfield_rates(spec, terminal, omegas, 0.0)
        gain = _redfield_rates(spec, terminal, omegas, chi) if terminal == chi_terminal and chi != 0.0 else loss
        superop += dissipator(op, groups, loss, gain, secular)
    return superop


def _redfield_population(spec: SystemSpec, frame: PolaronFrame, chi_terminal: str, chi: float) -> np.ndarray:
    energies = frame.eigenvalues
    # emitted[n, m] = E_n - E_m for the jump n -> m
    emitted = energies[:, np.newaxis] - energies[np.newaxis, :]
    matrix = np.zeros((4, 4), dtype=complex)
    for terminal in spec.terminals:
        op = frame.eigensystem.to_eigenbasis(qubit_operator(side_of(terminal), "z"))
        weight = np.abs(op) ** 2
        rate = weight * redfield_spectrum(spec.baths[terminal], emitted.ravel()).reshape(4, 4)
        np.fill_diagonal(rate, 0.0)
        escape = rate.sum(axis=1)
        gain = rate * np.exp(1j * emitted * chi) if terminal == chi_terminal else rate
        matrix += gain.T
        matrix -= np.diag(escape)
    return matrix


def population_rate_matrix(
    table: NibaRateTable,
    counted: Optional[Dict[Tuple[int, int], complex]] = None,
    counted_side: Optional[str] = None,
) -> np.ndarray:
    """NIBA kinetic matrix dP/dt = M P from uncounted rates, with optional counted gains."""
    matrix = np.zeros((4, 4), dtype=complex)
    for side, pairs in SIDE_TRANSITIONS.items():
        for i, j in pairs:
            kappa = table.kappa[(i, j, side)]
            gain = counted[(i, j)] if counted is not None and side == counted_side else kappa
            matrix[j - 1, i - 1] += gain
            matrix[i - 1, i - 1] -= kappa
    return matrix


def build_niba_generator(
    table: NibaRateTable,
    chi: float,
    chi_terminal: str = R,
    engine: Optional[RateEngine] = None,
) -> np.ndarray:
    """4 x 4 NIBA generator; the counted side's gain rates carry the counting field."""
    if chi == 0.0:
        return population_rate_matrix(table)
    counted = table.counted_rates(chi_terminal, chi, engine)
    return population_rate_matrix(table, counted, side_of(chi_terminal))


def tilted_generator(
    spec: SystemSpec,
    config: SolverConfig,
    chi_terminal: str = R,
    engine: Optional[RateEngine] = None,
) -> TiltedGenerator:
    """Generator of the configured scheme for one counted terminal."""
    if chi_terminal not in spec.terminals:
        raise ValueError(f"chi_terminal must be one of {spec.terminals}, got {chi_terminal!r}")
    engine = engine or default_engine()
    scheme = Scheme(config.scheme)

    if scheme is Scheme.NEPTRE:
        rates = NeptreRates.for_system(spec, config, engine)
        frame = build_polaron_frame(spec, rates.eta(), config.freq_tol)
        logger.debug("NE-PTRE frame: eta_L=%.6g eta_R=%.6g", frame.eta[L], frame.eta[R])
        return TiltedGenerator(
            scheme=scheme,
            chi_terminal=chi_terminal,
            dim=16,
            build=lambda chi: build_neptre_generator(
                frame, rates, chi_terminal, chi, config.secular, config.neglect_lamb_shift
            ),
            system=spec,
            frame=frame,
            rates=rates,
            secular=config.secular,
            neglect_lamb_shift=config.neglect_lamb_shift,
        )

    if scheme is Scheme.REDFIELD:
        frame = build_lab_frame(spec, config.freq_tol)
        form = config.redfield_form
        return TiltedGenerator(
            scheme=scheme,
            chi_terminal=chi_terminal,
            dim=4 if form == "population" else 16,
            build=lambda chi: build_redfield_generator(spec, chi, form, chi_terminal, frame, config.secular),
            system=spec,
            frame=frame,
            form=form,
            secular=config.secular,
        )

    table = build_niba_rate_table(spec, config.quadrature, engine)
    return TiltedGenerator(
        scheme=scheme,
        chi_terminal=chi_terminal,
        dim=4,
        build=lambda chi: build_niba_generator(table, chi, chi_terminal, engine),
        system=spec,
        table=table,
        form="population",
    )
