"""
Closed-form heat currents for qheat.

These evaluate the current into a bath directly from a steady state and the
rates, independently of the counting-statistics derivative, so the two can be
checked against each other.
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np

from src.baths import Axis
from src.errors import AsymmetricSplittingError, SchemeMismatchError
from src.fcs import SteadyState
from src.generators import Scheme, TiltedGenerator, partner_indices
from src.model import L, R, SIDES, PolaronFrame, SystemSpec, qubit_operator, side_of
from src.rates import (
    ABSORB,
    EMIT,
    SIDE_TRANSITIONS,
    NibaRateTable,
    redfield_gamma,
    redfield_sequential_rate,
    redfield_spectrum,
)

logger = logging.getLogger("QHeat.Currents")


def _require_symmetric(table: NibaRateTable) -> None:
    e = table.energies
    if e[2] != e[3]:
        raise AsymmetricSplittingError(
            f"closed-form NIBA expressions need eps_L == eps_R (E_2 == E_3), got E_2={e[2]}, E_3={e[3]}"
        )


def _aliased_rates(table: NibaRateTable, side: str) -> Tuple[float, float, float, float]:
    """(kappa^12, kappa^21, kappa^24, kappa^42) of one side.

    With E_2 == E_3 the rates through state 3 equal those through state 2:
    kappa^13_L = kappa^12_L, kappa^31_L = kappa^21_L, kappa^34_R = kappa^24_R
    and kappa^43_R = kappa^42_R.
    """
    k = table.kappa
    if side == L:
        return k[(1, 3, L)], k[(3, 1, L)], k[(2, 4, L)], k[(4, 2, L)]
    return k[(1, 2, R)], k[(2, 1, R)], k[(3, 4, R)], k[(4, 3, R)]


def _population_numerators(table: NibaRateTable) -> Tuple[float, float, float, float]:
    k12_l, k21_l, k24_l, k42_l = _aliased_rates(table, L)
    k12_r, k21_r, k24_r, k42_r = _aliased_rates(table, R)
    up = k12_l + k12_r
    return (
        k21_l * k21_r * k42_r + k42_l * k21_r * k24_r + k21_l * k42_l * k21_r + k21_l * k24_l * k42_r,
        k21_l * k12_r * k42_r + up * k42_l * k24_r + k21_l * k42_l * k12_r,
        k21_r * k12_l * k42_l + up * k42_r * k24_l + k21_r * k42_r * k12_l,
        k21_l * k24_l * k12_r + k21_r * k24_r * k12_l + up * k24_l * k24_r,
    )


def _normalization_half(this: Tuple[float, ...], other: Tuple[float, ...]) -> float:
    k12, k21, k24, k42 = this
    o12, o21, o24, o42 = other
    return (
        k12 * k42 * o21
        + k21 * k24 * o42
        + k21 * k42 * o21
        + k21 * k42 * o12
        + k21 * k24 * o12
        + (k12 + o12) * (k24 * o42 + k24 * o24 / 2.0)
    )


def niba_normalization(table: NibaRateTable) -> float:
    """The coefficient A: the bracket over (L, R) plus its L <-> R mirror.

    Raises:
        AsymmetricSplittingError: If eps_L != eps_R.
    """
    _require_symmetric(table)
    left, right = _aliased_rates(table, L), _aliased_rates(table, R)
    return float(_normalization_half(left, right) + _normalization_half(right, left))


def analytic_niba_populations(table: NibaRateTable) -> np.ndarray:
    """Closed-form NIBA steady populations P_i = N_i / A.

    Raises:
        AsymmetricSplittingError: If eps_L != eps_R.
    """
    normalization = niba_normalization(table)
    return np.array(_population_numerators(table)) / normalization


def niba_loop_currents(table: NibaRateTable) -> Tuple[float, float, float]:
    """Forward loop, backward loop and their difference.

    forward = 4U k24_L k43_R k31_L k12_R / A, backward = 4U k21_R k13_L k34_R k42_L / A;
    4U = E_12 - E_34 is the energy one forward cycle delivers to the right bath.
    """
    normalization = niba_normalization(table)
    e = table.energies
    cycle_energy = e.gap(1, 2) - e.gap(3, 4)
    k = table.kappa
    forward = cycle_energy * k[(2, 4, L)] * k[(4, 3, R)] * k[(3, 1, L)] * k[(1, 2, R)] / normalization
    backward = cycle_energy * k[(2, 1, R)] * k[(1, 3, L)] * k[(3, 4, R)] * k[(4, 2, L)] / normalization
    return forward, backward, forward - backward


def niba_side_current(table: NibaRateTable, populations: np.ndarray, side: str) -> float:
    """Energy per time into the bath(s) of one side: sum_ij E_ij k^ij P_i."""
    p = np.asarray(populations, dtype=float)
    return float(sum(table.energies.gap(i, j) * table.kappa[(i, j, side)] * p[i - 1] for i, j in SIDE_TRANSITIONS[side]))


def niba_right_components(table: NibaRateTable, populations: np.ndarray) -> Tuple[float, float]:
    """E_12(k12_R P1 - k21_R P2) and E_34(k43_R P4 - k34_R P3); I_R is their difference."""
    p = np.asarray(populations, dtype=float)
    k, e = table.kappa, table.energies
    upper = e.gap(1, 2) * (k[(1, 2, R)] * p[0] - k[(2, 1, R)] * p[1])
    lower = e.gap(3, 4) * (k[(4, 3, R)] * p[3] - k[(3, 4, R)] * p[2])
    return upper, lower


def _population_rates(spec: SystemSpec, frame: PolaronFrame, terminal: str) -> np.ndarray:
    """rate[n, m] of the jump n -> m driven by one weak-coupling bath."""
    energies = frame.eigenvalues
    emitted = energies[:, np.newaxis] - energies[np.newaxis, :]
    op = frame.eigensystem.to_eigenbasis(qubit_operator(side_of(terminal), "z"))
    rate = np.abs(op) ** 2 * redfield_spectrum(spec.baths[terminal], emitted.ravel()).reshape(4, 4)
    np.fill_diagonal(rate, 0.0)
    return rate


def redfield_transition_currents(
    spec: SystemSpec,
    frame: PolaronFrame,
    populations: np.ndarray,
    terminal: str = R,
) -> Dict[Tuple[int, int], float]:
    """Net energy flow into a bath through each eigenstate pair, J_nm = J_{n->m} + J_{m->n}.

    Keys are 1-based eigenstate labels with n < m.
    """
    p = np.asarray(populations, dtype=float)
    energies = frame.eigenvalues
    rate = _population_rates(spec, frame, terminal)
    currents = {}
    for n in range(4):
        for m in range(n + 1, 4):
            gap = energies[n] - energies[m]
            currents[(n + 1, m + 1)] = float(gap * (rate[n, m] * p[n] - rate[m, n] * p[m]))
    return currents


def redfield_current_verbatim(spec: SystemSpec, frame: PolaronFrame, populations: np.ndarray, terminal: str = R) -> float:
    """sum_{n != m} E_mn S(E_mn) |sigma_z^{nm}|^2 P_m with J continued as an odd function."""
    p = np.asarray(populations, dtype=float)
    energies = frame.eigenvalues
    op = frame.eigensystem.to_eigenbasis(qubit_operator(side_of(terminal), "z"))
    total = 0.0
    for n in range(4):
        for m in range(4):
            if n == m:
                continue
            gap = energies[m] - energies[n]
            total += gap * float(redfield_spectrum(spec.baths[terminal], gap)[0]) * abs(op[n, m]) ** 2 * p[m]
    return float(total)


def redfield_current_net(spec: SystemSpec, frame: PolaronFrame, populations: np.ndarray, terminal: str = R) -> float:
    """sum over pairs of E times (emission - absorption) with explicit sequential rates."""
    p = np.asarray(populations, dtype=float)
    energies = frame.eigenvalues
    bath = spec.baths[terminal]
    op = frame.eigensystem.to_eigenbasis(qubit_operator(side_of(terminal), "z"))
    total = 0.0
    for n in range(4):
        for m in range(4):
            gap = energies[n] - energies[m]
            if gap <= 0.0:
                continue
            weight = abs(op[n, m]) ** 2
            emission = redfield_sequential_rate(bath, spec.qubit(side_of(terminal)).delta, gap, EMIT) * p[n]
            absorption = redfield_sequential_rate(bath, spec.qubit(side_of(terminal)).delta, gap, ABSORB) * p[m]
            total += gap * weight * (emission - absorption)
    return float(total)


def _jump_current(op: np.ndarray, groups, forward: np.ndarray, rho: np.ndarray, backward: Optional[np.ndarray], secular: bool) -> float:
    if secular:
        partners = partner_indices([w for w, _ in groups])
        total = 0.0
        for k, (w, p) in enumerate(groups):
            rate = forward[k] + backward[partners[k]]
            total += w * (rate * np.trace(p.conj().T @ p @ rho)).real
        return float(total)
    total = 0.0 + 0.0j
    for k, (w, p) in enumerate(groups):
        total += w * forward[k] * np.trace(rho @ op @ p)
    return float(2.0 * total.real)


def neptre_current(gen: TiltedGenerator, steady: SteadyState, terminal: Optional[str] = None) -> float:
    """I_v = sum_a 2 Re sum_w w Gamma_{a,+}(w) Tr[rho sigma_a P_a(w)] for a fully counted side.

    Raises:
        SchemeMismatchError: For one bath of a composite side, which has no closed form.
    """
    terminal = terminal or gen.chi_terminal
    side = side_of(terminal)
    kernel = gen.rates.kernels[side]
    if kernel.is_composite and terminal != side:
        raise SchemeMismatchError(f"no closed-form NE-PTRE current for {terminal}; use the counting statistics")
    total = 0.0
    for axis in (Axis.X, Axis.Y):
        groups = gen.frame.groups(side, axis.value)
        if not groups:
            continue
        omegas = [w for w, _ in groups]
        forward, backward = gen.rates.rates(side, axis, omegas, None, gen.neglect_lamb_shift)
        op = gen.frame.eigensystem.to_eigenbasis(qubit_operator(side, axis.value))
        total += _jump_current(op, groups, forward, steady.rho, backward, gen.secular)
    return total


def redfield_full_current(gen: TiltedGenerator, steady: SteadyState, terminal: Optional[str] = None) -> float:
    """Same jump-current formula with the weak-coupling rates of one bath."""
    terminal = terminal or gen.chi_terminal
    side = side_of(terminal)
    groups = gen.frame.groups(side, "z")
    omegas = [w for w, _ in groups]
    bath = gen.system.baths[terminal]
    forward, backward = redfield_gamma(bath, 1, omegas), redfield_gamma(bath, -1, omegas)
    op = gen.frame.eigensystem.to_eigenbasis(qubit_operator(side, "z"))
    return _jump_current(op, groups, forward, steady.rho, backward, gen.secular)


def analytic_current(gen: TiltedGenerator, steady: SteadyState, terminal: Optional[str] = None) -> float:
    """Closed-form current into ``terminal`` (default: the counted one) for the generator's scheme.

    Raises:
        SchemeMismatchError: If the steady state belongs to another kind of generator,
            or the terminal has no closed form.
    """
    terminal = terminal or gen.chi_terminal
    if steady.is_population != gen.is_population:
        raise SchemeMismatchError(f"steady state does not match the {gen.scheme.value} generator")

    if gen.scheme is Scheme.NIBA:
        if terminal not in SIDES:
            raise SchemeMismatchError(f"no closed-form NIBA current for {terminal}; use the counting statistics")
        return niba_side_current(gen.table, steady.populations, side_of(terminal))

    if gen.scheme is Scheme.REDFIELD:
        if gen.form == "population":
            return redfield_current_net(gen.system, gen.frame, steady.populations, terminal)
        return redfield_full_current(gen, steady, terminal)

    return neptre_current(gen, steady, terminal)
