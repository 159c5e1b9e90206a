"""
Tests for the qheat device model.

Covers the device types, the local-basis energies and the
eigen-decomposition helpers that every scheme builds on.
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.baths import BathSpec
from src.errors import NonSymmetricError
from src.model import (
    L,
    L_C,
    L_H,
    R,
    QubitSpec,
    SystemSpec,
    Topology,
    bohr_decompose,
    build_lab_frame,
    build_polaron_hamiltonian,
    eigensystem,
    local_basis_energies,
    qubit_operator,
    side_of,
)


def two_terminal(u=0.1, epsilon=1.0, t_l=1.5, t_r=0.5, alpha=0.05):
    qubit = QubitSpec(epsilon=epsilon, delta=1.0)
    return SystemSpec(u=u, left=qubit, right=qubit, baths={L: BathSpec(alpha, 5.0, t_l), R: BathSpec(alpha, 5.0, t_r)})


class TestSystemSpec(unittest.TestCase):
    """Tests for QubitSpec and SystemSpec."""

    def setUp(self):
        """Set up a default device."""
        self.spec = two_terminal()

    def test_terminals(self):
        """Test the terminal sets of both topologies."""
        self.assertEqual(self.spec.terminals, (L, R))
        self.assertEqual(Topology.THREE_TERMINAL.terminals, (L_H, L_C, R))

    def test_negative_delta_rejected(self):
        """Test that a negative tunneling strength is rejected."""
        with self.assertRaises(ValueError):
            QubitSpec(epsilon=1.0, delta=-0.1)

    def test_wrong_baths_rejected(self):
        """Test that the bath set must match the topology."""
        qubit = QubitSpec(epsilon=1.0, delta=1.0)
        with self.assertRaises(ValueError):
            SystemSpec(u=0.1, left=qubit, right=qubit, topology=Topology.THREE_TERMINAL, baths={L: BathSpec(1.0, 5.0, 1.0), R: BathSpec(1.0, 5.0, 1.0)})

    def test_with_temperatures(self):
        """Test copying a device at new temperatures."""
        warmer = self.spec.with_temperatures(L=3.0)
        self.assertEqual(warmer.baths[L].temperature, 3.0)
        self.assertEqual(warmer.baths[R].temperature, 0.5)
        self.assertEqual(self.spec.baths[L].temperature, 1.5)

    def test_side_of(self):
        """Test the qubit side of every terminal."""
        self.assertEqual(side_of(L_H), L)
        self.assertEqual(side_of(L_C), L)
        self.assertEqual(side_of(R), R)
        with self.assertRaises(ValueError):
            side_of("X")

    def test_to_dict(self):
        """Test the plain dictionary form."""
        data = self.spec.to_dict()
        self.assertEqual(data["topology"], "two_terminal")
        self.assertEqual(data["baths"]["R"]["temperature"], 0.5)


class TestEnergies(unittest.TestCase):
    """Tests for the local-basis energies."""

    def test_symmetric_energies(self):
        """Test E_1..E_4 for eps_L = eps_R = 1, U = 0.1."""
        energies = local_basis_energies(0.1, 1.0, 1.0)
        np.testing.assert_allclose(energies.e, (1.1, -0.1, -0.1, -0.9), atol=1e-15)

    def test_cycle_energy(self):
        """Test that one loop around the four states moves 4U."""
        energies = local_basis_energies(0.3, 0.7, 0.7)
        self.assertAlmostEqual(energies.gap(1, 2) - energies.gap(3, 4), 1.2, places=12)

    def test_asymmetric_energies(self):
        """Test that unequal splittings separate E_2 and E_3."""
        energies = local_basis_energies(0.1, 1.0, 0.6)
        self.assertAlmostEqual(energies[2] - energies[3], 0.4, places=12)


class TestEigensystem(unittest.TestCase):
    """Tests for the eigen-decomposition helpers."""

    def setUp(self):
        """Set up a polaron Hamiltonian."""
        self.spec = two_terminal()
        self.h = build_polaron_hamiltonian(self.spec, {L: 0.8, R: 0.8})

    def test_non_symmetric_rejected(self):
        """Test that a non-symmetric matrix is rejected."""
        with self.assertRaises(NonSymmetricError):
            eigensystem(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_sign_convention(self):
        """Test that each eigenvector's largest entry is positive."""
        eigs = eigensystem(self.h)
        for k in range(4):
            column = eigs.vectors[:, k]
            self.assertGreater(column[np.argmax(np.abs(column))].real, 0.0)

    def test_eta_out_of_range(self):
        """Test that a renormalization factor above one is rejected."""
        with self.assertRaises(ValueError):
            build_polaron_hamiltonian(self.spec, {L: 1.2, R: 1.0})

    def test_bohr_groups_rebuild_operator(self):
        """Test that the Bohr components sum to the operator."""
        eigs = eigensystem(self.h)
        op = qubit_operator(L, "x")
        groups = bohr_decompose(op, eigs)
        total = sum(p for _, p in groups)
        np.testing.assert_allclose(total, eigs.to_eigenbasis(op), atol=1e-12)

    def test_bohr_frequencies_mirror(self):
        """Test that every frequency appears with its negative."""
        frame = build_lab_frame(self.spec)
        omegas = [w for w, _ in frame.groups(R, "z")]
        for w in omegas:
            self.assertIn(-w if w != 0.0 else 0.0, omegas)

    def test_bohr_spectrum_shift_covariant(self):
        """Test that a constant energy shift moves the levels but not the Bohr components."""
        shift = 2.5
        eigs = eigensystem(self.h)
        shifted = eigensystem(self.h + shift * np.eye(4))
        np.testing.assert_allclose(shifted.values, eigs.values + shift, atol=1e-12)
        op = qubit_operator(R, "x")
        groups = [(w, p) for w, p in bohr_decompose(op, eigs) if np.max(np.abs(p)) > 1e-10]
        shifted_groups = [(w, p) for w, p in bohr_decompose(op, shifted) if np.max(np.abs(p)) > 1e-10]
        self.assertEqual(len(groups), len(shifted_groups))
        for (w, p), (w_shifted, p_shifted) in zip(groups, shifted_groups):
            self.assertAlmostEqual(w, w_shifted, places=12)
            np.testing.assert_allclose(shifted.from_eigenbasis(p_shifted), eigs.from_eigenbasis(p), atol=1e-12)


if __name__ == "__main__":
    unittest.main()
