"""
Tests for steady states, the cumulant generating function and dynamics.

Most tests use a hand-built four-state jump process whose counted jumps
carry energy E_COUNT between states 1 and 2, so the current is known in
closed form from the steady populations.
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.baths import BathSpec
from src.config import SolverConfig
from src.errors import DegenerateSteadyStateError
from src.fcs import cgf, cumulant, propagate_dynamics, steady_state
from src.generators import tilted_generator
from src.model import L, R, QubitSpec, SystemSpec

E_COUNT = 1.3
# rate[(i, j)] of the jump i -> j, 1-based
RATES = {(1, 2): 2.0, (2, 1): 0.7, (1, 3): 1.0, (3, 1): 0.4, (2, 4): 0.9, (4, 2): 1.1, (3, 4): 0.5, (4, 3): 0.8}


def jump_process(chi: float) -> np.ndarray:
    matrix = np.zeros((4, 4), dtype=complex)
    for (i, j), rate in RATES.items():
        gain = rate
        if (i, j) == (1, 2):
            gain = rate * np.exp(1j * E_COUNT * chi)
        elif (i, j) == (2, 1):
            gain = rate * np.exp(-1j * E_COUNT * chi)
        matrix[j - 1, i - 1] += gain
        matrix[i - 1, i - 1] -= rate
    return matrix


class TestSteadyState(unittest.TestCase):
    """Tests for steady_state."""

    def setUp(self):
        """Set up the jump process."""
        self.matrix = jump_process(0.0)

    def test_null_vector(self):
        """Test that the steady state is a normalized null vector."""
        steady = steady_state(self.matrix)
        self.assertTrue(steady.is_population)
        self.assertAlmostEqual(steady.trace, 1.0, places=12)
        self.assertLess(np.max(np.abs(self.matrix @ steady.populations)), 1e-12)
        self.assertTrue(np.all(steady.populations > 0.0))
        self.assertEqual(steady.coherence_norm(), 0.0)

    def test_degenerate(self):
        """Test that disconnected states are rejected."""
        with self.assertRaises(DegenerateSteadyStateError):
            steady_state(np.zeros((4, 4)))


class TestCumulants(unittest.TestCase):
    """Tests for cgf and cumulant."""

    def setUp(self):
        """Set up the jump process and its steady state."""
        self.steady = steady_state(jump_process(0.0))
        p = self.steady.populations
        self.expected = E_COUNT * (RATES[(1, 2)] * p[0] - RATES[(2, 1)] * p[1])

    def test_cgf_at_zero(self):
        """Test G(0) = 0."""
        self.assertLess(abs(cgf(jump_process(0.0), 0.0, track=False)), 1e-12)

    def test_current_matches_flux(self):
        """Test that the first cumulant equals the counted energy flux."""
        result = cumulant(jump_process, 1, steady=self.steady)
        self.assertLess(abs(result.current - self.expected) / abs(self.expected), 1e-8)
        self.assertIsNone(result.noise)
        self.assertEqual(result.chi_step, 1e-4)

    def test_noise_positive(self):
        """Test that the second cumulant of a jump process is positive."""
        result = cumulant(jump_process, 2)
        self.assertGreater(result.noise, 0.0)
        self.assertLess(abs(result.current - self.expected) / abs(self.expected), 1e-8)

    def test_order_validated(self):
        """Test that only the first two cumulants are available."""
        with self.assertRaises(ValueError):
            cumulant(jump_process, 3)

    def test_cgf_tracks_zero_mode(self):
        """Test that tracking returns the leading eigenvalue at a small field."""
        tracked = cgf(jump_process(0.01), 0.01, track=True, reference=self.steady.vector)
        plain = cgf(jump_process(0.01), 0.01, track=False)
        self.assertAlmostEqual(abs(tracked - plain), 0.0, places=14)


class TestFluctuationSymmetry(unittest.TestCase):
    """Tests for the exchange fluctuation symmetry of a thermodynamically consistent generator."""

    def setUp(self):
        """Set up the counted population Redfield generator of a biased device."""
        qubit = QubitSpec(epsilon=1.0, delta=1.0)
        self.t_l, self.t_r = 1.5, 0.5
        spec = SystemSpec(
            u=0.1,
            left=qubit,
            right=qubit,
            baths={L: BathSpec(0.05, 5.0, self.t_l), R: BathSpec(0.05, 5.0, self.t_r)},
        )
        self.gen = tilted_generator(spec, SolverConfig(scheme="redfield", redfield_form="population"), R)

    def test_exchange_symmetry(self):
        """Test G(chi) = G(-chi + i(1/T_R - 1/T_L))."""
        bias = 1.0 / self.t_r - 1.0 / self.t_l
        for chi in (0.05, 0.1, 0.2):
            forward = cgf(self.gen, chi, track=False)
            mirrored = cgf(self.gen, -chi + 1j * bias, track=False)
            self.assertLess(abs(forward - mirrored), 1e-10)

    def test_conjugate_symmetry(self):
        """Test G(-chi) = conj G(chi) for a real field."""
        for chi in (0.05, 0.1, 0.2):
            self.assertLess(abs(cgf(self.gen, -chi, track=False) - np.conj(cgf(self.gen, chi, track=False))), 1e-12)


class TestDynamics(unittest.TestCase):
    """Tests for propagate_dynamics."""

    def setUp(self):
        """Set up the jump process."""
        self.matrix = jump_process(0.0)

    def test_relaxes_to_steady_state(self):
        """Test that populations relax to the null vector with trace kept."""
        steady = steady_state(self.matrix)
        trajectory = propagate_dynamics(self.matrix, np.array([1.0, 0.0, 0.0, 0.0]), np.linspace(0.0, 60.0, 7))
        np.testing.assert_allclose(trajectory.traces(), 1.0, atol=1e-9)
        np.testing.assert_allclose(trajectory.states[-1].real, steady.populations, atol=1e-8)

    def test_density_matrix_input(self):
        """Test that 4 x 4 input needs a 16-dimensional generator."""
        with self.assertRaises(ValueError):
            propagate_dynamics(self.matrix, np.eye(4) / 4.0, [0.0, 1.0])


if __name__ == "__main__":
    unittest.main()
