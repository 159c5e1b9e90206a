"""
Tests for the counting-field tilted generators.
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.baths import BathKernel, BathSpec
from src.config import SolverConfig
from src.generators import (
    Scheme,
    coherent_superoperator,
    counting_shifts,
    lamb_free,
    partner_indices,
    tilted_generator,
    unvec,
    vec,
)
from src.model import L, L_C, L_H, R, QubitSpec, SystemSpec, Topology
from src.rates import RateEngine


def device(alpha=0.05, epsilon=1.0):
    qubit = QubitSpec(epsilon=epsilon, delta=1.0)
    return SystemSpec(u=0.1, left=qubit, right=qubit, baths={L: BathSpec(alpha, 5.0, 1.5), R: BathSpec(alpha, 5.0, 0.5)})


def three_terminal(alpha=0.05):
    qubit = QubitSpec(epsilon=1.0, delta=1.0)
    return SystemSpec(
        u=0.1,
        left=qubit,
        right=qubit,
        topology=Topology.THREE_TERMINAL,
        baths={L_H: BathSpec(alpha, 5.0, 2.0), L_C: BathSpec(alpha, 5.0, 0.2), R: BathSpec(alpha, 5.0, 0.5)},
    )


class TestVectorisation(unittest.TestCase):
    """Tests for the column-stacking helpers."""

    def setUp(self):
        """Set up random matrices."""
        rng = np.random.default_rng(7)
        self.x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        self.y = rng.normal(size=(4, 4))
        self.rho = rng.normal(size=(4, 4))

    def test_kron_identity(self):
        """Test vec(X rho Y) = kron(Y^T, X) vec(rho)."""
        np.testing.assert_allclose(np.kron(self.y.T, self.x) @ vec(self.rho), vec(self.x @ self.rho @ self.y), atol=1e-12)

    def test_unvec(self):
        """Test that unvec inverts vec."""
        np.testing.assert_array_equal(unvec(vec(self.rho)), self.rho)

    def test_coherent_superoperator(self):
        """Test that -i[H, .] acts as the commutator."""
        h = self.y + self.y.T
        expected = -1j * (h @ self.rho - self.rho @ h)
        np.testing.assert_allclose(coherent_superoperator(h) @ vec(self.rho), vec(expected), atol=1e-12)


class TestRateHelpers(unittest.TestCase):
    """Tests for the rate bookkeeping helpers."""

    def test_partner_indices(self):
        """Test the index of -w for a symmetric list."""
        self.assertEqual(partner_indices([-1.0, 0.0, 1.0]), [2, 1, 0])

    def test_lamb_free_uncounted(self):
        """Test that the Lamb-free rates are the real parts when uncounted."""
        forward = np.array([1.0 + 0.3j, 2.0 - 0.1j])
        backward = np.array([2.0 + 0.1j, 1.0 - 0.3j])
        plus, minus = lamb_free(forward, backward, [1, 0])
        np.testing.assert_allclose(plus, forward.real)
        np.testing.assert_allclose(minus, backward.real)

    def test_counting_shifts(self):
        """Test which baths a counting field shifts."""
        hot, cold = BathSpec(1.0, 5.0, 2.0), BathSpec(1.0, 5.0, 0.2)
        composite = BathKernel.composite(hot, cold)
        single = BathKernel.single(hot)
        self.assertEqual(counting_shifts(composite, L, L_H, 0.1), (0.1, 0.0))
        self.assertEqual(counting_shifts(composite, L, L_C, 0.1), (0.0, 0.1))
        self.assertEqual(counting_shifts(single, R, R, 0.1), (0.1,))
        self.assertEqual(counting_shifts(single, R, L, 0.1), (0.0,))
        self.assertEqual(counting_shifts(single, R, R, 0.0), (0.0,))


class TestTiltedGenerator(unittest.TestCase):
    """Tests for tilted_generator across schemes."""

    def setUp(self):
        """Set up a private rate engine and a device."""
        self.engine = RateEngine()
        self.spec = device()

    def _generator(self, scheme, form="full", spec=None, terminal=R):
        config = SolverConfig(scheme=scheme, redfield_form=form)
        return tilted_generator(spec or self.spec, config, terminal, self.engine)

    def test_dimensions(self):
        """Test density and population generator sizes."""
        self.assertEqual(self._generator("redfield").dim, 16)
        self.assertEqual(self._generator("redfield", "population").dim, 4)
        self.assertEqual(self._generator("niba").dim, 4)
        self.assertEqual(self._generator("neptre").scheme, Scheme.NEPTRE)

    def test_trace_preservation(self):
        """Test 1^T L(0) = 0 for every scheme."""
        for scheme, form in (("neptre", "full"), ("redfield", "full"), ("redfield", "population"), ("niba", "full")):
            gen = self._generator(scheme, form)
            residual = np.max(np.abs(gen.trace_vector() @ gen(0.0)))
            self.assertLess(residual, 1e-10, f"{scheme}/{form}")

    def test_counting_keeps_losses(self):
        """Test that the counting field leaves the diagonal of a population generator alone."""
        gen = self._generator("redfield", "population")
        np.testing.assert_allclose(np.diag(gen(0.3)), np.diag(gen(0.0)), atol=1e-15)
        self.assertGreater(np.max(np.abs(gen(0.3) - gen(0.0))), 0.0)

    def test_three_terminal_trace(self):
        """Test trace preservation on a three-terminal device."""
        spec = three_terminal()
        for scheme, form in (("redfield", "population"), ("redfield", "full")):
            gen = self._generator(scheme, form, spec, L_H)
            self.assertLess(np.max(np.abs(gen.trace_vector() @ gen(0.0))), 1e-10)

    def test_unknown_terminal(self):
        """Test that counting a terminal the device lacks is rejected."""
        with self.assertRaises(ValueError):
            self._generator("redfield", terminal=L_H)

    def test_zero_field_cached(self):
        """Test that L(0) is built once."""
        gen = self._generator("redfield")
        self.assertIs(gen(0.0), gen(0.0))


if __name__ == "__main__":
    unittest.main()
