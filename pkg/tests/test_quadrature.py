"""
Tests for the panel quadrature of half-Fourier transforms.
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.baths import BathKernel, BathSpec
from src.errors import NonDecayingKernelError
from src.quadrature import PanelGrid, reference_frequency, tail_transform


class TestPanelGrid(unittest.TestCase):
    """Tests for PanelGrid."""

    def setUp(self):
        """Set up a uniform grid on [0, 60]."""
        self.grid = PanelGrid.from_breakpoints(np.linspace(0.0, 60.0, 121), 16)

    def test_weights_sum_to_length(self):
        """Test that the weights integrate a constant exactly."""
        self.assertAlmostEqual(float(np.sum(self.grid.weights)), 60.0, places=10)
        self.assertEqual(self.grid.panel_count, 120)
        self.assertEqual(self.grid.horizon, 60.0)

    def test_exponential_transform(self):
        """Test int_0^inf exp(-t) exp(iwt) dt = 1/(1 - iw)."""
        omegas = [-2.0, 0.0, 0.5, 3.0]
        values = self.grid.half_fourier(lambda t: np.exp(-t), omegas)
        expected = 1.0 / (1.0 - 1j * np.array(omegas))
        np.testing.assert_allclose(values, expected, atol=1e-10)

    def test_non_decaying_kernel(self):
        """Test that a kernel that does not decay is rejected."""
        with self.assertRaises(NonDecayingKernelError):
            self.grid.half_fourier(lambda t: np.ones_like(t), [1.0])

    def test_tail_continuation(self):
        """Test that the 1/t^2 tail is integrated beyond the horizon."""
        grid = PanelGrid.from_breakpoints(np.linspace(1.0, 41.0, 161), 16)
        # int_1^inf t^-2 dt = 1 split at the horizon 41
        value = grid.half_fourier(lambda t: 1.0 / np.maximum(t, 1.0) ** 2, [0.0])[0]
        self.assertAlmostEqual(value.real, 1.0, places=9)

    def test_for_kernel_panels_grow(self):
        """Test that kernel grids start fine and stop at the horizon."""
        kernel = BathKernel.single(BathSpec(1.0, 5.0, 1.0))
        grid = PanelGrid.for_kernel(kernel, 2.0)
        widths = np.diff(grid.breakpoints)
        self.assertLess(widths[0], widths[len(widths) // 2])
        self.assertAlmostEqual(grid.horizon, kernel.quadrature.horizon_factor * kernel.beta)

    def test_kernel_grid_exponential_transform(self):
        """Test that a kernel-matched grid transforms exp(-t) to 1/(1 - iw)."""
        grid = PanelGrid.for_kernel(BathKernel.single(BathSpec(1.0, 5.0, 1.0)), 4.0)
        omegas = [-3.0, 0.0, 1.0, 4.0]
        values = grid.half_fourier(lambda t: np.exp(-t), omegas)
        expected = 1.0 / (1.0 - 1j * np.array(omegas))
        np.testing.assert_allclose(values, expected, atol=1e-10)


class TestHelpers(unittest.TestCase):
    """Tests for the quadrature helpers."""

    def test_reference_frequency(self):
        """Test the power-of-two bucketing of frequencies."""
        self.assertEqual(reference_frequency([0.3]), 1.0)
        self.assertEqual(reference_frequency([-3.0, 1.0]), 4.0)
        self.assertEqual(reference_frequency([4.0]), 4.0)

    def test_tail_at_zero_frequency(self):
        """Test int_a^inf t^-2 dt = 1/a."""
        self.assertAlmostEqual(tail_transform(np.array([0.0]), 4.0)[0].real, 0.25)

    def test_tail_conjugate_symmetry(self):
        """Test that negative frequencies give the complex conjugate."""
        values = tail_transform(np.array([1.5, -1.5]), 2.0)
        self.assertAlmostEqual(values[0], np.conj(values[1]), places=14)


if __name__ == "__main__":
    unittest.main()
