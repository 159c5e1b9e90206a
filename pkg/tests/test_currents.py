"""
Tests for the closed-form heat currents.
"""

import os
import sys
import unittest

import numpy as np

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.baths import BathSpec
from src.config import SolverConfig
from src.currents import (
    analytic_current,
    analytic_niba_populations,
    niba_loop_currents,
    niba_normalization,
    niba_right_components,
    niba_side_current,
    redfield_current_net,
    redfield_current_verbatim,
    redfield_transition_currents,
)
from src.errors import AsymmetricSplittingError, SchemeMismatchError
from src.fcs import steady_state
from src.generators import population_rate_matrix, tilted_generator
from src.model import L, R, QubitSpec, SystemSpec, build_lab_frame, local_basis_energies
from src.rates import NibaRateTable, RateEngine, build_niba_rate_table


def device(alpha, eps_l=1.0, eps_r=1.0, t_l=1.5, t_r=0.5, u=0.1):
    return SystemSpec(
        u=u,
        left=QubitSpec(epsilon=eps_l, delta=1.0),
        right=QubitSpec(epsilon=eps_r, delta=1.0),
        baths={L: BathSpec(alpha, 5.0, t_l), R: BathSpec(alpha, 5.0, t_r)},
    )


class TestNibaCurrents(unittest.TestCase):
    """Tests for the NIBA closed forms."""

    def setUp(self):
        """Set up a strongly coupled device and its rates."""
        self.engine = RateEngine()
        self.spec = device(2.0)
        self.table = build_niba_rate_table(self.spec, engine=self.engine)
        self.gen = tilted_generator(self.spec, SolverConfig(scheme="niba"), R, self.engine)
        self.steady = steady_state(self.gen)

    def test_populations_match_null_space(self):
        """Test the closed-form populations against the kinetic null vector."""
        analytic = analytic_niba_populations(self.table)
        np.testing.assert_allclose(analytic, self.steady.populations, atol=1e-10)
        self.assertAlmostEqual(float(np.sum(analytic)), 1.0, places=14)

    def test_populations_for_arbitrary_rates(self):
        """Test P_i = N_i / A on rates that obey no detailed balance."""
        kappa = {
            (1, 3, L): 0.3, (3, 1, L): 1.7, (2, 4, L): 0.9, (4, 2, L): 0.25,
            (1, 2, R): 2.2, (2, 1, R): 0.6, (3, 4, R): 1.1, (4, 3, R): 0.45,
        }
        table = NibaRateTable(kappa, local_basis_energies(0.1, 1.0, 1.0), {}, {})
        numeric = steady_state(population_rate_matrix(table)).populations
        np.testing.assert_allclose(analytic_niba_populations(table), numeric, atol=1e-12)
        self.assertAlmostEqual(float(np.sum(analytic_niba_populations(table))), 1.0, places=13)
        self.assertGreater(niba_normalization(table), 0.0)

    def test_loop_currents_sum(self):
        """Test that the loop difference is the current into the right bath."""
        forward, backward, total = niba_loop_currents(self.table)
        current = niba_side_current(self.table, self.steady.populations, R)
        self.assertAlmostEqual(total, forward - backward)
        self.assertLess(abs(total - current) / abs(current), 1e-10)

    def test_energy_balance(self):
        """Test I_L + I_R = 0 in the steady state."""
        i_l = niba_side_current(self.table, self.steady.populations, L)
        i_r = niba_side_current(self.table, self.steady.populations, R)
        self.assertLess(abs(i_l + i_r), 1e-10 * abs(i_r))
        self.assertGreater(i_r, 0.0)

    def test_right_components(self):
        """Test that I_R is the upper minus the lower transition term."""
        upper, lower = niba_right_components(self.table, self.steady.populations)
        current = niba_side_current(self.table, self.steady.populations, R)
        self.assertAlmostEqual(upper - lower, current, places=12)

    def test_asymmetric_splitting(self):
        """Test that the closed forms refuse eps_L != eps_R."""
        table = build_niba_rate_table(device(2.0, eps_r=0.6), engine=self.engine)
        with self.assertRaises(AsymmetricSplittingError):
            analytic_niba_populations(table)
        with self.assertRaises(AsymmetricSplittingError):
            niba_loop_currents(table)

    def test_no_interaction_no_current(self):
        """Test that U = 0 decouples the qubits."""
        table = build_niba_rate_table(device(2.0, u=0.0), engine=self.engine)
        populations = analytic_niba_populations(table)
        self.assertLess(abs(niba_side_current(table, populations, R)), 1e-10)

    def test_analytic_current_dispatch(self):
        """Test analytic_current on the NIBA scheme."""
        current = analytic_current(self.gen, self.steady)
        self.assertAlmostEqual(current, niba_side_current(self.table, self.steady.populations, R), places=14)


class TestRedfieldCurrents(unittest.TestCase):
    """Tests for the weak-coupling closed forms."""

    def setUp(self):
        """Set up a weakly coupled device with its population steady state."""
        self.spec = device(0.01)
        self.frame = build_lab_frame(self.spec)
        self.gen = tilted_generator(self.spec, SolverConfig(scheme="redfield", redfield_form="population"), R)
        self.steady = steady_state(self.gen)

    def test_verbatim_equals_net(self):
        """Test that the two forms of the Redfield current agree."""
        verbatim = redfield_current_verbatim(self.spec, self.frame, self.steady.populations)
        net = redfield_current_net(self.spec, self.frame, self.steady.populations)
        self.assertLess(abs(verbatim - net) / abs(net), 1e-10)

    def test_transition_currents_sum(self):
        """Test that the pairwise currents add up to the total."""
        currents = redfield_transition_currents(self.spec, self.frame, self.steady.populations)
        total = redfield_current_verbatim(self.spec, self.frame, self.steady.populations)
        self.assertEqual(len(currents), 6)
        self.assertLess(abs(sum(currents.values()) - total) / abs(total), 1e-10)

    def test_mismatched_steady_state(self):
        """Test that a density-matrix generator refuses a population steady state."""
        full = tilted_generator(self.spec, SolverConfig(scheme="redfield"), R)
        with self.assertRaises(SchemeMismatchError):
            analytic_current(full, self.steady)

    def test_heat_flows_downhill(self):
        """Test that heat enters the colder right bath."""
        self.assertGreater(analytic_current(self.gen, self.steady), 0.0)


if __name__ == "__main__":
    unittest.main()
