"""
Tests for the bundled figure presets.
"""

import json
import os
import shutil
import sys
import tempfile
import unittest

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.errors import ConfigError
from src.presets import FIGURES, PRESET_DIR, PresetLoader
from src.transport import SweepAxis


class TestPresetLoader(unittest.TestCase):
    """Tests for PresetLoader."""

    def setUp(self):
        """Set up a loader on the bundled presets."""
        self.loader = PresetLoader()

    def test_all_presets_load(self):
        """Test that every figure has a valid preset."""
        self.assertEqual(self.loader.available(), list(FIGURES))
        presets = self.loader.load_all()
        for figure, preset in presets.items():
            self.assertEqual(preset.figure, figure)
            self.assertTrue(preset.description, figure)

    def test_fig3_sweep(self):
        """Test the temperature-bias sweep of the NDTC figure."""
        run = self.loader.run_config("fig3")
        sweep = run.to_sweep_spec()
        self.assertIs(sweep.axis, SweepAxis.DELTA_T)
        self.assertEqual(len(sweep.grid), 20)
        self.assertEqual(sweep.grid[-1], 3.8)
        self.assertEqual(sweep.mean_temperature, 2.0)

    def test_kinds(self):
        """Test a few preset kinds and schemes."""
        self.assertEqual(self.loader.load("fig4").kind, "loops")
        self.assertEqual(self.loader.load("fig4").solver.scheme, "niba")
        self.assertEqual(self.loader.load("figC1").system.topology, "three_terminal")

    def test_amplification_cases_cover_neptre(self):
        """Test that both amplification figures draw an NE-PTRE curve."""
        for figure in ("fig6", "fig7"):
            schemes = {case["scheme"] for case in self.loader.load(figure).parameters["cases"]}
            self.assertIn("neptre", schemes, figure)
        fig6 = {case["name"]: case for case in self.loader.load("fig6").parameters["cases"]}
        self.assertEqual(fig6["alpha_0.05_neptre"]["alpha_l"], fig6["alpha_0.05"]["alpha_l"])
        self.assertEqual(fig6["alpha_5_neptre"]["alpha_r"], fig6["alpha_5"]["alpha_r"])

    def test_unknown_figure(self):
        """Test that an unknown figure id is a config error."""
        with self.assertRaises(ConfigError) as ctx:
            self.loader.load("fig99")
        self.assertIn("fig3", str(ctx.exception))

    def test_cached(self):
        """Test that a preset is parsed once."""
        self.assertIs(self.loader.load("fig2"), self.loader.load("fig2"))

    def test_hash_stable(self):
        """Test that the preset hash is deterministic."""
        self.assertEqual(self.loader.load("fig3").config_hash(), PresetLoader().load("fig3").config_hash())


class TestCustomPresetDir(unittest.TestCase):
    """Tests for presets outside the bundled directory."""

    def setUp(self):
        """Set up a directory with a copy of one preset."""
        self.tmp = tempfile.mkdtemp()
        shutil.copy(PRESET_DIR / "fig3.json", os.path.join(self.tmp, "fig3.json"))

    def tearDown(self):
        """Remove the directory."""
        shutil.rmtree(self.tmp)

    def test_mismatched_figure_field(self):
        """Test that the figure field must match the file name."""
        shutil.copy(PRESET_DIR / "fig3.json", os.path.join(self.tmp, "mine.json"))
        with self.assertRaises(ConfigError) as ctx:
            PresetLoader(self.tmp).load("mine")
        self.assertEqual(ctx.exception.key, "figure")

    def test_invalid_value(self):
        """Test that an invalid preset value is a config error."""
        with open(os.path.join(self.tmp, "fig3.json"), encoding="utf-8") as f:
            data = json.load(f)
        data["system"]["baths"]["R"]["alpha"] = -1.0
        with open(os.path.join(self.tmp, "fig3.json"), "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2)
        with self.assertRaises(ConfigError) as ctx:
            PresetLoader(self.tmp).load("fig3")
        self.assertEqual(ctx.exception.key, "system.baths.R.alpha")

    def test_available(self):
        """Test the list of figures in a directory."""
        self.assertEqual(PresetLoader(self.tmp).available(), ["fig3"])


if __name__ == "__main__":
    unittest.main()
