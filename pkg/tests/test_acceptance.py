"""
Long-running acceptance checks.

These run the property suite on the full grid and every figure preset, and
take minutes to hours. They are skipped unless QHEAT_ACCEPTANCE=1.
"""

import contextlib
import io
import os
import sys
import tempfile
import unittest

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from main import EXIT_OK, EXIT_VALIDATION, main
from src.presets import FIGURES
from src.rates import RateEngine
from src.reproduce import FigureReproducer
from src.results import strip_timestamp
from src.validation import PropertySuite

ACCEPTANCE = os.environ.get("QHEAT_ACCEPTANCE") == "1"


@unittest.skipUnless(ACCEPTANCE, "set QHEAT_ACCEPTANCE=1 to run acceptance checks")
class TestPropertySuiteFull(unittest.TestCase):
    """The whole property suite."""

    def setUp(self):
        """Set up a shared rate cache."""
        self.rates = RateEngine()

    def test_full_grid(self):
        """Test every invariant on the full grid."""
        report = PropertySuite("full", rate_engine=self.rates).run()
        self.assertTrue(report.passed, report.render())

    def test_validate_command_with_fault(self):
        """Test that the validate command exits 4 with an injected fault."""
        with contextlib.redirect_stdout(io.StringIO()):
            code = main(["-q", "validate", "--inject-fault", "rate-sign"])
        self.assertEqual(code, EXIT_VALIDATION)


@unittest.skipUnless(ACCEPTANCE, "set QHEAT_ACCEPTANCE=1 to run acceptance checks")
class TestFigures(unittest.TestCase):
    """Every figure preset at desk scale."""

    def setUp(self):
        """Set up an output directory and a reproducer."""
        self.tmp = tempfile.TemporaryDirectory()
        self.reproducer = FigureReproducer(self.tmp.name, rate_engine=RateEngine())

    def tearDown(self):
        """Remove the output directory."""
        self.tmp.cleanup()

    def test_figures(self):
        """Test the acceptance property of each figure."""
        for figure in FIGURES:
            with self.subTest(figure=figure):
                report = self.reproducer.run(figure)
                self.assertTrue(report.passed, "\n".join(report.summary_lines()))


@unittest.skipUnless(ACCEPTANCE, "set QHEAT_ACCEPTANCE=1 to run acceptance checks")
class TestDeterminism(unittest.TestCase):
    """Repeated runs give identical files."""

    def setUp(self):
        """Set up an output directory."""
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Remove the output directory."""
        self.tmp.cleanup()

    def _sweep(self, name, threads):
        path = os.path.join(self.tmp.name, name)
        os.environ["QHEAT_THREADS"] = str(threads)
        try:
            with contextlib.redirect_stdout(io.StringIO()):
                code = main(["-q", "sweep", "--preset", "fig3", "-o", path])
        finally:
            os.environ.pop("QHEAT_THREADS", None)
        self.assertEqual(code, EXIT_OK)
        with open(path, encoding="utf-8") as f:
            return strip_timestamp(f.read())

    def test_sweep_repeatable(self):
        """Test that thread count does not change a sweep's output."""
        self.assertEqual(self._sweep("serial.csv", 1), self._sweep("parallel.csv", 4))


if __name__ == "__main__":
    unittest.main()
