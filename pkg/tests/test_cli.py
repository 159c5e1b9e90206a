"""
Tests for the command-line interface.
"""

import contextlib
import io
import json
import os
import sys
import tempfile
import unittest
from unittest import mock

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from main import COMMANDS, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, main
from src.errors import DegenerateSteadyStateError, QHeatError, ValidationFailure

RUN_FILE = {
    "system": {
        "u": 0.1,
        "left": {"epsilon": 1.0, "delta": 1.0},
        "right": {"epsilon": 1.0, "delta": 1.0},
        "baths": {
            "L": {"alpha": 0.05, "omega_c": 5.0, "temperature": 1.5},
            "R": {"alpha": 0.05, "omega_c": 5.0, "temperature": 0.5},
        },
    },
    "solver": {"scheme": "redfield", "redfield_form": "population", "threads": 2},
}


class TestCli(unittest.TestCase):
    """Tests for main() with the current and sweep commands."""

    def setUp(self):
        """Set up a temporary directory."""
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Remove the temporary directory."""
        self.tmp.cleanup()

    def _write(self, name, content):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(content if isinstance(content, str) else json.dumps(content, indent=2))
        return path

    def _main(self, *argv):
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = main(["-q", *argv], prog="qheat")
        return code, out.getvalue()

    def test_current(self):
        """Test the current command on a valid run file."""
        code, out = self._main("current", "-c", self._write("run.json", RUN_FILE))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("scheme: redfield", out)
        self.assertIn("I_L = ", out)
        self.assertIn("I_R = ", out)
        self.assertIn("energy_residual:", out)
        self.assertIn("redfield_verbatim: I_L=", out)

    def test_malformed_config(self):
        """Test that a malformed run file exits with the config code."""
        code, _ = self._main("current", "-c", self._write("bad.json", '{"system": {'))
        self.assertEqual(code, EXIT_CONFIG)

    def test_invalid_value(self):
        """Test that a negative coupling exits with the config code."""
        data = json.loads(json.dumps(RUN_FILE))
        data["system"]["baths"]["L"]["alpha"] = -0.1
        code, _ = self._main("current", "-c", self._write("neg.json", data))
        self.assertEqual(code, EXIT_CONFIG)

    def test_missing_file(self):
        """Test that a missing run file exits with the config code."""
        code, _ = self._main("current", "-c", os.path.join(self.tmp.name, "nope.json"))
        self.assertEqual(code, EXIT_CONFIG)

    def test_sweep(self):
        """Test that a sweep writes a CSV with provenance lines."""
        data = dict(RUN_FILE, sweep={"axis": "delta_t", "grid": [0.0, 0.4, 0.8, 1.2], "t0": 1.0})
        target = os.path.join(self.tmp.name, "out", "sweep.csv")
        code, out = self._main("sweep", "-c", self._write("sweep.json", data), "-o", target)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("sweep.csv", out)
        with open(target, encoding="utf-8") as f:
            lines = f.read().splitlines()
        self.assertTrue(lines[0].startswith("# qheat "))
        self.assertTrue(lines[1].startswith("# config_sha256: "))
        self.assertIn("# scheme: redfield", lines)
        header = lines[5].split(",")
        self.assertEqual(header[0], "delta_t")
        self.assertIn("has_ndtc", header)
        self.assertEqual(len(lines), 6 + 4)

    def test_sweep_without_output(self):
        """Test that a sweep needs somewhere to write."""
        data = dict(RUN_FILE, sweep={"axis": "delta_t", "grid": [0.0, 0.4], "t0": 1.0})
        code, _ = self._main("sweep", "-c", self._write("sweep.json", data))
        self.assertEqual(code, EXIT_CONFIG)

    def test_sweep_without_section(self):
        """Test that sweep refuses a run file without a sweep section."""
        code, _ = self._main("sweep", "-c", self._write("run.json", RUN_FILE), "-o", os.path.join(self.tmp.name, "x.csv"))
        self.assertEqual(code, EXIT_CONFIG)

    def test_error_exit_codes(self):
        """Test that main() returns the exit code each error carries."""

        class InterruptedSweep(QHeatError):
            exit_code = 5

        cases = [
            (DegenerateSteadyStateError("two zero modes"), EXIT_SOLVER),
            (ValidationFailure(["kms detailed balance"]), EXIT_VALIDATION),
            (InterruptedSweep("stopped"), 5),
        ]
        run_file = self._write("run.json", RUN_FILE)
        for error, expected in cases:

            def failing(args, error=error):
                raise error

            with mock.patch.dict(COMMANDS, {"current": failing}):
                code, _ = self._main("current", "-c", run_file)
            self.assertEqual(code, expected)

    def test_unknown_command(self):
        """Test that argparse rejects an unknown subcommand."""
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                main(["explode"])
        self.assertEqual(ctx.exception.code, 2)


if __name__ == "__main__":
    unittest.main()
