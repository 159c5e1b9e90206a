"""
Tests for result tables and their provenance header.
"""

import json
import os
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd

# Add the parent directory to the path so we can import the src modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src import __version__
from src.results import Provenance, ResultTable, strip_timestamp


class TestResultTable(unittest.TestCase):
    """Tests for writing and reading ResultTable."""

    def setUp(self):
        """Set up a small table with one failed row."""
        self.tmp = tempfile.TemporaryDirectory()
        self.frame = pd.DataFrame(
            {
                "delta_t": [0.0, 0.5, 1.0],
                "current": [0.0, 0.0125, np.nan],
                "scheme": ["niba", "niba", "niba"],
                "status": ["ok", "ok", "failed"],
                "error": ["", "", "temperature must be > 0"],
            }
        )
        self.provenance = Provenance(
            config_hash="ab" * 32,
            scheme="niba",
            tolerances={"chi_step": 1e-4, "rel_tol": 1e-10},
            created="2024-01-01T00:00:00+00:00",
        )
        self.table = ResultTable(self.frame, self.provenance)

    def tearDown(self):
        """Remove the output directory."""
        self.tmp.cleanup()

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_csv_header(self):
        """Test provenance lines and column order in a CSV file."""
        path = self.table.to_csv(self._path("sweep.csv"))
        lines = path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], f"# qheat {__version__}")
        self.assertEqual(lines[1], "# config_sha256: " + "ab" * 32)
        self.assertTrue(lines[4].startswith("# created:"))
        self.assertEqual(lines[5], "delta_t,current,scheme,status,error")
        self.assertEqual(lines[8], "1,,niba,failed,temperature must be > 0")

    def test_csv_read_back(self):
        """Test that a written CSV reads back with its provenance."""
        path = self.table.to_csv(self._path("sweep.csv"))
        table = ResultTable.read_csv(path)
        self.assertEqual(table.columns, list(self.frame.columns))
        self.assertTrue(np.isnan(table.frame["current"].iloc[2]))
        self.assertAlmostEqual(table.frame["current"].iloc[1], 0.0125)
        self.assertEqual(table.provenance, self.provenance)
        self.assertEqual(table.failed_rows(), 1)

    def test_jsonl_null(self):
        """Test that NaN becomes null in JSON lines."""
        path = self.table.to_jsonl(self._path("sweep.jsonl"))
        records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
        self.assertEqual(len(records), 3)
        self.assertIsNone(records[2]["current"])
        self.assertEqual(list(records[0]), list(self.frame.columns))
        table = ResultTable.read_jsonl(path)
        self.assertEqual(table.provenance.scheme, "niba")

    def test_write_both(self):
        """Test writing both formats with the suffix replaced."""
        written = self.table.write(self._path("out.txt"), "both")
        self.assertEqual([p.suffix for p in written], [".csv", ".jsonl"])
        with self.assertRaises(ValueError):
            self.table.write(self._path("out"), "xml")

    def test_deterministic(self):
        """Test that equal tables give equal files apart from the timestamp."""
        first = ResultTable(self.frame, Provenance("ab" * 32, "niba")).to_csv(self._path("a.csv"))
        second = ResultTable(self.frame.copy(), Provenance("ab" * 32, "niba")).to_csv(self._path("b.csv"))
        self.assertEqual(
            strip_timestamp(first.read_text(encoding="utf-8")),
            strip_timestamp(second.read_text(encoding="utf-8")),
        )

    def test_required_columns(self):
        """Test that scheme and status columns are required."""
        with self.assertRaises(ValueError):
            ResultTable(self.frame.drop(columns=["status"]), self.provenance)

    def test_all_failed(self):
        """Test the all-failed check."""
        self.assertFalse(self.table.all_failed())
        failed = self.frame.assign(status="failed")
        self.assertTrue(ResultTable(failed, self.provenance).all_failed())


class TestStripTimestamp(unittest.TestCase):
    """Tests for strip_timestamp."""

    def test_only_created_removed(self):
        """Test that only the created line goes."""
        text = "# qheat 1.0.0\n# created: now\na,b\n1,2\n"
        self.assertEqual(strip_timestamp(text), "# qheat 1.0.0\na,b\n1,2\n")


if __name__ == "__main__":
    unittest.main()
