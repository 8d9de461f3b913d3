"""Unit tests for report.py module."""

import csv
import io
import os
import tempfile
import unittest

import numpy as np

from hubforge.branch_and_cut import MIPStatus
from hubforge.formulations import FormulationKind
from hubforge.instance import InstanceFormatError
from hubforge.report import (
    COMPARE_FIELDS, RUN_FIELDS, RunRecord, bound_rows, compare_instances, exit_code,
    load_instance, records_csv, run_solve, with_surrogate_setup)
from tests.test_utils import TOY4_TEXT, cab_text, toy4


class TestLoadInstance(unittest.TestCase):
    """Test cases for load_instance."""

    def setUp(self):
        """Write toy4 and a small CAB-style dataset to temporary files."""
        # pylint: disable=consider-using-with
        self.temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.temp_dir.cleanup)
        self.toy_path = os.path.join(self.temp_dir.name, "toy4.hli")
        with open(self.toy_path, 'w', encoding='utf-8') as f:
            f.write(TOY4_TEXT)
        flows = np.array([[0, 2, 1], [3, 0, 1], [1, 1, 0]])
        cost = np.array([[0, 4, 3], [4, 0, 5], [3, 5, 0]])
        self.cab_path = os.path.join(self.temp_dir.name, "cab.txt")
        with open(self.cab_path, 'w', encoding='utf-8') as f:
            f.write(cab_text(flows, cost))

    def test_hli(self):
        """Test that the file stem names the instance."""
        instance = load_instance(self.toy_path)
        self.assertEqual(instance.name, "toy4")
        self.assertEqual(instance.n, 4)
        np.testing.assert_array_equal(instance.setup, [10, 1, 1, 10])

    def test_overrides(self):
        """Test alpha and setup factor overrides."""
        instance = load_instance(self.toy_path, alpha=0.2, setup_factor=2.0)
        self.assertEqual(instance.alpha, 0.2)
        np.testing.assert_array_equal(instance.setup, [20, 2, 2, 20])

    def test_setup_file(self):
        """Test replacing setup costs from a file."""
        setup_path = os.path.join(self.temp_dir.name, "setup.txt")
        with open(setup_path, 'w', encoding='utf-8') as f:
            f.write("5 6 7 8 9\n")
        instance = load_instance(self.toy_path, setup_file=setup_path)
        np.testing.assert_array_equal(instance.setup, [5, 6, 7, 8])

    def test_invalid_override(self):
        """Test that an override breaking validation raises."""
        with self.assertRaisesRegex(ValueError, "gamma must exceed alpha"):
            load_instance(self.toy_path, alpha=1.0)

    def test_node_count_mismatch(self):
        """Test that --n must match an HLI file."""
        with self.assertRaises(ValueError):
            load_instance(self.toy_path, n=3)

    def test_cab_prefix(self):
        """Test a CAB-style prefix with surrogate setup costs."""
        instance = load_instance(self.cab_path, "cab", n=2, setup_mean=10.0)
        self.assertEqual(instance.name, "cab2")
        self.assertEqual(instance.m, 2)
        self.assertAlmostEqual(float(instance.setup.mean()), 10.0)

    def test_cab_needs_n(self):
        """Test that raw datasets need a node count."""
        with self.assertRaises(ValueError):
            load_instance(self.cab_path, "cab")

    def test_cab_junk(self):
        """Test that malformed raw data raises the format error."""
        with open(self.cab_path, 'w', encoding='utf-8') as f:
            f.write("3 a b\n")
        with self.assertRaises(InstanceFormatError):
            load_instance(self.cab_path, "cab", n=2)

    def test_unknown_format(self):
        """Test that unknown formats are rejected."""
        with self.assertRaises(ValueError):
            load_instance(self.toy_path, "xml")

    def test_surrogate_mean(self):
        """Test the default surrogate setup level."""
        instance = with_surrogate_setup(toy4())
        # direct cost 3 + 1 spread over four nodes, halved
        self.assertAlmostEqual(float(instance.setup.mean()), 0.5)


class TestRunRecords(unittest.TestCase):
    """Test cases for run_solve and the run CSV."""

    def test_solve_fzp(self):
        """Test a full solve with routing."""
        run = run_solve(toy4(), FormulationKind.FZ_P)
        self.assertEqual(run.record.status, "Optimal")
        self.assertAlmostEqual(run.record.ub, 5.0, places=6)
        self.assertEqual(run.record.hubs, [2, 3])
        self.assertAlmostEqual(run.routing.total_cost, 3.0)
        rows = list(csv.DictReader(io.StringIO(run.routing_csv())))
        self.assertEqual([row['r'] for row in rows], ['1', '2'])

    def test_solve_master(self):
        """Test the supermodular master record."""
        run = run_solve(toy4(), FormulationKind.FZ_S, seed_cuts=True)
        self.assertEqual(run.record.formulation, "FZ_S")
        self.assertAlmostEqual(run.record.ub, 5.0, places=6)
        self.assertAlmostEqual(run.record.lb, 5.0, delta=1e-5)
        self.assertIn(run.record.hubs, ([2], [3], [2, 3]))
        self.assertIsNotNone(run.routing)

    def test_csv(self):
        """Test the run CSV columns and formatting."""
        record = RunRecord("toy4", 4, 0.5, "FZ_S", "Optimal", 5.0, 5.0, 4.25, 0.1234, 3, 7,
                           [2, 3])
        rows = list(csv.DictReader(io.StringIO(records_csv([record]))))
        self.assertEqual(list(rows[0]), RUN_FIELDS)
        self.assertEqual(rows[0]['hubs'], "[2, 3]")
        self.assertEqual(rows[0]['cpu'], "0.123")
        self.assertEqual(rows[0]['lb_root'], "4.25")

    def test_text_block(self):
        """Test the structured summary."""
        record = RunRecord("toy4", 4, 0.5, "FZ_S", "Feasible", 6.0, 5.0, 4.0, 1.0, 3, 7, [2])
        text = record.text_block()
        self.assertIn("status:      Feasible", text)
        self.assertIn("gap 16.6667%", text)
        self.assertIn("hubs:        [2]", text)

    def test_exit_codes(self):
        """Test the exit code contract."""
        self.assertEqual(exit_code(MIPStatus.OPTIMAL), 0)
        self.assertEqual(exit_code(MIPStatus.FEASIBLE), 2)
        self.assertEqual(exit_code(MIPStatus.INFEASIBLE), 1)


class TestBoundsAndCompare(unittest.TestCase):
    """Test cases for bound and compare rows."""

    def test_bound_rows(self):
        """Test path formulation bounds on toy4."""
        rows = bound_rows(toy4(), [FormulationKind.FZ_P, FormulationKind.SK])
        self.assertEqual([row['formulation'] for row in rows], ["FZ_P", "SK"])
        self.assertAlmostEqual(float(rows[0]['bound']), 5.0, places=6)
        self.assertEqual(rows[0]['cuts'], '0')

    def test_compare_rows(self):
        """Test the comparison row of toy4."""
        rows = compare_instances([toy4()])
        self.assertEqual(list(rows[0]), COMPARE_FIELDS)
        self.assertEqual(rows[0]['fzp_eq_hlpma'], 'ok')
        self.assertEqual(rows[0]['sk_le_hlpma'], 'ok')
        self.assertAlmostEqual(float(rows[0]['hlpma']), 5.0, places=6)
        float(rows[0]['improvement'])


if __name__ == '__main__':
    unittest.main()
