"""Unit tests for linear_model.py module."""

import math
import os
import tempfile
import unittest

import numpy as np

from hubforge.linear_model import (
    Model, ModelError, Sense, VarRef, export_mps, relax)

try:
    import pulp
except ImportError:  # pragma: no cover - optional dev dependency
    pulp = None


def _cbc_available():
    if pulp is None:
        return False
    try:
        return bool(pulp.PULP_CBC_CMD(msg=False).available())
    except Exception:  # pylint: disable=broad-except
        return False


def solve_mps_externally(text):
    """Solve MPS text with CBC through pulp and return the objective."""
    with tempfile.NamedTemporaryFile('w', suffix='.mps', delete=False,
                                     encoding='utf-8') as handle:
        handle.write(text)
    try:
        _variables, problem = pulp.LpProblem.fromMPS(handle.name, sense=pulp.LpMinimize)
        problem.solve(pulp.PULP_CBC_CMD(msg=False))
        return pulp.LpStatus[problem.status], pulp.value(problem.objective)
    finally:
        os.remove(handle.name)


class TestModelBuilding(unittest.TestCase):
    """Test cases for add_var and add_constraint."""

    def setUp(self):
        """Create an empty model."""
        self.model = Model("unit")

    def test_first_binary(self):
        """Test that the first variable gets id 0."""
        z = self.model.add_var("z_1", 0, 1, integral=True, obj=10)
        self.assertEqual(z.id, 0)
        self.assertTrue(z.integral)
        self.assertEqual(self.model.objective, [10.0])

    def test_duplicate_name(self):
        """Test that names are unique."""
        self.model.add_var("z_1", 0, 1, integral=True)
        with self.assertRaises(ModelError):
            self.model.add_var("z_1", 0, 1)

    def test_continuous_var(self):
        """Test an unbounded-above continuous variable."""
        eta = self.model.add_var("eta_1", 0, math.inf, obj=1)
        self.assertFalse(eta.integral)
        self.assertEqual(eta.upper, math.inf)

    def test_inverted_bounds(self):
        """Test that lower > upper is rejected."""
        with self.assertRaises(ModelError):
            self.model.add_var("x", 2, 1)
        x = self.model.add_var("x", 0, 1)
        with self.assertRaises(ModelError):
            self.model.set_bounds(x, 1, 0)

    def test_merge_terms(self):
        """Test that x + x <= 1 is stored as 2x <= 1."""
        x = self.model.add_var("x", 0, 1)
        k = self.model.add_constraint([(x, 1.0), (x, 1.0)], Sense.LE, 1)
        self.assertEqual(self.model.constraints[k].terms, ((0, 2.0),))

    def test_empty_row(self):
        """Test that an empty equality row is accepted."""
        k = self.model.add_constraint([], Sense.EQ, 0.0)
        self.assertEqual(self.model.constraints[k].terms, ())
        self.assertEqual(self.model.max_violation([]), 0.0)

    def test_unregistered_var(self):
        """Test that foreign variables are rejected."""
        with self.assertRaises(ModelError):
            self.model.add_constraint([(VarRef(0, "ghost"), 1.0)], Sense.LE, 1)
        self.model.add_var("x", 0, 1)
        with self.assertRaises(ModelError):
            self.model.add_constraint([(VarRef(0, "other"), 1.0)], Sense.LE, 1)

    def test_canonical_order_and_zero_drop(self):
        """Test sorting by id, dropping tiny coefficients and re-adding."""
        a = self.model.add_var("a", 0, 1)
        b = self.model.add_var("b", 0, 1)
        c = self.model.add_var("c", 0, 1)
        expr = {c: 3.0, a: 1.0, b: 1e-13}
        first = self.model.add_constraint(expr, Sense.GE, 1)
        second = self.model.add_constraint(expr, Sense.GE, 1)
        self.assertEqual(self.model.constraints[first].terms, ((0, 1.0), (2, 3.0)))
        self.assertEqual(self.model.constraints[first], self.model.constraints[second])

    def test_dense_matrix_incremental(self):
        """Test that the cached matrix grows with appended rows."""
        x = self.model.add_var("x", 0, 1)
        y = self.model.add_var("y", 0, 1)
        self.model.add_constraint({x: 1, y: 2}, Sense.LE, 3)
        self.model.dense_matrix()
        self.model.add_constraint({y: -1}, Sense.GE, -1)
        np.testing.assert_array_equal(self.model.dense_matrix(), [[1, 2], [0, -1]])

    def test_stats_and_violation(self):
        """Test the statistics line and violation measure."""
        x = self.model.add_var("x", 0, 1, integral=True)
        y = self.model.add_var("y", 0, 5)
        self.model.add_constraint({x: 1, y: 1}, Sense.GE, 2)
        self.assertEqual(self.model.stats(),
                         "unit: 2 vars (1 integral), 1 constraints, 2 nonzeros")
        self.assertAlmostEqual(self.model.max_violation([1, 0.5]), 0.5)
        self.assertEqual(self.model.max_violation([1, 1]), 0.0)


class TestRelax(unittest.TestCase):
    """Test cases for relax."""

    def test_binary_becomes_continuous(self):
        """Test that binaries keep their [0, 1] box."""
        model = Model()
        model.add_var("z_1", 0, 1, integral=True, obj=1)
        relaxed = relax(model)
        self.assertFalse(relaxed.vars[0].integral)
        self.assertEqual((relaxed.vars[0].lower, relaxed.vars[0].upper), (0.0, 1.0))
        self.assertTrue(model.vars[0].integral)

    def test_idempotent(self):
        """Test relax(relax(m)) == relax(m) and continuous copies."""
        model = Model()
        model.add_var("x", 0, 2)
        model.add_var("z", 0, 1, integral=True)
        model.add_constraint({0: 1, 1: 1}, Sense.LE, 2)
        once, twice = relax(model), relax(relax(model))
        self.assertEqual(once.vars, twice.vars)
        self.assertEqual(once.constraints, twice.constraints)
        self.assertEqual(relax(once).vars, once.vars)


class TestExportMps(unittest.TestCase):
    """Test cases for export_mps."""

    def test_sections_and_markers(self):
        """Test section headers and integrality markers."""
        model = Model("m")
        z = model.add_var("z_1", 0, 1, integral=True, obj=10)
        x = model.add_var("x_1_1_2", 0, math.inf, obj=1)
        model.add_constraint({z: 1, x: -1}, Sense.GE, 0)
        text = export_mps(model)
        for header in ("NAME m", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
            self.assertIn(header, text)
        self.assertIn("'MARKER' 'INTORG'", text)
        self.assertIn("'MARKER' 'INTEND'", text)
        self.assertIn(" G  c1", text)
        self.assertIn(" PL BND x_1_1_2", text)
        self.assertIn(" UP BND z_1 1", text)

    @unittest.skipUnless(_cbc_available(), "pulp with CBC is not installed")
    def test_external_round_trip(self):
        """Test that an external solver reads the file and finds x = 3."""
        model = Model("forced")
        x = model.add_var("x", 0, 10, obj=1)
        model.add_constraint({x: 1}, Sense.GE, 3)
        status, objective = solve_mps_externally(export_mps(model))
        self.assertEqual(status, "Optimal")
        self.assertAlmostEqual(objective, 3.0, places=6)


if __name__ == '__main__':
    unittest.main()
