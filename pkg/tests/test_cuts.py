"""Unit tests for cuts.py module."""

import csv
import io
import itertools
import unittest

import numpy as np

from hubforge.costs import (
    ScheduleKind, ScheduleVariant, build_schedule, compute_tables)
from hubforge.cuts import (
    CutLog, SeparationPoint, activations, cut_row, maximizing_index, most_violated,
    rhs_value, separate_all)
from hubforge.formulations import build_super_master
from hubforge.linear_model import Sense
from tests.test_utils import random_instance, toy4


def empty_point(tables):
    """All-zero master point."""
    return SeparationPoint(y=np.zeros(len(tables.edges) + 1), z=np.zeros(tables.instance.n))


def hub_set_point(tables, hubs):
    """Integer point opening ``hubs`` and every edge between them."""
    point = empty_point(tables)
    for i in hubs:
        point.z[i] = 1.0
    for a, b in itertools.combinations(sorted(hubs), 2):
        point.y[tables.edge_id(a, b)] = 1.0
    return point


class TestRhsValue(unittest.TestCase):
    """Test cases for rhs_value on toy4."""

    def setUp(self):
        """Build the FZS schedule of toy4."""
        self.instance = toy4()
        self.tables = compute_tables(self.instance)
        self.schedule = build_schedule(self.instance, self.tables, ScheduleVariant.FZS)

    def test_first_index(self):
        """Test that the first index has empty sums."""
        point = hub_set_point(self.tables, [1, 2])
        self.assertAlmostEqual(rhs_value(self.schedule, 0, 0, point), 1.5)

    def test_zero_point(self):
        """Test S_rt = v_rt when nothing is active."""
        point = empty_point(self.tables)
        for r in range(2):
            for t, value in enumerate(self.schedule[r].values):
                self.assertAlmostEqual(rhs_value(self.schedule, r, t, point), value)

    def test_sentinel_with_cheapest_edge(self):
        """Test the sentinel row when edge 1-4 is fully active."""
        point = empty_point(self.tables)
        point.y[self.tables.edge_id(0, 3)] = 1.0
        sentinel = self.schedule[0].sentinel_index
        self.assertAlmostEqual(self.schedule[0].values[sentinel], 26.0)
        self.assertAlmostEqual(rhs_value(self.schedule, 0, sentinel, point), 1.5)

    def test_out_of_range(self):
        """Test that indices past the sentinel raise."""
        with self.assertRaises(IndexError):
            rhs_value(self.schedule, 0, len(self.schedule[0]), empty_point(self.tables))


class TestMostViolated(unittest.TestCase):
    """Test cases for most_violated on toy4."""

    def setUp(self):
        """Build the FZS schedule of toy4."""
        self.instance = toy4()
        self.tables = compute_tables(self.instance)
        self.schedule = build_schedule(self.instance, self.tables, ScheduleVariant.FZS)

    def test_satisfied_point(self):
        """Test that the cheapest active entry with matching eta gives no cut."""
        point = empty_point(self.tables)
        point.y[self.tables.edge_id(0, 3)] = 1.0
        self.assertIsNone(most_violated(self.schedule, 0, point, 1.5))

    def test_zero_point(self):
        """Test the forced sentinel cut."""
        cut = most_violated(self.schedule, 0, empty_point(self.tables), 0.0)
        self.assertEqual(cut.t, self.schedule[0].sentinel_index)
        self.assertAlmostEqual(cut.violation, 26.0)
        self.assertEqual(len(cut.terms), 9)

    def test_half_hubs(self):
        """Test z_2 = z_3 = 0.5: mass reaches one at the second single-hub entry."""
        point = empty_point(self.tables)
        point.z[1] = point.z[2] = 0.5
        cut = most_violated(self.schedule, 0, point, 0.0)
        self.assertEqual(cut.t, 7)
        self.assertEqual(self.schedule[0].entry(7), (3.0, ScheduleKind.Z, 2))
        self.assertAlmostEqual(cut.rhs_at_point, 3.0)
        self.assertAlmostEqual(cut.violation, 3.0)
        # entries tied with v_t drop out; the six cheaper edges remain
        self.assertEqual([kind for kind, _ref, _c in cut.terms], [ScheduleKind.Y] * 6)
        self.assertEqual([c for _k, _ref, c in cut.terms], [-1.5, -1.0, -1.0, -0.5, -0.5, -0.5])

    def test_tolerance(self):
        """Test that violations at or below tol are suppressed."""
        point = empty_point(self.tables)
        self.assertIsNone(most_violated(self.schedule, 0, point, 26.0 - 1e-7))
        self.assertIsNotNone(most_violated(self.schedule, 0, point, 25.0))


class TestSeparateAll(unittest.TestCase):
    """Test cases for separate_all and cut rows."""

    def setUp(self):
        """Build the FZ-S master of toy4."""
        self.instance = toy4()
        self.built = build_super_master(self.instance)
        self.tables = self.built.tables

    def test_zero_point(self):
        """Test one cut per commodity, most violated first."""
        cuts, stats = separate_all(self.built.schedule, empty_point(self.tables), [0.0, 0.0])
        self.assertEqual([cut.r for cut in cuts], [1, 0])
        self.assertEqual((stats.scanned, stats.emitted), (2, 2))
        self.assertAlmostEqual(stats.max_violation, 31.0)

    def test_integer_optimum(self):
        """Test hub set {2, 3} with true routing costs."""
        point = hub_set_point(self.tables, [1, 2])
        cuts, stats = separate_all(self.built.schedule, point, [2.5, 0.5])
        self.assertEqual(cuts, [])
        self.assertEqual(stats.emitted, 0)

    def test_point_from_values(self):
        """Test reading a master primal vector."""
        values = np.zeros(self.built.model.num_vars)
        values[self.built.z[2].id] = 0.25
        values[self.built.y[6].id] = 1.0
        point = SeparationPoint.from_values(self.built, values)
        self.assertEqual(point.z[2], 0.25)
        self.assertEqual(point.y[6], 1.0)
        # the fictitious edge never counts toward the prefix mass
        active = activations(self.built.schedule[0], point)
        self.assertEqual(maximizing_index(self.built.schedule[0], active),
                         self.built.schedule[0].sentinel_index)

    def test_cut_row(self):
        """Test the model row of a cut and its satisfaction at the cut point."""
        point = empty_point(self.tables)
        point.z[1] = point.z[2] = 0.5
        cut = most_violated(self.built.schedule, 0, point, 0.0)
        expr, sense, rhs, tag = cut_row(self.built, cut)
        self.assertIs(sense, Sense.GE)
        self.assertEqual(rhs, 3.0)
        self.assertEqual(tag, "cut r=1 t=8")
        self.assertEqual(expr[self.built.eta[0]], 1.0)
        self.assertEqual(expr[self.built.y[self.tables.edge_id(0, 3)]], 1.5)
        self.assertNotIn(self.built.z[1], expr)

    def test_cut_log(self):
        """Test the cut log CSV."""
        log = CutLog()
        cuts, _stats = separate_all(self.built.schedule, empty_point(self.tables), [0.0, 0.0])
        log.record(1, cuts)
        rows = list(csv.DictReader(io.StringIO(log.to_csv())))
        self.assertEqual(len(log), 2)
        self.assertEqual(rows[0], {'pass': '1', 'r': '2', 't': '5', 'value': '31.0',
                                   'violation': '31.0'})


class TestExactness(unittest.TestCase):
    """Property tests for the maximizing index."""

    def test_prefix_rule_maximizes(self):
        """Test max_t S_rt = S at the prefix index on random points."""
        rng = np.random.default_rng(7)
        checked_before = checked_after = 0
        for seed in range(10):
            instance = random_instance(int(rng.integers(3, 7)), seed, density=0.5)
            tables = compute_tables(instance)
            for variant in ScheduleVariant:
                schedule = build_schedule(instance, tables, variant)
                for _ in range(50):
                    r = int(rng.integers(instance.m))
                    scale = rng.choice([0.2, 0.6, 1.5])
                    point = SeparationPoint(
                        y=np.minimum(rng.uniform(0, 1, len(tables.edges) + 1) * scale, 1.0),
                        z=np.minimum(rng.uniform(0, 1, instance.n) * scale, 1.0))
                    values = [rhs_value(schedule, r, t, point) for t in range(len(schedule[r]))]
                    t_bar = maximizing_index(schedule[r], activations(schedule[r], point))
                    top = max(values)
                    self.assertAlmostEqual(values[t_bar], top, delta=1e-9 * (1 + abs(top)))
                    checked_before += t_bar > 0
                    checked_after += t_bar < len(values) - 1
        self.assertGreater(checked_before, 0)
        self.assertGreater(checked_after, 0)

    def test_coefficients_nonpositive(self):
        """Test the sign of every emitted coefficient."""
        instance = random_instance(6, 3, density=0.5)
        built = build_super_master(instance)
        rng = np.random.default_rng(3)
        for _ in range(20):
            point = SeparationPoint(y=rng.uniform(0, 0.3, len(built.y)),
                                    z=rng.uniform(0, 0.3, instance.n))
            cuts, _stats = separate_all(built.schedule, point, np.zeros(instance.m))
            for cut in cuts:
                self.assertTrue(all(c < 0 for _k, _ref, c in cut.terms))


class TestIntegerPoints(unittest.TestCase):
    """Test cases relating integer points to routing minima."""

    def test_edge_schedule_is_exact(self):
        """Test that CFS cuts price a hub set at its cheapest path."""
        instance = random_instance(5, 4, density=0.5)
        tables = compute_tables(instance)
        schedule = build_schedule(instance, tables, ScheduleVariant.CFS)
        for size in (2, 3):
            for hubs in itertools.combinations(range(instance.n), size):
                point = hub_set_point(tables, hubs)
                for r in range(instance.m):
                    paths = tables.path_matrix(r)
                    best = min(paths[i, j] for i in hubs for j in hubs)
                    t_bar = maximizing_index(schedule[r], activations(schedule[r], point))
                    self.assertAlmostEqual(rhs_value(schedule, r, t_bar, point), best,
                                           delta=1e-9 * (1 + best))

    def test_merged_schedule_is_an_upper_bound(self):
        """Test that FZS cuts never price a hub set below its cheapest path."""
        instance = random_instance(5, 4, density=0.5)
        tables = compute_tables(instance)
        schedule = build_schedule(instance, tables, ScheduleVariant.FZS)
        for size in (2, 3):
            for hubs in itertools.combinations(range(instance.n), size):
                point = hub_set_point(tables, hubs)
                for r in range(instance.m):
                    paths = tables.path_matrix(r)
                    best = min(paths[i, j] for i in hubs for j in hubs)
                    t_bar = maximizing_index(schedule[r], activations(schedule[r], point))
                    self.assertGreaterEqual(rhs_value(schedule, r, t_bar, point), best - 1e-9)


if __name__ == '__main__':
    unittest.main()
