"""Unit tests for costs.py module."""

import csv
import io
import unittest

import numpy as np

from hubforge.costs import (
    ScheduleKind, ScheduleVariant, best_edge_cost, big_m, build_schedule,
    compute_tables, edge_csv, edge_index, edge_list, path_cost, schedule_csv,
    sentinel_is_safe, single_hub_cost)
from hubforge.instance import Commodity, Instance, scale_setup
from tests.test_utils import random_instance, toy4

Y, Z = ScheduleKind.Y, ScheduleKind.Z


def _line(n, commodities, alpha=0.5):
    pos = np.arange(n, dtype=float)
    cost = np.abs(pos[:, None] - pos[None, :])
    return Instance(n, cost, np.ones(n), tuple(commodities), alpha=alpha)


class TestEdgeIndexing(unittest.TestCase):
    """Test cases for the edge numbering helpers."""

    def test_index_matches_list(self):
        """Test that edge_index inverts edge_list."""
        for n in (2, 3, 6):
            for k, (i, j) in enumerate(edge_list(n)):
                self.assertEqual(edge_index(n, i, j), k)
                self.assertEqual(edge_index(n, j, i), k)

    def test_loop_rejected(self):
        """Test that a loop is not an edge."""
        with self.assertRaises(ValueError):
            edge_index(4, 2, 2)


class TestPathCosts(unittest.TestCase):
    """Test cases for path_cost, single_hub_cost and best_edge_cost."""

    def test_zero_demand(self):
        """Test that zero demand gives zero cost everywhere."""
        instance = _line(3, [Commodity(0, 2, 0.0)])
        for i in range(3):
            for j in range(3):
                self.assertEqual(path_cost(instance, 0, i, j), 0.0)

    def test_pure_interhub_leg(self):
        """Test i = origin and j = destination."""
        instance = toy4()
        self.assertAlmostEqual(path_cost(instance, 0, 0, 3), 0.5 * 3)

    def test_toy4_path(self):
        """Test the hand computed path 1-2-3-4."""
        self.assertAlmostEqual(path_cost(toy4(), 0, 1, 2), 2.5)

    def test_single_hub(self):
        """Test single-hub costs on toy4 and the consistency identity."""
        instance = toy4()
        self.assertEqual([single_hub_cost(instance, 0, i) for i in range(4)], [3, 3, 3, 3])
        for r in range(instance.m):
            for i in range(4):
                self.assertEqual(single_hub_cost(instance, r, i), path_cost(instance, r, i, i))

    def test_single_hub_at_origin(self):
        """Test a hub placed at the origin."""
        instance = Instance(2, [[0, 4], [4, 0]], [1, 1], (Commodity(0, 1, 2.0),), theta=1.5)
        self.assertAlmostEqual(single_hub_cost(instance, 0, 0), 2.0 * 1.5 * 4)

    def test_best_edge(self):
        """Test best_edge_cost on both toy4 commodities."""
        instance = toy4()
        self.assertEqual(best_edge_cost(instance, 0, (0, 3)), (1.5, True))
        self.assertEqual(best_edge_cost(instance, 1, (1, 2)), (0.5, True))

    def test_best_edge_tie_goes_to_single_hub(self):
        """Test that equality with a single hub keeps the edge out of E^r."""
        instance = Instance(2, [[0, 5], [5, 0]], [1, 1], (Commodity(0, 1, 1.0),), alpha=1.0)
        self.assertEqual(best_edge_cost(instance, 0, (0, 1)), (5.0, False))


class TestTables(unittest.TestCase):
    """Test cases for compute_tables and classify_sets."""

    def test_toy4_first_commodity(self):
        """Test the tables of commodity (1,4)."""
        tables = compute_tables(toy4())
        np.testing.assert_allclose(tables.H[0], [3, 3, 3, 3])
        np.testing.assert_allclose(tables.F[0], [2.5, 2, 1.5, 2.5, 2, 2.5])
        self.assertTrue(tables.in_Er[0].all())
        self.assertEqual(tables.Ur[0], frozenset({0}))
        self.assertEqual(tables.Vr[0], (1, 2, 3))
        self.assertEqual(tables.anchor[0], {1: 0, 2: 1, 3: 2})
        self.assertEqual(big_m(tables, 0), 26.0)
        self.assertEqual(tables.big_m[0], 26.0)

    def test_toy4_second_commodity(self):
        """Test the tables of commodity (2,3)."""
        tables = compute_tables(toy4())
        np.testing.assert_allclose(tables.H[1], [3, 1, 1, 3])
        np.testing.assert_allclose(tables.Fbar[1], [1, 1, 3, 0.5, 1, 1])
        self.assertEqual(list(tables.Er(1)), [3])
        self.assertEqual(tables.big_m[1], 31.0)

    def test_no_strict_maximizer(self):
        """Test that a tied distribution column leaves U^r empty."""
        cost = np.array([[0, 3, 4], [3, 0, 4], [4, 4, 0]], dtype=float)
        instance = Instance(3, cost, np.ones(3), (Commodity(0, 2, 1.0),))
        tables = compute_tables(instance)
        self.assertEqual(tables.Ur[0], frozenset())
        self.assertEqual(tables.Vr[0], (0, 1, 2))
        self.assertEqual(set(tables.anchor[0]), {0, 1, 2})

    def test_two_nodes(self):
        """Test the two-node case with and without a positive cost."""
        tables = compute_tables(Instance(2, [[0, 5], [5, 0]], [1, 1], (Commodity(0, 1, 1.0),)))
        self.assertEqual(tables.Ur[0], frozenset({0}))
        self.assertEqual(tables.anchor[0], {1: 0})
        flat = compute_tables(Instance(2, np.zeros((2, 2)), [1, 1], (Commodity(0, 1, 1.0),)))
        self.assertEqual(flat.Ur[0], frozenset())
        self.assertEqual(flat.Vr[0], (0, 1))

    def test_edge_cost_relations(self):
        """Test Fbar <= F, Fbar <= H at both ends, and equality on E^r."""
        for seed in range(4):
            tables = compute_tables(random_instance(6, seed))
            heads = np.array([e[0] for e in tables.edges])
            tails = np.array([e[1] for e in tables.edges])
            self.assertTrue((tables.Fbar <= tables.F).all())
            self.assertTrue((tables.Fbar <= tables.H[:, heads]).all())
            self.assertTrue((tables.Fbar <= tables.H[:, tails]).all())
            np.testing.assert_array_equal(tables.Fbar[tables.in_Er], tables.F[tables.in_Er])

    def test_anchor_never_beats_single_hub(self):
        """Test that routing i -> anchor partner is never cheaper than H_ri."""
        for seed in range(4):
            instance = random_instance(6, seed)
            tables = compute_tables(instance)
            for r in range(instance.m):
                for i, e in tables.anchor[r].items():
                    a, b = tables.edges[e]
                    j_bar = b if a == i else a
                    self.assertGreaterEqual(path_cost(instance, r, i, j_bar) + 1e-9,
                                            tables.H[r, i])

    def test_farthest_node_loses_to_paths_on_toy4(self):
        """Test that the farthest node of commodity (1,4) beats no interhub path."""
        instance = toy4()
        tables = compute_tables(instance)
        (u,) = tables.Ur[0]
        for j in range(4):
            if j != u:
                self.assertGreater(tables.H[0, u], path_cost(instance, 0, u, j))

    def test_streaming_matches_dense(self):
        """Test that on-demand path matrices equal the dense tensor."""
        instance = random_instance(5, 9)
        dense = compute_tables(instance, dense=True)
        streaming = compute_tables(instance, dense=False)
        self.assertTrue(streaming.streaming)
        for r in range(instance.m):
            np.testing.assert_array_equal(dense.path_matrix(r), streaming.path_matrix(r))
        np.testing.assert_array_equal(dense.Fbar, streaming.Fbar)

    def test_zero_demand_big_m(self):
        """Test that a zero-demand commodity gets sentinel 1."""
        tables = compute_tables(_line(3, [Commodity(0, 2, 0.0), Commodity(1, 0, 1.0)]))
        self.assertEqual(tables.big_m[0], 1.0)


class TestSchedules(unittest.TestCase):
    """Test cases for build_schedule."""

    def test_toy4_fzs(self):
        """Test the hand sorted FZS schedule of commodity (1,4)."""
        instance = toy4()
        sched = build_schedule(instance, compute_tables(instance), ScheduleVariant.FZS)[0]
        entries = [sched.entry(t) for t in range(len(sched))]
        self.assertEqual(entries, [
            (1.5, Y, 2), (2.0, Y, 1), (2.0, Y, 4), (2.5, Y, 0), (2.5, Y, 3), (2.5, Y, 5),
            (3.0, Z, 1), (3.0, Z, 2), (3.0, Z, 3), (26.0, Y, 6)])

    def test_toy4_fzs_second(self):
        """Test the FZS schedule of commodity (2,3)."""
        instance = toy4()
        sched = build_schedule(instance, compute_tables(instance), ScheduleVariant.FZS)[1]
        self.assertEqual([sched.entry(t) for t in range(len(sched))],
                         [(0.5, Y, 3), (1.0, Z, 1), (1.0, Z, 2), (3.0, Z, 3), (31.0, Y, 6)])

    def test_toy4_cfs(self):
        """Test the CFS schedule of commodity (1,4)."""
        instance = toy4()
        schedule = build_schedule(instance, compute_tables(instance), ScheduleVariant.CFS)
        np.testing.assert_allclose(schedule[0].values, [1.5, 2, 2, 2.5, 2.5, 2.5, 26])
        self.assertEqual(schedule.sentinel_ref, 6)
        self.assertTrue(all(k is Y for k in schedule[0].kinds))

    def test_only_single_hub_entries(self):
        """Test that an empty E^r leaves only Z entries and the sentinel."""
        instance = _line(3, [Commodity(0, 2, 0.0)])
        sched = build_schedule(instance, compute_tables(instance), ScheduleVariant.FZS)[0]
        self.assertEqual(sched.kinds[:-1], (Z, Z))
        self.assertEqual(sched.entry(sched.sentinel_index), (1.0, Y, 3))

    def test_schedule_shape_and_order(self):
        """Test monotonicity and lengths on random instances."""
        for seed in range(5):
            instance = random_instance(6, seed, density=0.5)
            tables = compute_tables(instance)
            fzs = build_schedule(instance, tables, ScheduleVariant.FZS)
            cfs = build_schedule(instance, tables, ScheduleVariant.CFS)
            for r in range(instance.m):
                self.assertEqual(len(fzs[r]), len(tables.Er(r)) + len(tables.Vr[r]) + 1)
                self.assertEqual(len(cfs[r]), len(tables.edges) + 1)
                self.assertTrue((np.diff(fzs[r].values) >= 0).all())
                self.assertTrue((np.diff(cfs[r].values) >= 0).all())
                self.assertGreater(fzs[r].values[-1], fzs[r].values[-2])

    def test_first_entry_is_cheapest_route(self):
        """Test the first schedule value against brute force over all paths."""
        for seed in range(5):
            instance = random_instance(5, seed)
            tables = compute_tables(instance)
            fzs = build_schedule(instance, tables, ScheduleVariant.FZS)
            cfs = build_schedule(instance, tables, ScheduleVariant.CFS)
            for r in range(instance.m):
                best = tables.path_matrix(r).min()
                self.assertAlmostEqual(fzs[r].values[0], best, places=9)
                self.assertAlmostEqual(cfs[r].values[0], best, places=9)

    def test_deterministic(self):
        """Test that repeated builds agree exactly."""
        instance = random_instance(6, 2)
        first = build_schedule(instance, compute_tables(instance), ScheduleVariant.FZS)
        second = build_schedule(instance, compute_tables(instance), ScheduleVariant.FZS)
        for r in range(instance.m):
            np.testing.assert_array_equal(first[r].values, second[r].values)
            np.testing.assert_array_equal(first[r].refs, second[r].refs)
            self.assertEqual(first[r].kinds, second[r].kinds)


class TestDiagnostics(unittest.TestCase):
    """Test cases for sentinel safety and CSV dumps."""

    def test_sentinel_safety(self):
        """Test the sentinel check on toy4 and with huge setup costs."""
        instance = toy4()
        self.assertTrue(sentinel_is_safe(instance, compute_tables(instance)))
        costly = scale_setup(instance, 100.0)
        self.assertFalse(sentinel_is_safe(costly, compute_tables(costly)))

    def test_csv_dumps(self):
        """Test the schedule and edge CSV layouts."""
        instance = toy4()
        tables = compute_tables(instance)
        rows = list(csv.DictReader(io.StringIO(schedule_csv(
            build_schedule(instance, tables, ScheduleVariant.FZS), 1))))
        self.assertEqual(rows[0], {'t': '1', 'value': '0.5', 'kind': 'Y', 'ref': '4'})
        self.assertEqual(rows[-1]['ref'], 'sentinel')
        edges = list(csv.DictReader(io.StringIO(edge_csv(tables, 1))))
        self.assertEqual(len(edges), 6)
        self.assertEqual(edges[3], {'e': '2-3', 'F': '0.5', 'Fbar': '0.5', 'in_Er': '1'})


if __name__ == '__main__':
    unittest.main()
