"""Derived routing costs, per-commodity index sets and value schedules."""

import csv
import io
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Optional, Tuple

import numpy as np

from .instance import Instance

logger = logging.getLogger(__name__)

# Above this node count the per-commodity path matrices are recomputed on demand.
STREAMING_THRESHOLD = 60
BIG_M_FACTOR = 10.0


class CostModelError(RuntimeError):
    """Raised when the derived cost structure is internally inconsistent."""


class ScheduleKind(Enum):
    """Tag of a schedule entry: interhub edge or single hub."""
    Y = "Y"
    Z = "Z"


class ScheduleVariant(Enum):
    """Which master formulation a schedule feeds."""
    CFS = "CFS"
    FZS = "FZS"


def edge_list(n):
    """All undirected node pairs i < j in lexicographic order."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


def edge_index(n, i, j):
    """Position of the edge {i, j} in :func:`edge_list`."""
    if i == j:
        raise ValueError("an edge needs two distinct nodes")
    if i > j:
        i, j = j, i
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def path_cost(instance: Instance, r, i, j):
    """Cost of routing commodity ``r`` along o -> i -> j -> d.

    With ``i == j`` this is the single-hub cost through ``i``.
    """
    com = instance.commodities[r]
    c = instance.cost
    return com.demand * (instance.gamma * c[com.origin, i] + instance.alpha * c[i, j]
                         + instance.theta * c[j, com.dest])


def single_hub_cost(instance: Instance, r, i):
    """Weighted single-hub cost w(gamma c_oi + theta c_id)."""
    com = instance.commodities[r]
    c = instance.cost
    return com.demand * (instance.gamma * c[com.origin, i] + instance.theta * c[i, com.dest])


def best_edge_cost(instance: Instance, r, e):
    """Cheapest use of edge ``e`` by commodity ``r``.

    Args:
        instance: The instance.
        r: Commodity index.
        e: Edge as an ``(i, j)`` pair with ``i < j``.

    Returns:
        tuple: ``(Fbar, in_Er)`` where ``in_Er`` is True only when the
        interhub path is strictly cheaper than both single-hub paths.
    """
    i, j = e
    f = min(path_cost(instance, r, i, j), path_cost(instance, r, j, i))
    hi, hj = single_hub_cost(instance, r, i), single_hub_cost(instance, r, j)
    return min(f, hi, hj), bool(f < min(hi, hj))


def _path_matrix(instance: Instance, r):
    com = instance.commodities[r]
    c = instance.cost
    return com.demand * (instance.gamma * c[com.origin, :][:, None]
                         + instance.alpha * c
                         + instance.theta * c[:, com.dest][None, :])


@dataclass(frozen=True, eq=False)
class CostTables:
    """Per-commodity cost tables.

    Attributes:
        instance: Source instance.
        edges: Edge list ``(i, j)``, ``i < j``; the fictitious edge has
            index ``len(edges)``.
        H: (m, n) single-hub costs.
        F: (m, |E|) best interhub traversal cost per edge.
        Fbar: (m, |E|) ``min(F, H_i, H_j)``.
        in_Er: (m, |E|) mask of edges strictly better than both single hubs.
        Ur: Per commodity, the strict maximizer of distribution cost (0 or 1 node).
        Vr: Per commodity, the remaining nodes in ascending order.
        anchor: Per commodity, node -> edge index of its designated edge.
        big_m: (m,) sentinel values.
        C: (m, n, n) dense path costs, or None in streaming mode.
    """
    instance: Instance
    edges: Tuple[Tuple[int, int], ...]
    H: np.ndarray
    F: np.ndarray
    Fbar: np.ndarray
    in_Er: np.ndarray
    Ur: Tuple[FrozenSet[int], ...]
    Vr: Tuple[Tuple[int, ...], ...]
    anchor: Tuple[Dict[int, int], ...]
    big_m: np.ndarray
    C: Optional[np.ndarray] = None

    @property
    def sentinel(self) -> int:
        """Index of the fictitious edge."""
        return len(self.edges)

    @property
    def streaming(self) -> bool:
        return self.C is None

    def path_matrix(self, r) -> np.ndarray:
        """n x n matrix of ``C_rij``, computed on demand in streaming mode."""
        if self.C is not None:
            return self.C[r]
        return _path_matrix(self.instance, r)

    def edge_id(self, i, j) -> int:
        return edge_index(self.instance.n, i, j)

    def Er(self, r) -> np.ndarray:  # pylint: disable=invalid-name
        """Edge indices in E^r, ascending."""
        return np.flatnonzero(self.in_Er[r])


def classify_sets(instance: Instance, H, F, Fbar):  # pylint: disable=invalid-name
    """Derive E^r, U^r, V^r and the designated anchor edges.

    Args:
        instance: The instance.
        H: (m, n) single-hub costs.
        F: (m, |E|) interhub costs.
        Fbar: (m, |E|) best edge costs (unused beyond shape checks).

    Returns:
        tuple: ``(in_Er, Ur, Vr, anchor)``.

    Raises:
        CostModelError: If a node of V^r has no admissible anchor.
    """
    n = instance.n
    edges = edge_list(n)
    if F.shape != Fbar.shape:
        raise CostModelError("F and Fbar tables disagree in shape")
    heads = np.array([e[0] for e in edges], dtype=int)
    tails = np.array([e[1] for e in edges], dtype=int)
    in_er = F < np.minimum(H[:, heads], H[:, tails])

    ur, vr, anchors = [], [], []
    for r, com in enumerate(instance.commodities):
        dist = instance.cost[:, com.dest]
        top = dist.max()
        winners = np.flatnonzero(dist == top)
        u = frozenset(int(w) for w in winners) if len(winners) == 1 else frozenset()
        v = tuple(i for i in range(n) if i not in u)
        anchor = {}
        for i in v:
            others = dist.copy()
            others[i] = -np.inf
            j_bar = int(np.argmax(others))
            if dist[i] > dist[j_bar]:
                raise CostModelError(
                    f"commodity {r + 1}: node {i + 1} has no admissible anchor edge")
            anchor[i] = edge_index(n, i, j_bar)
        ur.append(u)
        vr.append(v)
        anchors.append(anchor)
    return in_er, tuple(ur), tuple(vr), tuple(anchors)


def big_m(tables: CostTables, r) -> float:
    """Finite sentinel value ``10 * max_e Fbar_re + 1`` for commodity ``r``."""
    return float(BIG_M_FACTOR * tables.Fbar[r].max() + 1.0)


def compute_tables(instance: Instance, dense: Optional[bool] = None) -> CostTables:
    """Compute every derived cost table of an instance.

    Args:
        instance: The instance.
        dense: Keep the (m, n, n) path cost tensor; defaults to
            ``n <= STREAMING_THRESHOLD``.

    Returns:
        CostTables: Immutable tables.
    """
    n, m = instance.n, instance.m
    edges = edge_list(n)
    heads = np.array([e[0] for e in edges], dtype=int)
    tails = np.array([e[1] for e in edges], dtype=int)
    dense = n <= STREAMING_THRESHOLD if dense is None else dense

    C = np.empty((m, n, n)) if dense else None  # pylint: disable=invalid-name
    H = np.empty((m, n))  # pylint: disable=invalid-name
    F = np.empty((m, len(edges)))  # pylint: disable=invalid-name
    for r in range(m):
        paths = _path_matrix(instance, r)
        if dense:
            C[r] = paths
        H[r] = np.diag(paths)
        F[r] = np.minimum(paths[heads, tails], paths[tails, heads])
    Fbar = np.minimum(F, np.minimum(H[:, heads], H[:, tails]))  # pylint: disable=invalid-name
    in_er, ur, vr, anchor = classify_sets(instance, H, F, Fbar)
    sentinel = BIG_M_FACTOR * Fbar.max(axis=1) + 1.0 if m else np.zeros(0)

    for arr in (H, F, Fbar, in_er, sentinel) + ((C,) if dense else ()):
        arr.setflags(write=False)
    tables = CostTables(instance=instance, edges=edges, H=H, F=F, Fbar=Fbar,
                        in_Er=in_er, Ur=ur, Vr=vr, anchor=anchor,
                        big_m=sentinel, C=C)
    logger.debug("Cost tables for %s: n=%d, |E|=%d, |R|=%d, mean |E^r|=%.1f, dense=%s",
                 instance.name, n, len(edges), m,
                 float(in_er.sum(axis=1).mean()) if m else 0.0, dense)
    return tables


@dataclass(frozen=True, eq=False)
class CommoditySchedule:
    """Ascending value sequence of one commodity, sentinel last.

    ``refs`` hold edge indices for kind Y and node indices for kind Z; the
    sentinel is a Y entry whose ref is the fictitious edge.
    """
    values: np.ndarray
    kinds: Tuple[ScheduleKind, ...]
    refs: np.ndarray

    def __len__(self):
        return len(self.values)

    def entry(self, t):
        return float(self.values[t]), self.kinds[t], int(self.refs[t])

    @property
    def sentinel_index(self) -> int:
        return len(self.values) - 1


@dataclass(frozen=True, eq=False)
class SortedSchedule:
    """Per-commodity schedules for one master variant."""
    variant: ScheduleVariant
    commodities: Tuple[CommoditySchedule, ...]
    sentinel_ref: int

    def __getitem__(self, r) -> CommoditySchedule:
        return self.commodities[r]

    def __len__(self):
        return len(self.commodities)


def _sorted(values, kinds, refs):
    kind_key = np.array([0 if k is ScheduleKind.Z else 1 for k in kinds], dtype=int)
    order = np.lexsort((refs, kind_key, values))
    return values[order], tuple(kinds[t] for t in order), refs[order]


def build_schedule(instance: Instance, tables: CostTables,
                   variant: ScheduleVariant) -> SortedSchedule:
    """Sort the routing options of every commodity.

    FZS merges ``F`` over E^r (kind Y) with ``H`` over V^r (kind Z); CFS
    sorts ``Fbar`` over every edge. Ties go by value, then Z before Y,
    then the smaller reference. The sentinel ``M_r`` is appended last.
    """
    sentinel = tables.sentinel
    schedules = []
    for r in range(instance.m):
        if variant is ScheduleVariant.FZS:
            edges = tables.Er(r)
            nodes = np.array(tables.Vr[r], dtype=int)
            values = np.concatenate((tables.F[r, edges], tables.H[r, nodes]))
            kinds = [ScheduleKind.Y] * len(edges) + [ScheduleKind.Z] * len(nodes)
            refs = np.concatenate((edges, nodes)).astype(int)
        else:
            values = np.array(tables.Fbar[r], dtype=float)
            kinds = [ScheduleKind.Y] * len(tables.edges)
            refs = np.arange(len(tables.edges), dtype=int)
        values, kinds, refs = _sorted(np.asarray(values, dtype=float), kinds, refs)
        top = float(tables.big_m[r])
        if len(values) and values[-1] >= top:
            # single-hub values over V^r may exceed the edge based sentinel
            top = BIG_M_FACTOR * float(values[-1]) + 1.0
            logger.debug("Commodity %d: %s sentinel raised to %g", r + 1, variant.value, top)
        values = np.append(values, top)
        refs = np.append(refs, sentinel)
        values.setflags(write=False)
        refs.setflags(write=False)
        schedules.append(CommoditySchedule(values, kinds + (ScheduleKind.Y,), refs))
    return SortedSchedule(variant, tuple(schedules), sentinel)


def sentinel_is_safe(instance: Instance, tables: CostTables) -> bool:
    """Whether opening the cheapest hub pair beats routing everything on the sentinel.

    When this fails the finite sentinel can make an empty hub set look
    attractive to a supermodular master.
    """
    setup = np.sort(instance.setup)
    cheapest_pair = setup[0] + setup[1]
    slack = float(np.sum(tables.big_m - tables.Fbar.max(axis=1)))
    return bool(cheapest_pair < slack)


def schedule_csv(schedule: SortedSchedule, r) -> str:
    """CSV text ``t,value,kind,ref`` for one commodity; refs are 1-based."""
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=['t', 'value', 'kind', 'ref'])
    writer.writeheader()
    sched = schedule[r]
    for t in range(len(sched)):
        value, kind, ref = sched.entry(t)
        label = 'sentinel' if t == sched.sentinel_index else ref + 1
        writer.writerow({'t': t + 1, 'value': repr(value), 'kind': kind.value, 'ref': label})
    return output.getvalue()


def edge_csv(tables: CostTables, r) -> str:
    """CSV text ``e,F,Fbar,in_Er`` for one commodity."""
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=['e', 'F', 'Fbar', 'in_Er'])
    writer.writeheader()
    for k, (i, j) in enumerate(tables.edges):
        writer.writerow({'e': f"{i + 1}-{j + 1}", 'F': repr(float(tables.F[r, k])),
                         'Fbar': repr(float(tables.Fbar[r, k])),
                         'in_Er': int(tables.in_Er[r, k])})
    return output.getvalue()
