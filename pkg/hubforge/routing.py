"""Explicit routings recovered from supermodular master points."""

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .costs import CostTables, ScheduleKind, SortedSchedule
from .cuts import SeparationPoint, activations, maximizing_index
from .formulations import BuiltModel, FormulationKind
from .linear_model import Sense

logger = logging.getLogger(__name__)

ACTIVE = 0.5
CERTIFY_TOL = 1e-7


class RoutingError(RuntimeError):
    """Raised when a point cannot route some commodity."""


@dataclass(frozen=True)
class Leg:
    """Flow of one schedule entry on one edge."""
    edge: int
    fraction: float
    unit_cost: float
    kind: ScheduleKind
    ref: int


@dataclass
class CommodityRoute:
    """Routing of one commodity.

    Attributes:
        r: Commodity index.
        legs: Flow per schedule entry used.
        path: ``(i, j)`` hub pair for integer routes (``i == j`` for a
            single hub), None for fractional ones.
        sentinel_ref: Edge index of the fictitious edge.
    """
    r: int
    legs: List[Leg] = field(default_factory=list)
    path: Optional[Tuple[int, int]] = None
    sentinel_ref: int = -1

    @property
    def cost(self) -> float:
        return float(sum(leg.fraction * leg.unit_cost for leg in self.legs))

    @property
    def sentinel_mass(self) -> float:
        return float(sum(leg.fraction for leg in self.legs if leg.edge == self.sentinel_ref))

    def fractions(self) -> Dict[int, float]:
        """Edge -> total flow, the fictitious edge excluded."""
        out: Dict[int, float] = {}
        for leg in self.legs:
            if leg.edge != self.sentinel_ref:
                out[leg.edge] = out.get(leg.edge, 0.0) + leg.fraction
        return out


@dataclass
class Routing:
    """Routes of every commodity."""
    routes: List[CommodityRoute]
    integral: bool

    @property
    def total_cost(self) -> float:
        return float(sum(route.cost for route in self.routes))

    @property
    def sentinel_routed(self) -> List[int]:
        """Commodities with flow left on the fictitious edge."""
        return [route.r for route in self.routes if route.sentinel_mass > 0]

    def to_csv(self, tables: CostTables) -> str:
        """Rows ``r,i,j,fraction,cost`` (1-based nodes, ``sentinel`` for the fictitious edge)."""
        output = io.StringIO()
        writer = csv.DictWriter(output, fieldnames=['r', 'i', 'j', 'fraction', 'cost'])
        writer.writeheader()
        for route in self.routes:
            for leg in route.legs:
                if leg.edge == route.sentinel_ref:
                    i = j = 'sentinel'
                else:
                    a, b = tables.edges[leg.edge]
                    i, j = a + 1, b + 1
                writer.writerow({'r': route.r + 1, 'i': i, 'j': j, 'fraction': repr(leg.fraction),
                                 'cost': repr(leg.fraction * leg.unit_cost)})
        return output.getvalue()


def _carrier_edge(tables: CostTables, r, i, open_nodes=None) -> Tuple[int, float]:
    """Edge carrying single-hub flow through ``i`` and the FZ-P unit cost on it.

    The designated anchor is used unless its far end is closed. Otherwise
    an edge to an open hub whose best cost is the single-hub cost of ``i``
    is preferred; failing that the cheapest edge to an open hub is used and
    the flow is charged that edge's best cost.
    """
    single = float(tables.H[r, i])
    anchor = tables.anchor[r][i]
    if open_nodes is None:
        return anchor, single
    a, b = tables.edges[anchor]
    if (b if a == i else a) in open_nodes:
        return anchor, single
    options = sorted((float(tables.Fbar[r, tables.edge_id(i, j)]), tables.edge_id(i, j))
                     for j in open_nodes if j != i)
    if not options:
        return anchor, single
    for cost, edge in options:
        if np.isclose(cost, single, rtol=CERTIFY_TOL, atol=CERTIFY_TOL):
            return edge, single
    cost, edge = options[0]
    return edge, cost


def _edge_path(tables: CostTables, r, e) -> Tuple[int, int]:
    i, j = tables.edges[e]
    paths = tables.path_matrix(r)
    options = [(paths[i, j], (i, j)), (paths[j, i], (j, i)), (paths[i, i], (i, i)),
               (paths[j, j], (j, j))]
    return min(options, key=lambda item: item[0])[1]


def recover_integer(schedule: SortedSchedule, tables: CostTables, z, y) -> Routing:
    """One unit route per commodity at the first active schedule entry.

    On equal values an active edge entry is preferred over a single-hub one.

    Raises:
        RoutingError: If some commodity reaches only the sentinel.
    """
    point = SeparationPoint(y=np.asarray(y, dtype=float), z=np.asarray(z, dtype=float))
    open_nodes = set(int(i) for i in np.flatnonzero(point.z > ACTIVE))
    routes = []
    for r in range(len(schedule)):
        sched = schedule[r]
        active = activations(sched, point)[:-1] > ACTIVE
        hits = np.flatnonzero(active)
        if not hits.size:
            raise RoutingError(f"infeasible hub configuration: commodity {r + 1} has no "
                               "open hub or edge")
        t = int(hits[0])
        for h in hits[1:]:
            if sched.values[h] != sched.values[t]:
                break
            if sched.kinds[h] is ScheduleKind.Y:
                t = int(h)
                break
        value, kind, ref = sched.entry(t)
        if kind is ScheduleKind.Y:
            leg = Leg(ref, 1.0, value, kind, ref)
            path = _edge_path(tables, r, ref)
        else:
            edge, cost = _carrier_edge(tables, r, ref, open_nodes)
            leg = Leg(edge, 1.0, cost, kind, ref)
            path = (ref, ref) if np.isclose(cost, value) else _edge_path(tables, r, edge)
        routes.append(CommodityRoute(r, [leg], path, schedule.sentinel_ref))
    return Routing(routes, integral=True)


def recover_fractional(schedule: SortedSchedule, tables: CostTables, z, y) -> Routing:
    """Greedy fill in schedule order up to the first index of unit mass.

    Entries before that index carry their own activation; the index itself
    carries the remainder. Single-hub entries ride on their anchor edges.
    A commodity whose mass never reaches one leaves the remainder on the
    fictitious edge.
    """
    point = SeparationPoint(y=np.asarray(y, dtype=float), z=np.asarray(z, dtype=float))
    routes = []
    for r in range(len(schedule)):
        sched = schedule[r]
        active = activations(sched, point)
        t_bar = maximizing_index(sched, active)
        route = CommodityRoute(r, sentinel_ref=schedule.sentinel_ref)
        used = 0.0
        for h in range(t_bar + 1):
            amount = float(active[h]) if h < t_bar else max(1.0 - used, 0.0)
            if amount <= 0:
                continue
            value, kind, ref = sched.entry(h)
            if h == sched.sentinel_index:
                edge = schedule.sentinel_ref
            elif kind is ScheduleKind.Z:
                edge = tables.anchor[r][ref]
            else:
                edge = ref
            route.legs.append(Leg(edge, amount, value, kind, ref))
            used += amount
        if route.sentinel_mass > 0:
            logger.debug("Commodity %d keeps %.6g of its flow on the fictitious edge",
                         r + 1, route.sentinel_mass)
        routes.append(route)
    return Routing(routes, integral=False)


@dataclass
class Certificate:
    """Outcome of :func:`certify`."""
    ok: bool
    objective: float
    violations: List[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def certify(routing: Routing, built_fzp: BuiltModel, z, y) -> Certificate:
    """Check a routing against every row of an FZ-P model.

    Edge variables are lifted to the largest flow they carry, since FZ-P
    leaves them costless and unlinked to the hubs.
    """
    if built_fzp.kind is not FormulationKind.FZ_P:
        raise ValueError("certify needs an FZ-P model")
    model = built_fzp.model
    tables = built_fzp.tables
    values = np.zeros(model.num_vars)
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    for i, var in built_fzp.z.items():
        values[var.id] = z[i]
    for e, var in built_fzp.y.items():
        values[var.id] = y[e] if e < len(y) else 0.0
    violations = []
    for route in routing.routes:
        if route.sentinel_mass > 0:
            violations.append(f"commodity {route.r + 1} keeps {route.sentinel_mass:.6g} "
                              "on the fictitious edge")
        for e, fraction in route.fractions().items():
            col = built_fzp.x[route.r, e].id
            values[col] = fraction
            ycol = built_fzp.y[e].id
            values[ycol] = max(values[ycol], fraction)

    activity = model.dense_matrix() @ values
    for row, act in zip(model.constraints, activity):
        if row.sense is Sense.LE:
            excess = act - row.rhs
        elif row.sense is Sense.GE:
            excess = row.rhs - act
        else:
            excess = abs(act - row.rhs)
        if excess > CERTIFY_TOL:
            violations.append(f"row '{row.tag}' violated by {excess:.3g}")
    for var, value in zip(model.vars, values):
        if value < var.lower - CERTIFY_TOL or value > var.upper + CERTIFY_TOL:
            violations.append(f"{var.name}={value:.6g} outside [{var.lower}, {var.upper}]")

    objective = model.evaluate(values)
    routed = float(np.dot(built_fzp.instance.setup, z)) + routing.total_cost
    if abs(objective - routed) > CERTIFY_TOL * (1 + abs(objective)):
        violations.append(f"edge costs give {objective:.9g} but the routing costs {routed:.9g}")
    for message in violations:
        logger.debug("certify: %s", message)
    return Certificate(not violations, objective, violations)


def edges_of_hubs(tables: CostTables, hubs) -> np.ndarray:
    """Edge vector (fictitious slot included) with every edge inside ``hubs`` active."""
    y = np.zeros(len(tables.edges) + 1)
    hubs = sorted(hubs)
    for k, i in enumerate(hubs):
        for j in hubs[k + 1:]:
            y[tables.edge_id(i, j)] = 1.0
    return y
