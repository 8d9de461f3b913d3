"""LP-based branch-and-cut over the hub and edge binaries.

Static formulations solve plain relaxations at every node. Supermodular
masters run the separation loop of :mod:`hubforge.cuts` at each node;
rows found anywhere are globally valid and stay in the shared LP.
"""

import csv
import heapq
import io
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import DEFAULT_SETTINGS, Tolerances, get_setting, get_tolerances
from .cuts import (
    CutLog, SeparationPoint, activations, cut_row, maximizing_index, rhs_value,
    separate_all)
from .formulations import BuiltModel
from .linear_model import SolveStatus, relax
from .simplex import Basis, LpResult, resolve_after, solve_lp

logger = logging.getLogger(__name__)


class ClosedFormMismatch(RuntimeError):
    """Raised when the closed-form root value disagrees with the LP objective."""


class NodeLpFailure(RuntimeError):
    """Raised when node LPs failed and the search found no incumbent."""


class BranchingRule(Enum):
    """How the branching variable is chosen."""
    MOST_FRACTIONAL = "most-fractional"
    PSEUDO_COST = "pseudo-cost"


class NodeOrder(Enum):
    """Order in which open nodes are processed."""
    BEST_BOUND = "best-bound"
    DEPTH_FIRST = "depth-first"


class MIPStatus(Enum):
    """Final status of a branch-and-cut run."""
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolveParams:
    """Limits and strategy of a branch-and-cut run.

    Attributes:
        time_limit: Wall-clock limit in seconds.
        gap_tol: Relative gap at which the search stops.
        node_limit: Maximum nodes explored, None for no limit.
        root_cut_passes: Separation passes at the root, None for no limit.
        node_cut_passes: Separation passes at other nodes (integral points
            are always separated to completion).
        branching: Branching rule.
        node_order: Node selection order.
    """
    time_limit: float = 3600.0
    gap_tol: float = 1e-6
    node_limit: Optional[int] = None
    root_cut_passes: Optional[int] = None
    node_cut_passes: int = 3
    branching: BranchingRule = BranchingRule.MOST_FRACTIONAL
    node_order: NodeOrder = NodeOrder.BEST_BOUND

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if not self.gap_tol >= 0:
            raise ValueError("gap tolerance must be nonnegative")
        if self.node_limit is not None and self.node_limit <= 0:
            raise ValueError("node limit must be positive")
        if self.root_cut_passes is not None and self.root_cut_passes < 0:
            raise ValueError("root cut passes must be nonnegative")
        if self.node_cut_passes < 0:
            raise ValueError("node cut passes must be nonnegative")

    @classmethod
    def from_config(cls, **overrides) -> "SolveParams":
        """Parameters with the configured time limit and gap tolerance."""
        values = {
            'time_limit': float(get_setting('time_limit', DEFAULT_SETTINGS['time_limit'])),
            'gap_tol': get_tolerances().gap_tol,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class MIPResult:
    """Outcome of :func:`solve`.

    Attributes:
        status: Final status.
        upper_bound: Incumbent objective, ``inf`` without incumbent.
        lower_bound: Best proven bound.
        root_bound: Root LP value after the root cut loop.
        values: Incumbent values indexed like the built model, or None.
        hubs: 0-based indices of open hubs in the incumbent.
        nodes: Nodes explored.
        cuts: Supermodular rows added.
        seconds: Wall time.
        failed_nodes: Nodes whose LP did not finish; their parent bound
            stays in ``lower_bound`` and the status is at best FEASIBLE.
        progress: Rows ``(node, depth, lb, ub, gap, cuts)``.
        cut_log: Every emitted cut.
    """
    status: MIPStatus
    upper_bound: float
    lower_bound: float
    root_bound: float
    values: Optional[np.ndarray] = None
    hubs: Tuple[int, ...] = ()
    nodes: int = 0
    cuts: int = 0
    seconds: float = 0.0
    failed_nodes: int = 0
    progress: List[Tuple[int, int, float, float, float, int]] = field(default_factory=list)
    cut_log: CutLog = field(default_factory=CutLog)

    @property
    def gap(self) -> float:
        return relative_gap(self.lower_bound, self.upper_bound)

    @property
    def hub_labels(self) -> List[int]:
        """Open hubs, 1-based."""
        return [i + 1 for i in self.hubs]


@dataclass
class RootBound:
    """Converged root relaxation."""
    status: SolveStatus
    bound: float
    cuts: int
    passes: int
    values: np.ndarray


def relative_gap(lower, upper) -> float:
    if math.isinf(upper) or math.isinf(lower):
        return math.inf
    return max(upper - lower, 0.0) / max(1.0, abs(upper))


@dataclass(order=True)
class _Node:
    key: tuple
    depth: int = field(compare=False)
    bound: float = field(compare=False)
    fixings: Tuple[Tuple[int, float], ...] = field(compare=False, default=())
    basis: Optional[Basis] = field(compare=False, default=None)
    branch: Optional[Tuple[int, float, bool]] = field(compare=False, default=None)


class BranchAndCut:
    """One branch-and-cut run over a built model.

    Args:
        built: Model from :mod:`hubforge.formulations`.
        params: Limits and strategy.
        tolerances: Tolerance pack; defaults to the configured one.
    """

    def __init__(self, built: BuiltModel, params: Optional[SolveParams] = None,
                 tolerances: Optional[Tolerances] = None):
        if built.kind.supermodular and built.schedule is None:
            raise ValueError("a supermodular master needs its schedule")
        self.built = built
        self.params = params or SolveParams()
        self.tol = tolerances or get_tolerances()
        self.lp = relax(built.model)
        self.lp.name = f"{built.model.name}_lp"
        self.root_lower = self.lp.lower_bounds()
        self.root_upper = self.lp.upper_bounds()
        self.z_cols = built.z_columns()
        self.y_cols = built.y_columns() if built.y else np.zeros(0, dtype=int)
        self.eta_cols = built.eta_columns() if built.eta else np.zeros(0, dtype=int)
        self.cut_log = CutLog()
        self.cuts = 0
        self.passes = 0
        self._fixed: Dict[int, float] = {}
        # col -> [down sum, down count, up sum, up count]
        self.pseudo: Dict[int, List[float]] = {}
        self._seq = itertools.count()

    def _apply_fixings(self, fixings):
        wanted = dict(fixings)
        for col in set(self._fixed) - set(wanted):
            self.lp.set_bounds(col, self.root_lower[col], self.root_upper[col])
        for col, value in wanted.items():
            if self._fixed.get(col) != value:
                self.lp.set_bounds(col, value, value)
        self._fixed = wanted

    def _branch_column(self, x) -> Optional[int]:
        """Column to branch on, z before y; None when the point is integral."""
        itol = self.tol.integrality_tol
        for group in (self.z_cols, self.y_cols):
            if not len(group):
                continue
            frac = x[group] - np.floor(x[group])
            distance = np.minimum(frac, 1.0 - frac)
            candidates = np.flatnonzero(distance > itol)
            if not candidates.size:
                continue
            if self.params.branching is BranchingRule.PSEUDO_COST:
                cols = group[candidates]
                if all(self.pseudo.get(int(c), [0, 0, 0, 0])[1] and
                       self.pseudo.get(int(c), [0, 0, 0, 0])[3] for c in cols):
                    scores = []
                    for c, f in zip(cols, frac[candidates]):
                        down_sum, down_n, up_sum, up_n = self.pseudo[int(c)]
                        scores.append(min(down_sum / down_n * f, up_sum / up_n * (1 - f)))
                    return int(cols[int(np.argmax(scores))])
            return int(group[candidates[int(np.argmax(distance[candidates]))]])
        return None

    def _update_pseudo_cost(self, node: _Node, objective):
        if node.branch is None:
            return
        col, value, up = node.branch
        frac = value - math.floor(value)
        change = frac if not up else 1.0 - frac
        if change <= 0:
            return
        record = self.pseudo.setdefault(col, [0.0, 0, 0.0, 0])
        slot = 2 if up else 0
        record[slot] += max(objective - node.bound, 0.0) / change
        record[slot + 1] += 1

    def _node_lp(self, basis, cap, deadline) -> Tuple[LpResult, Basis, bool]:
        """Solve the node LP, separating supermodular rows.

        Returns:
            tuple: ``(result, basis, clean)``; ``clean`` is True when no
            violated row remains at the returned point.
        """
        result, basis = solve_lp(self.lp, basis, self.tol)
        if not self.built.kind.supermodular:
            return result, basis, True
        passes = 0
        while result.optimal:
            point = SeparationPoint.from_values(self.built, result.x)
            cuts, _stats = separate_all(self.built.schedule, point, result.x[self.eta_cols],
                                        self.tol.cut_violation_tol)
            if not cuts:
                return result, basis, True
            if time.perf_counter() > deadline:
                break
            if cap is not None and passes >= cap and self._branch_column(result.x) is not None:
                break
            passes += 1
            self.passes += 1
            self.cut_log.record(self.passes, cuts)
            self.cuts += len(cuts)
            rows = [cut_row(self.built, cut) for cut in cuts]
            result, basis = resolve_after(self.lp, rows, (), basis, self.tol)
        return result, basis, False

    def root(self) -> RootBound:
        """Run the root cut loop without branching."""
        deadline = time.perf_counter() + self.params.time_limit
        result, _basis, _clean = self._node_lp(None, self.params.root_cut_passes, deadline)
        bound = result.objective if result.optimal else \
            (math.inf if result.status is SolveStatus.INFEASIBLE else math.nan)
        return RootBound(result.status, bound, self.cuts, self.passes, result.x)

    def _key(self, bound, depth):
        seq = next(self._seq)
        if self.params.node_order is NodeOrder.DEPTH_FIRST:
            return (-depth, -seq)
        return (bound, seq)

    def _pruned(self, bound, upper):
        if math.isinf(upper):
            return False
        return upper - bound <= self.params.gap_tol * max(1.0, abs(upper))

    # pylint: disable=too-many-locals,too-many-branches,too-many-statements
    def solve(self) -> MIPResult:
        """Run the search to optimality or to a limit."""
        params = self.params
        started = time.perf_counter()
        deadline = started + params.time_limit
        heap = [_Node(self._key(-math.inf, 0), 0, -math.inf)]
        upper, incumbent = math.inf, None
        lower, root_bound = -math.inf, math.nan
        explored = failed = 0
        failed_bound = math.inf
        limited = False
        progress = []

        while heap:
            if time.perf_counter() > deadline or \
                    (params.node_limit is not None and explored >= params.node_limit):
                limited = True
                break
            open_bound = min([n.bound for n in heap] + [failed_bound])
            lower = max(lower, min(open_bound, upper))
            if self._pruned(lower, upper):
                break
            node = heapq.heappop(heap)
            if self._pruned(node.bound, upper):
                continue
            self._apply_fixings(node.fixings)
            explored += 1
            cap = params.root_cut_passes if node.depth == 0 else params.node_cut_passes
            result, basis, clean = self._node_lp(node.basis, cap, deadline)
            if node.depth == 0:
                root_bound = result.objective if result.optimal else \
                    (math.inf if result.status is SolveStatus.INFEASIBLE else math.nan)
            if result.status is SolveStatus.INFEASIBLE:
                logger.debug("Node %d infeasible", explored)
                continue
            if not result.optimal:
                failed += 1
                failed_bound = min(failed_bound, node.bound)
                logger.warning("Node %d LP ended with %s; its bound %s stays open",
                               explored, result.status.value, node.bound)
                continue
            bound = max(result.objective, node.bound)
            self._update_pseudo_cost(node, result.objective)
            if self._pruned(bound, upper):
                continue
            col = self._branch_column(result.x)
            if col is None:
                if not clean:
                    # the time limit hit while separating an integral point
                    heapq.heappush(heap, _Node(self._key(bound, node.depth), node.depth, bound,
                                               node.fixings, basis, None))
                    continue
                if bound < upper:
                    upper, incumbent = bound, result.x.copy()
                    logger.info("New incumbent %.6f at node %d (depth %d)",
                                upper, explored, node.depth)
            else:
                value = float(result.x[col])
                for target, up in ((0.0, False), (1.0, True)):
                    child = _Node(self._key(bound, node.depth + 1), node.depth + 1, bound,
                                  node.fixings + ((col, target),), basis, (col, value, up))
                    heapq.heappush(heap, child)
            current = min([n.bound for n in heap] + [failed_bound, upper])
            progress.append((explored, node.depth, max(lower, min(current, upper)), upper,
                             relative_gap(max(lower, current), upper), self.cuts))

        self._apply_fixings(())
        if failed and incumbent is None:
            raise NodeLpFailure(
                f"the LP failed at {failed} of {explored} nodes and no solution was found; "
                "infeasibility is not proven")
        if limited or failed:
            open_bound = min([n.bound for n in heap] + [failed_bound, upper])
            lower = max(lower, min(open_bound, upper))
            status = MIPStatus.FEASIBLE
            if failed:
                logger.warning("%d node LPs failed; the lower bound keeps their parent bounds",
                               failed)
            else:
                logger.info("Search stopped at a limit after %d nodes", explored)
        elif incumbent is None:
            status, lower = MIPStatus.INFEASIBLE, math.inf
        else:
            lower = upper if not heap else max(lower, min(min(n.bound for n in heap), upper))
            status = MIPStatus.OPTIMAL

        hubs = ()
        if incumbent is not None:
            hubs = tuple(int(i) for i in np.flatnonzero(incumbent[self.z_cols] > 0.5))
        seconds = time.perf_counter() - started
        logger.info("%s: %s, UB %s, LB %s, %d nodes, %d cuts, %.2fs",
                    self.built.model.name, status.value, upper, lower, explored,
                    self.cuts, seconds)
        return MIPResult(status=status, upper_bound=upper, lower_bound=lower,
                         root_bound=root_bound, values=incumbent, hubs=hubs, nodes=explored,
                         cuts=self.cuts, seconds=seconds, failed_nodes=failed,
                         progress=progress, cut_log=self.cut_log)


def solve(built: BuiltModel, params: Optional[SolveParams] = None,
          tolerances: Optional[Tolerances] = None) -> MIPResult:
    """Solve a built model to optimality (or to the limits in ``params``)."""
    return BranchAndCut(built, params, tolerances).solve()


def root_bound(built: BuiltModel, params: Optional[SolveParams] = None,
               tolerances: Optional[Tolerances] = None) -> RootBound:
    """Relaxation value after the root cut loop converges."""
    return BranchAndCut(built, params, tolerances).root()


def verify_closed_form(built: BuiltModel, values, objective=None, tol=None) -> float:
    """Evaluate ``sum f z + sum_r S_r(t_bar)`` at a master point.

    Args:
        built: Supermodular master.
        values: Primal vector of the master.
        objective: LP objective to compare against, if any.
        tol: Relative tolerance; defaults to the cut violation tolerance.

    Returns:
        float: The closed-form value.

    Raises:
        ValueError: If ``built`` is not a supermodular master.
        ClosedFormMismatch: If ``objective`` is given and differs by more
            than the tolerance.
    """
    if not built.kind.supermodular:
        raise ValueError(f"{built.kind.value} has no closed-form root value")
    values = np.asarray(values, dtype=float)
    point = SeparationPoint.from_values(built, values)
    total = float(np.dot(built.instance.setup, point.z))
    for r in range(built.instance.m):
        sched = built.schedule[r]
        t_bar = maximizing_index(sched, activations(sched, point))
        total += rhs_value(built.schedule, r, t_bar, point)
    if objective is not None:
        tol = get_tolerances().cut_violation_tol if tol is None else tol
        allowed = tol * (1.0 + abs(objective))
        if abs(total - objective) > allowed:
            raise ClosedFormMismatch(
                f"closed form {total:.9g} differs from LP objective {objective:.9g}")
    return total


def progress_csv(result: MIPResult) -> str:
    """CSV text ``node,depth,lb,ub,gap,cuts``."""
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=['node', 'depth', 'lb', 'ub', 'gap', 'cuts'])
    writer.writeheader()
    for node, depth, lb, ub, gap, cuts in result.progress:
        writer.writerow({'node': node, 'depth': depth, 'lb': repr(lb), 'ub': repr(ub),
                         'gap': repr(gap), 'cuts': cuts})
    return output.getvalue()
