"""Brute-force optima and LP bound cross-checks for small instances."""

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .branch_and_cut import root_bound
from .config import DEFAULT_SETTINGS, get_setting
from .costs import CostTables, compute_tables
from .formulations import FormulationKind, build
from .instance import Instance
from .linear_model import SolveStatus, relax
from .simplex import solve_lp

logger = logging.getLogger(__name__)

RELATIVE_TIE = 1e-12


class OracleSizeError(ValueError):
    """Raised when an instance is too large for exhaustive checks."""


class CrossCheckError(RuntimeError):
    """Raised by a strict cross-check when a bound relation fails."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(str(f) for f in self.failures))


@dataclass(frozen=True)
class OracleResult:
    """Exhaustive optimum over hub sets.

    Attributes:
        objective: Setup plus routing cost of the best hub set.
        hubs: Best hub set (0-based, ascending).
        pairs: Per commodity, the cheapest ``(i, j)`` inside the hub set.
        costs: Per commodity, the cost of that path.
        subsets: Number of hub sets evaluated.
        min_hubs: Smallest hub set size allowed.
    """
    objective: float
    hubs: Tuple[int, ...]
    pairs: Tuple[Tuple[int, int], ...]
    costs: Tuple[float, ...]
    subsets: int
    min_hubs: int = 2

    @property
    def hub_labels(self) -> List[int]:
        return [i + 1 for i in self.hubs]

    def summary(self) -> str:
        lines = [f"objective: {self.objective!r}",
                 f"hubs: {self.hub_labels}",
                 f"subsets evaluated: {self.subsets} (min hubs {self.min_hubs})"]
        for r, ((i, j), cost) in enumerate(zip(self.pairs, self.costs), start=1):
            lines.append(f"  commodity {r}: via {i + 1}-{j + 1} cost {cost!r}")
        return "\n".join(lines)

    def to_csv(self, instance: Instance) -> str:
        """Rows ``hubs,objective,r,origin,dest,i,j,cost`` (1-based)."""
        output = io.StringIO()
        writer = csv.DictWriter(output, fieldnames=['hubs', 'objective', 'r', 'origin', 'dest',
                                                    'i', 'j', 'cost'])
        writer.writeheader()
        hubs = " ".join(str(h) for h in self.hub_labels)
        for r, ((i, j), cost) in enumerate(zip(self.pairs, self.costs)):
            com = instance.commodities[r]
            writer.writerow({'hubs': hubs, 'objective': repr(self.objective), 'r': r + 1,
                             'origin': com.origin + 1, 'dest': com.dest + 1,
                             'i': i + 1, 'j': j + 1, 'cost': repr(float(cost))})
        return output.getvalue()


def routing_tensor(instance: Instance) -> np.ndarray:
    """(m, n, n) costs of o -> i -> j -> d paths, computed from raw data."""
    c = instance.cost
    out = np.empty((instance.m, instance.n, instance.n))
    for r, com in enumerate(instance.commodities):
        access = instance.gamma * c[com.origin]
        delivery = instance.theta * c[:, com.dest]
        out[r] = com.demand * (access[:, None] + instance.alpha * c + delivery[None, :])
    return out


def _max_nodes(key, explicit):
    if explicit is not None:
        return int(explicit)
    return int(get_setting(key, DEFAULT_SETTINGS[key]))


def enumerate_optimum(instance: Instance, tables: Optional[CostTables] = None, min_hubs=2,
                      forbid_unreachable_single_hubs=False, max_nodes=None) -> OracleResult:
    """Exact optimum over all hub sets with at least ``min_hubs`` hubs.

    Args:
        instance: The instance.
        tables: Cost tables; only needed to forbid single-hub routes through
            each commodity's farthest node.
        min_hubs: Smallest hub set size.
        forbid_unreachable_single_hubs: Disallow ``o -> u -> u -> d`` for u
            in U^r.
        max_nodes: Size guard; defaults to the configured ``oracle_max_nodes``.

    Returns:
        OracleResult: Best hub set; ties go to the lexicographically
        smallest set.

    Raises:
        OracleSizeError: If the instance exceeds the size guard.
        ValueError: If ``min_hubs`` is outside ``1..n``.
    """
    n = instance.n
    limit = _max_nodes('oracle_max_nodes', max_nodes)
    if n > limit:
        raise OracleSizeError(f"enumeration refused: n={n} exceeds the limit of {limit} nodes")
    if not 1 <= min_hubs <= n:
        raise ValueError(f"min_hubs must lie in 1..{n}")
    paths = routing_tensor(instance)
    if forbid_unreachable_single_hubs:
        tables = tables if tables is not None else compute_tables(instance)
        for r, farthest in enumerate(tables.Ur):
            for u in farthest:
                paths[r, u, u] = math.inf

    best, best_hubs, count = math.inf, None, 0
    for size in range(min_hubs, n + 1):
        for hubs in itertools.combinations(range(n), size):
            count += 1
            idx = np.array(hubs)
            routing = paths[:, idx][:, :, idx].reshape(instance.m, -1).min(axis=1) \
                if instance.m else np.zeros(0)
            value = float(instance.setup[idx].sum() + routing.sum())
            eps = RELATIVE_TIE * max(1.0, abs(best)) if math.isfinite(best) else 0.0
            if value < best - eps or (abs(value - best) <= eps and hubs < best_hubs):
                best, best_hubs = value, hubs
    if best_hubs is None or math.isinf(best):
        raise ValueError("no hub set can route every commodity")

    idx = np.array(best_hubs)
    pairs, costs = [], []
    for r in range(instance.m):
        block = paths[r][np.ix_(idx, idx)]
        a, b = np.unravel_index(int(np.argmin(block)), block.shape)
        pairs.append((int(idx[a]), int(idx[b])))
        costs.append(float(block[a, b]))
    logger.debug("Oracle on %s: %.6f with hubs %s over %d subsets", instance.name, best,
                 [h + 1 for h in best_hubs], count)
    return OracleResult(best, tuple(best_hubs), tuple(pairs), tuple(costs), count, min_hubs)


def single_hub_gap(instance: Instance, tables: Optional[CostTables] = None, max_nodes=None):
    """Compare the optimum allowing one hub with the optimum forcing two.

    Returns:
        tuple: ``(single, multi, gap)`` with ``gap = multi - single >= 0``.
        A positive gap means formulations forcing an interhub edge overstate
        the optimum on this instance.
    """
    single = enumerate_optimum(instance, tables, min_hubs=1, max_nodes=max_nodes)
    multi = enumerate_optimum(instance, tables, min_hubs=2, max_nodes=max_nodes)
    gap = multi.objective - single.objective
    if gap > 1e-9 * max(1.0, abs(multi.objective)):
        logger.warning("%s: a single hub %s beats every multi-hub solution by %.6g",
                       instance.name, single.hub_labels, gap)
    return single, multi, gap


def forbidden_single_hub_check(instance: Instance, tables: Optional[CostTables] = None,
                               min_hubs=2, max_nodes=None) -> bool:
    """Whether forbidding single-hub routes through each U^r node keeps the optimum.

    When the origin of a commodity is itself the node farthest from its
    destination, routing through that node alone can be strictly best, so
    this check may legitimately return False.
    """
    tables = tables if tables is not None else compute_tables(instance)
    if not any(tables.Ur):
        return True
    free = enumerate_optimum(instance, tables, min_hubs, max_nodes=max_nodes)
    try:
        restricted = enumerate_optimum(instance, tables, min_hubs,
                                       forbid_unreachable_single_hubs=True,
                                       max_nodes=max_nodes)
    except ValueError:
        return False
    same = abs(restricted.objective - free.objective) <= 1e-9 * max(1.0, abs(free.objective))
    if not same:
        logger.info("%s: forbidding farthest-node single hubs raises the optimum "
                    "from %.6g to %.6g", instance.name, free.objective, restricted.objective)
    return same


@dataclass(frozen=True)
class SingleHubCheck:
    """A solved optimum compared with the enumerated optimum allowing one hub."""
    formulation: str
    objective: float
    oracle: float
    oracle_hubs: Tuple[int, ...]
    passed: bool

    def __str__(self):
        if self.passed:
            return (f"single-hub check: {self.formulation} optimum {self.objective:.9g} "
                    f"matches the enumerated optimum")
        labels = [i + 1 for i in self.oracle_hubs]
        return (f"single-hub check FAILED: {self.formulation} optimum {self.objective:.9g} "
                f"is above the enumerated optimum {self.oracle:.9g} with hubs {labels}; "
                f"this formulation is not valid on this instance")


def check_single_hub_optimum(instance: Instance, kind: FormulationKind, objective,
                             tables: Optional[CostTables] = None, tol=1e-6,
                             max_nodes=None) -> Optional[SingleHubCheck]:
    """Check a CF or FZ optimum against the optimum over every hub set.

    CF and FZ formulations route each commodity through an interhub edge, so
    on instances whose best solution opens a single hub they overstate the
    optimum. The check enumerates hub sets of any size.

    Returns:
        SingleHubCheck or None: None for formulations the check does not
        apply to and for instances above ``cross_check_max_nodes`` (or
        ``max_nodes``).
    """
    if kind not in (FormulationKind.CF_P, FormulationKind.CF_S,
                    FormulationKind.FZ_P, FormulationKind.FZ_S):
        return None
    limit = _max_nodes('cross_check_max_nodes', max_nodes)
    if instance.n > limit:
        logger.info("%s: single-hub check skipped above %d nodes", instance.name, limit)
        return None
    best = enumerate_optimum(instance, tables, min_hubs=1, max_nodes=limit)
    passed = objective - best.objective <= tol * (1.0 + abs(best.objective))
    check = SingleHubCheck(kind.value, float(objective), best.objective, best.hubs, passed)
    if not passed:
        logger.warning("%s: %s", instance.name, check)
    return check


@dataclass(frozen=True)
class RelationReport:
    """One checked relation ``lhs op rhs``."""
    lhs: str
    op: str
    rhs: str
    lhs_value: float
    rhs_value: float
    holds: bool

    def __str__(self):
        verdict = "ok" if self.holds else "FAILED"
        return (f"{self.lhs} {self.op} {self.rhs}: {self.lhs_value:.9g} vs "
                f"{self.rhs_value:.9g} ({verdict})")


@dataclass
class BoundVector:
    """LP and root bounds of the six formulations."""
    sk: float
    hlpma: float
    cfp: float
    fzp: float
    cfs: float
    fzs: float
    relations: List[RelationReport] = field(default_factory=list)

    def value(self, kind: FormulationKind) -> float:
        return getattr(self, kind.value.lower().replace('_', ''))

    @property
    def ok(self) -> bool:
        return all(rel.holds for rel in self.relations)

    @property
    def failures(self) -> List[RelationReport]:
        return [rel for rel in self.relations if not rel.holds]

    @property
    def improvement(self) -> float:
        """Percent by which the FZ-S root bound exceeds the CF-S one."""
        if self.cfs == 0:
            return 0.0 if self.fzs == 0 else math.inf
        return 100.0 * (self.fzs - self.cfs) / abs(self.cfs)


def _relation(lhs, op, rhs, values, tol):
    a, b = values[lhs], values[rhs]
    slack = tol * (1 + max(abs(a), abs(b)))
    holds = abs(a - b) <= slack if op == "=" else a <= b + slack
    return RelationReport(lhs, op, rhs, a, b, holds)


def lp_bounds(instance: Instance, tables: Optional[CostTables] = None):
    """Relaxation values of every formulation, as a ``{label: value}`` dict."""
    tables = tables if tables is not None else compute_tables(instance)
    values = {}
    for kind in FormulationKind:
        built = build(kind, instance, tables)
        if kind.supermodular:
            root = root_bound(built)
            status, value = root.status, root.bound
        else:
            result, _basis = solve_lp(relax(built.model))
            status, value = result.status, result.objective
        if status is not SolveStatus.OPTIMAL:
            logger.warning("%s relaxation on %s ended with %s", kind.value, instance.name,
                           status.value)
        values[kind.value] = value
    return values


def lp_cross_check(instance: Instance, tables: Optional[CostTables] = None, tol=1e-6,
                   strict=False, max_nodes=None) -> BoundVector:
    """Solve all six relaxations and check the expected bound relations.

    Relations are reported in :attr:`BoundVector.relations`; with
    ``strict=True`` any failure raises :class:`CrossCheckError`.

    Raises:
        OracleSizeError: If the instance exceeds ``cross_check_max_nodes``.
        CrossCheckError: In strict mode, when a relation fails.
    """
    limit = _max_nodes('cross_check_max_nodes', max_nodes)
    if instance.n > limit:
        raise OracleSizeError(
            f"cross-check refused: n={instance.n} exceeds the limit of {limit} nodes")
    values = lp_bounds(instance, tables)
    relations = [
        _relation("FZ_P", "=", "HLP_MA", values, tol),
        _relation("FZ_S", "=", "FZ_P", values, tol),
        _relation("CF_S", "=", "CF_P", values, tol),
        _relation("CF_P", "<=", "HLP_MA", values, tol),
        _relation("SK", "<=", "HLP_MA", values, tol),
    ]
    bounds = BoundVector(sk=values["SK"], hlpma=values["HLP_MA"], cfp=values["CF_P"],
                         fzp=values["FZ_P"], cfs=values["CF_S"], fzs=values["FZ_S"],
                         relations=relations)
    for failure in bounds.failures:
        logger.info("%s: %s", instance.name, failure)
    if strict and not bounds.ok:
        raise CrossCheckError(bounds.failures)
    return bounds
