"""Run records, comparison tables and instance loading for the CLI."""

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .branch_and_cut import MIPResult, MIPStatus, SolveParams, root_bound, solve
from .costs import ScheduleVariant, build_schedule, compute_tables
from .formulations import BuiltModel, FormulationKind, build
from .instance import (
    Instance, load_ap, load_cab, load_setup_file, parse_canonical, scale_setup,
    surrogate_setup, validate)
from .oracle import BoundVector, SingleHubCheck, check_single_hub_optimum, lp_cross_check
from .routing import Routing, RoutingError, edges_of_hubs, recover_integer

logger = logging.getLogger(__name__)

INSTANCE_FORMATS = ("hli", "cab", "ap")

RUN_FIELDS = ['instance', 'n', 'alpha', 'formulation', 'status', 'ub', 'lb', 'lb_root',
              'cpu', 'nodes', 'cuts', 'hubs']

BOUND_FIELDS = ['instance', 'n', 'alpha', 'formulation', 'bound', 'status', 'cuts', 'passes']

RELATION_LABELS = ['fzp_eq_hlpma', 'fzs_eq_fzp', 'cfs_eq_cfp', 'cfp_le_hlpma', 'sk_le_hlpma']

COMPARE_FIELDS = (['instance', 'n', 'alpha', 'sk', 'hlpma', 'cfp', 'fzp', 'cfs', 'fzs',
                   'improvement'] + RELATION_LABELS)


def _flows(instance: Instance) -> np.ndarray:
    flows = np.zeros((instance.n, instance.n))
    for com in instance.commodities:
        flows[com.origin, com.dest] += com.demand
    return flows


def with_surrogate_setup(instance: Instance, mean: Optional[float] = None) -> Instance:
    """Replace setup costs by outflow-proportional ones.

    Without ``mean`` the average setup is half the total direct routing
    cost spread over the nodes.
    """
    if mean is None:
        direct = sum(c.demand * instance.cost[c.origin, c.dest] for c in instance.commodities)
        mean = 0.5 * direct / instance.n
    return instance.replace(setup=surrogate_setup(_flows(instance), mean))


def load_instance(path, fmt="hli", n=None, alpha=None, gamma=None, theta=None,
                  setup_file=None, setup_factor=None, setup_mean=None) -> Instance:
    """Read an instance file and apply the command-line overrides.

    Args:
        path: File to read.
        fmt: One of ``hli``, ``cab`` or ``ap``.
        n: Node prefix for raw datasets; required for ``cab`` and ``ap``.
        alpha: Interhub discount override.
        gamma: Access factor override.
        theta: Distribution factor override.
        setup_file: Whitespace separated setup costs replacing the file's.
        setup_factor: Multiplier applied to the setup costs last.
        setup_mean: Mean of surrogate setup costs for raw datasets without
            a setup file.

    Raises:
        InstanceFormatError: On malformed input.
        ValueError: On contradictory options or an invalid instance.
    """
    if fmt not in INSTANCE_FORMATS:
        raise ValueError(f"unknown instance format '{fmt}'")
    with open(path, 'r', encoding='utf-8') as handle:
        raw = handle.read()
    name = Path(path).stem
    if fmt == "hli":
        instance = parse_canonical(raw, name=name)
        if n is not None and n != instance.n:
            raise ValueError(f"--n {n} does not match the {instance.n} nodes of {path}")
        overrides = {k: v for k, v in (('alpha', alpha), ('gamma', gamma), ('theta', theta))
                     if v is not None}
        if overrides:
            instance = instance.replace(**overrides)
        if setup_file is not None:
            instance = instance.replace(setup=load_setup_file(setup_file, instance.n))
    else:
        if n is None:
            raise ValueError(f"--n is required for {fmt} datasets")
        loader = load_cab if fmt == "cab" else load_ap
        setup = load_setup_file(setup_file, n) if setup_file is not None else np.zeros(n)
        instance = loader(raw, n, 0.5 if alpha is None else alpha,
                          1.0 if gamma is None else gamma, 1.0 if theta is None else theta,
                          setup, name=f"{name}{n}")
        if setup_file is None:
            instance = with_surrogate_setup(instance, setup_mean)
    if setup_factor is not None:
        instance = scale_setup(instance, setup_factor)
    report = validate(instance)
    for warning in report.warnings:
        logger.warning("%s: %s", instance.name, warning)
    if not report.ok:
        raise ValueError(f"invalid instance {instance.name}: " + "; ".join(report.errors))
    return instance


def _fmt(value) -> str:
    return repr(float(value))


@dataclass
class RunRecord:
    """One solve, as written to the run CSV."""
    instance: str
    n: int
    alpha: float
    formulation: str
    status: str
    ub: float
    lb: float
    lb_root: float
    cpu: float
    nodes: int
    cuts: int
    hubs: List[int] = field(default_factory=list)

    @classmethod
    def from_result(cls, instance: Instance, kind: FormulationKind,
                    result: MIPResult) -> "RunRecord":
        return cls(instance=instance.name, n=instance.n, alpha=instance.alpha,
                   formulation=kind.value, status=result.status.value,
                   ub=result.upper_bound, lb=result.lower_bound, lb_root=result.root_bound,
                   cpu=result.seconds, nodes=result.nodes, cuts=result.cuts,
                   hubs=result.hub_labels)

    def as_row(self) -> Dict[str, str]:
        return {'instance': self.instance, 'n': str(self.n), 'alpha': _fmt(self.alpha),
                'formulation': self.formulation, 'status': self.status,
                'ub': _fmt(self.ub), 'lb': _fmt(self.lb), 'lb_root': _fmt(self.lb_root),
                'cpu': f"{self.cpu:.3f}", 'nodes': str(self.nodes), 'cuts': str(self.cuts),
                'hubs': str(self.hubs)}

    def text_block(self) -> str:
        """Human readable summary of the run."""
        gap = "n/a" if not np.isfinite(self.ub) or not np.isfinite(self.lb) else \
            f"{100.0 * max(self.ub - self.lb, 0.0) / max(1.0, abs(self.ub)):.4f}%"
        return "\n".join([
            f"instance:    {self.instance} (n={self.n}, alpha={self.alpha})",
            f"formulation: {self.formulation}",
            f"status:      {self.status}",
            f"bounds:      UB {self.ub!r}  LB {self.lb!r}  root {self.lb_root!r}  gap {gap}",
            f"search:      {self.nodes} nodes, {self.cuts} cuts, {self.cpu:.2f}s",
            f"hubs:        {self.hubs}",
        ])


def _write_rows(fieldnames, rows) -> str:
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return output.getvalue()


def records_csv(records: Sequence[RunRecord]) -> str:
    """CSV text of run records, one row each."""
    return _write_rows(RUN_FIELDS, [record.as_row() for record in records])


def recover_routing(built: BuiltModel, result: MIPResult) -> Optional[Routing]:
    """Integer routing of the incumbent, or None when there is none.

    Masters use their own schedule and edge values; other formulations are
    routed through the edge schedule (two or more hubs) or the merged one.
    """
    if result.values is None:
        return None
    tables = built.tables
    z = np.zeros(built.instance.n)
    z[list(result.hubs)] = 1.0
    if built.kind.supermodular:
        schedule = built.schedule
        y = np.asarray(result.values)[built.y_columns()]
    else:
        variant = ScheduleVariant.CFS if len(result.hubs) >= 2 else ScheduleVariant.FZS
        schedule = build_schedule(built.instance, tables, variant)
        y = edges_of_hubs(tables, result.hubs)
    try:
        return recover_integer(schedule, tables, z, y)
    except RoutingError as exc:
        logger.warning("%s: no routing for hubs %s: %s", built.instance.name,
                       result.hub_labels, exc)
        return None


@dataclass
class SolveRun:
    """Everything a solve command reports."""
    record: RunRecord
    result: MIPResult
    built: BuiltModel
    routing: Optional[Routing] = None
    hub_check: Optional[SingleHubCheck] = None

    def routing_csv(self) -> Optional[str]:
        return self.routing.to_csv(self.built.tables) if self.routing is not None else None


def run_solve(instance: Instance, kind: FormulationKind, params: Optional[SolveParams] = None,
              seed_cuts=False) -> SolveRun:
    """Build, solve and route one formulation."""
    tables = compute_tables(instance)
    built = build(kind, instance, tables, seed_cuts=seed_cuts)
    logger.info("Solving %s with %s: %s", instance.name, kind.value, built.model.stats())
    result = solve(built, params)
    hub_check = None
    if result.status is MIPStatus.OPTIMAL:
        hub_check = check_single_hub_optimum(instance, kind, result.upper_bound, tables)
    return SolveRun(RunRecord.from_result(instance, kind, result), result, built,
                    recover_routing(built, result), hub_check)


def exit_code(status: MIPStatus) -> int:
    """0 on proven optimality, 2 when a limit stopped the search, else 1."""
    if status is MIPStatus.OPTIMAL:
        return 0
    if status is MIPStatus.FEASIBLE:
        return 2
    return 1


def bound_rows(instance: Instance, kinds: Sequence[FormulationKind],
               params: Optional[SolveParams] = None) -> List[Dict[str, str]]:
    """Root bounds (after cut convergence for masters) of the given formulations."""
    tables = compute_tables(instance)
    rows = []
    for kind in kinds:
        root = root_bound(build(kind, instance, tables), params)
        rows.append({'instance': instance.name, 'n': str(instance.n),
                     'alpha': _fmt(instance.alpha), 'formulation': kind.value,
                     'bound': _fmt(root.bound), 'status': root.status.value,
                     'cuts': str(root.cuts), 'passes': str(root.passes)})
    return rows


def bounds_csv(rows) -> str:
    return _write_rows(BOUND_FIELDS, rows)


def compare_row(instance: Instance, bounds: BoundVector) -> Dict[str, str]:
    """One comparison row: the six bounds, the FZ-S improvement and relation flags."""
    row = {'instance': instance.name, 'n': str(instance.n), 'alpha': _fmt(instance.alpha),
           'sk': _fmt(bounds.sk), 'hlpma': _fmt(bounds.hlpma), 'cfp': _fmt(bounds.cfp),
           'fzp': _fmt(bounds.fzp), 'cfs': _fmt(bounds.cfs), 'fzs': _fmt(bounds.fzs),
           'improvement': f"{bounds.improvement:.6f}"}
    for label, relation in zip(RELATION_LABELS, bounds.relations):
        row[label] = "ok" if relation.holds else "FAILED"
    return row


def _compare_one(job):
    instance, tol, max_nodes = job
    started = time.perf_counter()
    bounds = lp_cross_check(instance, tol=tol, max_nodes=max_nodes)
    logger.info("Compared %s in %.2fs", instance.name, time.perf_counter() - started)
    if bounds.improvement < -1e-6:
        logger.warning("%s: FZ-S root bound below CF-S by %.4f%%", instance.name,
                       -bounds.improvement)
    return compare_row(instance, bounds)


def compare_instances(instances: Sequence[Instance], tol=1e-6, max_nodes=None,
                      jobs=1) -> List[Dict[str, str]]:
    """Comparison rows in input order, optionally computed in worker processes."""
    work = [(instance, tol, max_nodes) for instance in instances]
    if jobs <= 1 or len(work) <= 1:
        return [_compare_one(job) for job in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_compare_one, work))


def compare_csv(rows) -> str:
    return _write_rows(COMPARE_FIELDS, rows)
