"""Model builders for the six MA-HLP formulations.

Variable names are 1-based: ``z_<i>``, ``y_<i>_<j>``, ``y_tilde``,
``eta_<r>``, ``x_<r>_<i>_<j>`` (edge flows) and ``X_<r>_<i>_<j>`` (path
flows over ordered pairs).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from .costs import (
    CostTables, ScheduleKind, ScheduleVariant, SortedSchedule, build_schedule,
    compute_tables, sentinel_is_safe)
from .instance import Instance
from .linear_model import Model, Sense, VarRef

logger = logging.getLogger(__name__)


class FormulationKind(Enum):
    """Supported formulations."""
    SK = "SK"
    HLP_MA = "HLP_MA"
    CF_P = "CF_P"
    FZ_P = "FZ_P"
    CF_S = "CF_S"
    FZ_S = "FZ_S"

    @property
    def supermodular(self) -> bool:
        return self in (FormulationKind.CF_S, FormulationKind.FZ_S)

    @property
    def needs_two_hubs(self) -> bool:
        """Whether every feasible integer point opens at least two hubs."""
        return self in (FormulationKind.CF_P, FormulationKind.FZ_P, FormulationKind.CF_S)

    @classmethod
    def parse(cls, text) -> "FormulationKind":
        """Accept ``CF-P``, ``cf_p``, ``cfp`` or ``CF_P``."""
        key = str(text).strip().upper().replace('-', '').replace('_', '')
        for kind in cls:
            if kind.value.replace('_', '') == key:
                return kind
        choices = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown formulation {text!r}; choose from {choices}")


@dataclass
class BuiltModel:
    """A formulation instantiated for one instance.

    Attributes:
        kind: Formulation kind.
        model: The model (integrality marks set).
        instance: Source instance.
        tables: Cost tables used for the coefficients.
        z: Node -> hub variable.
        y: Edge index -> edge variable; masters also map the fictitious edge.
        eta: Commodity -> routing cost variable (masters only).
        x: (commodity, edge) -> edge flow (CF-P, FZ-P).
        X: (commodity, i, j) -> path flow (SK, HLP_MA).
        schedule: Sorted schedule feeding lazy separation (masters only).
        entry_columns: Per commodity, the model column of every schedule
            entry (masters only).
    """
    kind: FormulationKind
    model: Model
    instance: Instance
    tables: CostTables
    z: Dict[int, VarRef] = field(default_factory=dict)
    y: Dict[int, VarRef] = field(default_factory=dict)
    eta: Dict[int, VarRef] = field(default_factory=dict)
    x: Dict[Tuple[int, int], VarRef] = field(default_factory=dict)
    X: Dict[Tuple[int, int, int], VarRef] = field(default_factory=dict)
    schedule: Optional[SortedSchedule] = None
    entry_columns: Tuple[np.ndarray, ...] = ()

    def hub_values(self, values) -> np.ndarray:
        """z values of a primal vector, ordered by node."""
        values = np.asarray(values, dtype=float)
        return np.array([values[self.z[i].id] for i in range(self.instance.n)])

    def z_columns(self) -> np.ndarray:
        return np.array([self.z[i].id for i in range(self.instance.n)], dtype=int)

    def y_columns(self) -> np.ndarray:
        """Edge variable columns, including the fictitious edge when present."""
        return np.array([self.y[e].id for e in sorted(self.y)], dtype=int)

    def eta_columns(self) -> np.ndarray:
        return np.array([self.eta[r].id for r in range(self.instance.m)], dtype=int)


def _edge_name(prefix, i, j):
    return f"{prefix}_{i + 1}_{j + 1}"


def _add_hubs(built: BuiltModel):
    for i in range(built.instance.n):
        built.z[i] = built.model.add_var(f"z_{i + 1}", 0, 1, integral=True,
                                         obj=built.instance.setup[i])


def _add_edges(built: BuiltModel, link: bool):
    model = built.model
    for e, (i, j) in enumerate(built.tables.edges):
        built.y[e] = model.add_var(_edge_name("y", i, j), 0, 1, integral=True)
    if not link:
        return
    for e, (i, j) in enumerate(built.tables.edges):
        model.add_constraint({built.y[e]: 1, built.z[i]: -1}, Sense.LE, 0, f"link e={e} i={i + 1}")
        model.add_constraint({built.y[e]: 1, built.z[j]: -1}, Sense.LE, 0, f"link e={e} j={j + 1}")


def _new(kind, instance, tables, name=None):
    tables = tables if tables is not None else compute_tables(instance)
    model = Model(name or f"{kind.value}_{instance.name}")
    return BuiltModel(kind=kind, model=model, instance=instance, tables=tables)


def _add_path_flows(built: BuiltModel):
    """X_rij over all ordered pairs with C_rij costs and route-all rows."""
    n = built.instance.n
    model = built.model
    for r in range(built.instance.m):
        paths = built.tables.path_matrix(r)
        for i in range(n):
            for j in range(n):
                built.X[r, i, j] = model.add_var(f"X_{r + 1}_{i + 1}_{j + 1}", 0, 1,
                                                 obj=paths[i, j])
        model.add_constraint({built.X[r, i, j]: 1 for i in range(n) for j in range(n)},
                             Sense.EQ, 1, f"route-all r={r + 1}")


def build_sk(instance: Instance, tables: Optional[CostTables] = None) -> BuiltModel:
    """Path formulation with separate out- and in-capacity rows per hub."""
    built = _new(FormulationKind.SK, instance, tables)
    _add_hubs(built)
    _add_path_flows(built)
    n = instance.n
    for r in range(instance.m):
        for i in range(n):
            expr = {built.X[r, i, j]: 1 for j in range(n)}
            expr[built.z[i]] = -1
            built.model.add_constraint(expr, Sense.LE, 0, f"first-hub r={r + 1} i={i + 1}")
        for j in range(n):
            expr = {built.X[r, i, j]: 1 for i in range(n)}
            expr[built.z[j]] = -1
            built.model.add_constraint(expr, Sense.LE, 0, f"second-hub r={r + 1} j={j + 1}")
    logger.debug("Built %s", built.model.stats())
    return built


def build_hlpma(instance: Instance, tables: Optional[CostTables] = None) -> BuiltModel:
    """Path formulation with the merged hub rows
    ``X_rii + sum_{j != i} (X_rij + X_rji) <= z_i``."""
    built = _new(FormulationKind.HLP_MA, instance, tables)
    _add_hubs(built)
    _add_path_flows(built)
    n = instance.n
    for r in range(instance.m):
        for i in range(n):
            expr = {built.X[r, i, i]: 1}
            for j in range(n):
                if j != i:
                    expr[built.X[r, i, j]] = 1
                    expr[built.X[r, j, i]] = 1
            expr[built.z[i]] = -1
            built.model.add_constraint(expr, Sense.LE, 0, f"hub r={r + 1} i={i + 1}")
    logger.debug("Built %s", built.model.stats())
    return built


def single_hub_dominates(instance: Instance, tables: CostTables) -> bool:
    """True when some single hub provably beats every multi-hub solution.

    Compares the best single-hub objective with a lower bound on any
    solution opening two or more hubs.
    """
    if instance.n < 2:
        return True
    single = float(np.min(instance.setup + tables.H.sum(axis=0)))
    setup = np.sort(instance.setup)
    multi_bound = float(setup[0] + setup[1] + tables.Fbar.min(axis=1).sum())
    return single < multi_bound


def _edge_flow_model(kind, instance, tables):
    built = _new(kind, instance, tables)
    if single_hub_dominates(instance, built.tables):
        logger.warning("%s on %s: a single hub beats every multi-hub solution; "
                       "this formulation forces an interhub edge and will overstate "
                       "the optimum", kind.value, instance.name)
    _add_hubs(built)
    _add_edges(built, link=kind is FormulationKind.CF_P)
    model = built.model
    for r in range(instance.m):
        for e, (i, j) in enumerate(built.tables.edges):
            built.x[r, e] = model.add_var(f"x_{r + 1}_{i + 1}_{j + 1}", 0, 1,
                                          obj=built.tables.Fbar[r, e])
        model.add_constraint({built.x[r, e]: 1 for e in range(len(built.tables.edges))},
                             Sense.EQ, 1, f"route-all r={r + 1}")
        for e in range(len(built.tables.edges)):
            model.add_constraint({built.x[r, e]: 1, built.y[e]: -1}, Sense.LE, 0,
                                 f"edge-open r={r + 1} e={e}")
    return built


def build_cfp(instance: Instance, tables: Optional[CostTables] = None) -> BuiltModel:
    """Edge formulation with y_e <= z_i, y_e <= z_j linking rows."""
    built = _edge_flow_model(FormulationKind.CF_P, instance, tables)
    logger.debug("Built %s", built.model.stats())
    return built


def build_fzp(instance: Instance, tables: Optional[CostTables] = None) -> BuiltModel:
    """Edge formulation whose linking rows are per-commodity stars
    ``sum_{e in delta(i)} x_re <= z_i``."""
    built = _edge_flow_model(FormulationKind.FZ_P, instance, tables)
    n = instance.n
    incident = {i: [e for e, (a, b) in enumerate(built.tables.edges) if i in (a, b)]
                for i in range(n)}
    for r in range(instance.m):
        for i in range(n):
            expr = {built.x[r, e]: 1 for e in incident[i]}
            expr[built.z[i]] = -1
            built.model.add_constraint(expr, Sense.LE, 0, f"star r={r + 1} i={i + 1}")
    logger.debug("Built %s", built.model.stats())
    return built


def build_super_master(instance: Instance, tables: Optional[CostTables] = None,
                       variant: ScheduleVariant = ScheduleVariant.FZS,
                       seed_cuts=False) -> BuiltModel:
    """Master of a supermodular formulation; routing rows arrive lazily.

    Args:
        instance: The instance.
        tables: Cost tables, computed when omitted.
        variant: CFS or FZS schedule.
        seed_cuts: Add ``eta_r >= v_r1`` for every commodity up front.

    Returns:
        BuiltModel: Master with z, y (plus ``y_tilde``) and eta columns.
    """
    kind = FormulationKind.CF_S if variant is ScheduleVariant.CFS else FormulationKind.FZ_S
    built = _new(kind, instance, tables)
    tables = built.tables
    if not sentinel_is_safe(instance, tables):
        logger.warning("%s on %s: setup costs dwarf the sentinel; the empty hub set may "
                       "look optimal", kind.value, instance.name)
    _add_hubs(built)
    _add_edges(built, link=True)
    built.y[tables.sentinel] = built.model.add_var("y_tilde", 0, 1, integral=True)
    for r in range(instance.m):
        built.eta[r] = built.model.add_var(f"eta_{r + 1}", 0, np.inf, obj=1.0)
    built.schedule = build_schedule(instance, tables, variant)

    columns = []
    for r in range(instance.m):
        sched = built.schedule[r]
        cols = [built.z[ref].id if kind_ is ScheduleKind.Z else built.y[ref].id
                for kind_, ref in zip(sched.kinds, sched.refs)]
        columns.append(np.array(cols, dtype=int))
    built.entry_columns = tuple(columns)

    if seed_cuts:
        for r in range(instance.m):
            built.model.add_constraint({built.eta[r]: 1}, Sense.GE,
                                       built.schedule[r].values[0], f"seed r={r + 1}")
    logger.debug("Built %s", built.model.stats())
    return built


def build(kind, instance: Instance, tables: Optional[CostTables] = None,
          seed_cuts=False) -> BuiltModel:
    """Dispatch to the builder of ``kind`` (a FormulationKind or its name)."""
    kind = kind if isinstance(kind, FormulationKind) else FormulationKind.parse(kind)
    builders = {
        FormulationKind.SK: build_sk,
        FormulationKind.HLP_MA: build_hlpma,
        FormulationKind.CF_P: build_cfp,
        FormulationKind.FZ_P: build_fzp,
    }
    if kind is FormulationKind.CF_S:
        return build_super_master(instance, tables, ScheduleVariant.CFS, seed_cuts)
    if kind is FormulationKind.FZ_S:
        return build_super_master(instance, tables, ScheduleVariant.FZS, seed_cuts)
    return builders[kind](instance, tables)
