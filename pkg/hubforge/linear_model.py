"""Mixed-integer linear model container with free-format MPS export."""

import io
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ZERO_DROP = 1e-12


class ModelError(ValueError):
    """Raised when a model is built or used inconsistently."""


class Sense(Enum):
    """Constraint sense."""
    LE = "<="
    EQ = "="
    GE = ">="

    @property
    def mps_code(self) -> str:
        return {Sense.LE: 'L', Sense.EQ: 'E', Sense.GE: 'G'}[self]


class SolveStatus(Enum):
    """Outcome of an LP or MIP solve."""
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class VarRef:
    """Handle to a model column.

    Attributes:
        id: Dense column index.
        name: Unique name without whitespace.
        lower: Lower bound, possibly ``-inf``.
        upper: Upper bound, possibly ``inf``.
        integral: Integrality mark.
    """
    id: int
    name: str
    lower: float = 0.0
    upper: float = math.inf
    integral: bool = False


@dataclass(frozen=True)
class Constraint:
    """Canonical row: terms sorted by column id, duplicates merged."""
    terms: Tuple[Tuple[int, float], ...]
    sense: Sense
    rhs: float
    tag: str = ""


@dataclass
class Solution:
    """Primal (and for LPs dual) values of a solve.

    Attributes:
        status: Solve outcome.
        objective: Objective value, ``nan`` when not optimal.
        values: Primal values indexed by column id.
        duals: Row duals for LPs, else None.
        reduced_costs: Column reduced costs for LPs, else None.
    """
    status: SolveStatus
    objective: float
    values: np.ndarray
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None

    def value(self, var: Union[VarRef, int]) -> float:
        return float(self.values[var.id if isinstance(var, VarRef) else var])


Expression = Union[Dict[Union[VarRef, int], float], List[Tuple[Union[VarRef, int], float]]]


class Model:
    """Append-only minimization model.

    Columns and rows are never removed; branching is expressed through
    :meth:`set_bounds`.
    """

    def __init__(self, name="model", zero_drop=ZERO_DROP):
        self.name = name
        self.zero_drop = zero_drop
        self.vars: List[VarRef] = []
        self.objective: List[float] = []
        self.constraints: List[Constraint] = []
        self._names: Dict[str, int] = {}
        self._dense: Optional[np.ndarray] = None

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def nonzeros(self) -> int:
        return sum(len(row.terms) for row in self.constraints)

    @property
    def is_mip(self) -> bool:
        return any(v.integral for v in self.vars)

    def add_var(self, name, lower=0.0, upper=math.inf, integral=False, obj=0.0) -> VarRef:
        """Register a column.

        Args:
            name: Unique, whitespace-free name.
            lower: Lower bound.
            upper: Upper bound.
            integral: Integrality mark.
            obj: Objective coefficient.

        Returns:
            VarRef: Handle with the next dense id.

        Raises:
            ModelError: On duplicate names or inverted bounds.
        """
        if not name or any(ch.isspace() for ch in name):
            raise ModelError(f"invalid variable name {name!r}")
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        lower, upper = float(lower), float(upper)
        if lower > upper:
            raise ModelError(f"inverted bounds for {name}: [{lower}, {upper}]")
        var = VarRef(len(self.vars), name, lower, upper, bool(integral))
        self.vars.append(var)
        self.objective.append(float(obj))
        self._names[name] = var.id
        return var

    def var(self, name) -> VarRef:
        """Look a column up by name."""
        try:
            return self.vars[self._names[name]]
        except KeyError as exc:
            raise ModelError(f"unknown variable {name!r}") from exc

    def _column(self, ref) -> int:
        if isinstance(ref, VarRef):
            if ref.id >= len(self.vars) or self.vars[ref.id].name != ref.name:
                raise ModelError(f"variable {ref.name!r} is not registered in {self.name}")
            return ref.id
        idx = int(ref)
        if not 0 <= idx < len(self.vars):
            raise ModelError(f"column index {idx} out of range")
        return idx

    def canonicalize(self, expr: Expression) -> Tuple[Tuple[int, float], ...]:
        """Merge duplicate terms, drop tiny coefficients and sort by id."""
        items = expr.items() if isinstance(expr, dict) else expr
        merged: Dict[int, float] = {}
        for ref, coeff in items:
            col = self._column(ref)
            merged[col] = merged.get(col, 0.0) + float(coeff)
        return tuple((col, coeff) for col, coeff in sorted(merged.items())
                     if abs(coeff) >= self.zero_drop)

    def add_constraint(self, expr: Expression, sense: Sense, rhs, tag="") -> int:
        """Append a canonicalized row and return its index.

        Raises:
            ModelError: If a term references an unregistered variable.
        """
        row = Constraint(self.canonicalize(expr), Sense(sense), float(rhs), tag)
        self.constraints.append(row)
        return len(self.constraints) - 1

    def set_bounds(self, var: Union[VarRef, int], lower=None, upper=None) -> VarRef:
        """Change the bounds of a column; None keeps the current value."""
        col = self._column(var)
        current = self.vars[col]
        lower = current.lower if lower is None else float(lower)
        upper = current.upper if upper is None else float(upper)
        if lower > upper:
            raise ModelError(f"inverted bounds for {current.name}: [{lower}, {upper}]")
        updated = replace(current, lower=lower, upper=upper)
        self.vars[col] = updated
        return updated

    def set_objective(self, var: Union[VarRef, int], coeff):
        self.objective[self._column(var)] = float(coeff)

    def copy(self, name=None) -> "Model":
        """Independent copy sharing the immutable row and column records."""
        clone = Model(name or self.name, self.zero_drop)
        clone.vars = list(self.vars)
        clone.objective = list(self.objective)
        clone.constraints = list(self.constraints)
        clone._names = dict(self._names)  # pylint: disable=protected-access
        return clone

    def lower_bounds(self) -> np.ndarray:
        return np.array([v.lower for v in self.vars], dtype=float)

    def upper_bounds(self) -> np.ndarray:
        return np.array([v.upper for v in self.vars], dtype=float)

    def objective_vector(self) -> np.ndarray:
        return np.array(self.objective, dtype=float)

    def rhs_vector(self) -> np.ndarray:
        return np.array([row.rhs for row in self.constraints], dtype=float)

    def dense_matrix(self) -> np.ndarray:
        """Row-major constraint matrix, extended incrementally as rows arrive."""
        rows, cols = len(self.constraints), len(self.vars)
        cached = self._dense
        if cached is None or cached.shape[1] != cols or cached.shape[0] > rows:
            start, matrix = 0, np.zeros((rows, cols))
        else:
            start = cached.shape[0]
            matrix = np.vstack((cached, np.zeros((rows - start, cols))))
        for k in range(start, rows):
            for col, coeff in self.constraints[k].terms:
                matrix[k, col] = coeff
        self._dense = matrix
        return matrix

    def evaluate(self, values) -> float:
        """Objective value of a primal vector."""
        return float(np.dot(self.objective_vector(), np.asarray(values, dtype=float)))

    def max_violation(self, values) -> float:
        """Largest bound or row violation of a primal vector."""
        x = np.asarray(values, dtype=float)
        worst = 0.0
        if len(x):
            worst = max(float(np.max(self.lower_bounds() - x)),
                        float(np.max(x - self.upper_bounds())), 0.0)
        if self.constraints:
            activity = self.dense_matrix() @ x
            for row, act in zip(self.constraints, activity):
                if row.sense is Sense.LE:
                    worst = max(worst, act - row.rhs)
                elif row.sense is Sense.GE:
                    worst = max(worst, row.rhs - act)
                else:
                    worst = max(worst, abs(act - row.rhs))
        return worst

    def stats(self) -> str:
        """One-line statistics."""
        integral = sum(v.integral for v in self.vars)
        return (f"{self.name}: {self.num_vars} vars ({integral} integral), "
                f"{self.num_constraints} constraints, {self.nonzeros} nonzeros")


def relax(model: Model) -> Model:
    """Copy of ``model`` with every integrality mark cleared."""
    relaxed = model.copy()
    relaxed.vars = [replace(v, integral=False) if v.integral else v for v in relaxed.vars]
    return relaxed


def _num(value) -> str:
    text = repr(0.0 if value == 0 else float(value))
    return text[:-2] if text.endswith('.0') else text


def export_mps(model: Model) -> str:
    """Write ``model`` as free-format MPS.

    Rows are named ``c<k>`` (1-based); integral columns are wrapped in
    INTORG/INTEND markers and every column carries explicit bounds.
    """
    columns: List[List[Tuple[str, float]]] = [[] for _ in model.vars]
    for col, coeff in enumerate(model.objective):
        if coeff != 0:
            columns[col].append(('OBJ', coeff))
    for k, row in enumerate(model.constraints, start=1):
        for col, coeff in row.terms:
            columns[col].append((f"c{k}", coeff))

    out = io.StringIO()
    out.write(f"NAME {model.name}\n")
    out.write("ROWS\n")
    out.write(" N  OBJ\n")
    for k, row in enumerate(model.constraints, start=1):
        out.write(f" {row.sense.mps_code}  c{k}\n")

    out.write("COLUMNS\n")
    marker = 0
    for var, entries in zip(model.vars, columns):
        if var.integral:
            marker += 1
            out.write(f"    MARKER{marker:04d} 'MARKER' 'INTORG'\n")
        # an empty column still needs one entry to exist
        for row_name, coeff in entries or [('OBJ', 0.0)]:
            out.write(f"    {var.name} {row_name} {_num(coeff)}\n")
        if var.integral:
            out.write(f"    MARKER{marker:04d}END 'MARKER' 'INTEND'\n")

    out.write("RHS\n")
    for k, row in enumerate(model.constraints, start=1):
        if row.rhs != 0:
            out.write(f"    RHS c{k} {_num(row.rhs)}\n")

    out.write("BOUNDS\n")
    for var in model.vars:
        if var.lower == var.upper:
            out.write(f" FX BND {var.name} {_num(var.lower)}\n")
            continue
        if math.isinf(var.lower):
            out.write(f" MI BND {var.name}\n")
        else:
            out.write(f" LO BND {var.name} {_num(var.lower)}\n")
        if math.isinf(var.upper):
            out.write(f" PL BND {var.name}\n")
        else:
            out.write(f" UP BND {var.name} {_num(var.upper)}\n")
    out.write("ENDATA\n")
    logger.debug("Exported %s as MPS", model.stats())
    return out.getvalue()
