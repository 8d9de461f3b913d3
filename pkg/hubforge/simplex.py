"""Bounded-variable primal simplex for continuous models.

Every row ``a x`` gets an activity column ``s`` with ``a x - s = 0`` whose
bounds encode the row sense, so the all-activity basis is always a valid
(possibly infeasible) starting point. Phase 1 minimizes the sum of bound
violations of the basic variables; phase 2 prices the true objective.
"""

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, qr

from .config import Tolerances, get_tolerances
from .linear_model import Model, ModelError, Sense, SolveStatus

logger = logging.getLogger(__name__)

ITERATION_FACTOR = 50
RATIO_TIE_TOL = 1e-12
RESIDUAL_WARN = 1e-8
PIVOT_REL_TOL = 1e-7
RANK_REL_TOL = 1e-7
MAX_RECHECKS = 3
# share of the feasibility tolerance the Harris pass may overshoot a bound by
HARRIS_SHARE = 1e-2


class SingularBasisError(ArithmeticError):
    """Raised when a basis matrix cannot be factorized."""


@dataclass
class Basis:
    """Restartable simplex state.

    Column ids index the extended space: structural columns first, then
    one activity column per row.

    Attributes:
        basic: Extended column id per row.
        at_upper: Per extended column, whether a nonbasic sits at its upper bound.
        num_cols: Structural column count when the basis was taken.
        num_rows: Row count when the basis was taken.
    """
    basic: np.ndarray
    at_upper: np.ndarray
    num_cols: int
    num_rows: int


@dataclass
class LpResult:
    """Outcome of an LP solve.

    Attributes:
        status: Solve status.
        objective: Objective value (``nan`` unless optimal).
        x: Structural values.
        duals: Row duals (sensitivities of the objective to each rhs).
        reduced_costs: Structural reduced costs.
        iterations: Pivots and bound flips performed.
        ray: Farkas multipliers when infeasible, a primal direction when
            unbounded, otherwise None.
    """
    status: SolveStatus
    objective: float
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    ray: Optional[np.ndarray] = None
    log: List[Tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


class _BasisFactor:
    """Dense LU of the basis matrix followed by a product-form eta file."""

    def __init__(self, matrix, pivot_tol):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', LinAlgWarning)
            self.lu = lu_factor(matrix, check_finite=False)
        diag = np.abs(np.diag(self.lu[0]))
        if diag.size and diag.min() <= pivot_tol * max(1.0, diag.max()):
            raise SingularBasisError("basis matrix is numerically singular")
        self.etas: List[Tuple[int, np.ndarray]] = []

    def __len__(self):
        return len(self.etas)

    def ftran(self, v):
        y = lu_solve(self.lu, v, check_finite=False)
        for r, w in self.etas:
            yr = y[r] / w[r]
            y -= w * yr
            y[r] = yr
        return y

    def btran(self, v):
        u = np.array(v, dtype=float)
        for r, w in reversed(self.etas):
            u[r] = (u[r] - (u @ w - u[r] * w[r])) / w[r]
        return lu_solve(self.lu, u, trans=1, check_finite=False)

    def update(self, r, w):
        self.etas.append((r, w.copy()))


def _row_bounds(model: Model):
    lo = np.full(model.num_constraints, -math.inf)
    hi = np.full(model.num_constraints, math.inf)
    for k, row in enumerate(model.constraints):
        if row.sense in (Sense.GE, Sense.EQ):
            lo[k] = row.rhs
        if row.sense in (Sense.LE, Sense.EQ):
            hi[k] = row.rhs
    return lo, hi


class SimplexEngine:
    """Primal simplex over one continuous :class:`Model`.

    The ratio test is the two-pass Harris test: bounds are relaxed by a
    small share of the feasibility tolerance to find the step limit, then
    the row with the largest pivot under that limit leaves. A basis that
    turns out singular at refactorization is repaired by swapping its
    dependent columns for activity columns of the rows they no longer cover.

    Args:
        model: Model without integrality marks.
        tolerances: Tolerance pack; defaults to the configured one.
        max_iterations: Iteration cap; defaults to ``50 * (rows + cols)``.
        record_log: Keep ``(iteration, phase, objective, infeasibility)`` rows.
    """

    def __init__(self, model: Model, tolerances: Optional[Tolerances] = None,
                 max_iterations=None, record_log=False):
        if model.is_mip:
            raise ModelError("relax the model before solving its LP")
        self.model = model
        self.tol = tolerances or get_tolerances()
        self.max_iterations = max_iterations
        self.record_log = record_log

    def _setup(self):
        model = self.model
        a = model.dense_matrix()
        m, n = a.shape
        self.m, self.n = m, n
        self.a = a
        row_lo, row_hi = _row_bounds(model)
        self.lower = np.concatenate((model.lower_bounds(), row_lo))
        self.upper = np.concatenate((model.upper_bounds(), row_hi))
        self.cost = np.concatenate((model.objective_vector(), np.zeros(m)))
        free = np.flatnonzero(np.isinf(self.lower[:n]) & np.isinf(self.upper[:n]))
        if free.size:
            raise ModelError(
                f"column {model.vars[free[0]].name} is free; every column needs a finite bound")

    def _column(self, j) -> np.ndarray:
        if j < self.n:
            return self.a[:, j].copy()
        col = np.zeros(self.m)
        col[j - self.n] = -1.0
        return col

    def _columns(self, cols) -> np.ndarray:
        cols = np.asarray(cols, dtype=int)
        out = np.zeros((self.m, cols.size))
        structural = cols < self.n
        out[:, structural] = self.a[:, cols[structural]]
        activity = np.flatnonzero(~structural)
        out[cols[activity] - self.n, activity] = -1.0
        return out

    def _times(self, x) -> np.ndarray:
        """``[A, -I] x``, zero for every consistent state."""
        return self.a @ x[:self.n] - x[self.n:]

    def _transpose_times(self, y) -> np.ndarray:
        return np.concatenate((self.a.T @ y, -y))

    def _initial_state(self, start: Optional[Basis]):
        n, m = self.n, self.m
        basic = np.arange(n, n + m)
        at_upper = np.zeros(n + m, dtype=bool)
        if start is not None:
            if start.num_cols > n or start.num_rows > m:
                logger.debug("Ignoring a start basis from a larger model")
            else:
                def remap(idx):
                    idx = np.asarray(idx)
                    return np.where(idx < start.num_cols, idx, idx - start.num_cols + n)
                basic = np.concatenate((remap(start.basic),
                                        np.arange(n + start.num_rows, n + m)))
                old = np.arange(start.num_cols + start.num_rows)
                at_upper[remap(old)] = start.at_upper[:len(old)]
        return basic.astype(int), at_upper

    def _place_nonbasic(self, basic, at_upper):
        x = np.zeros(self.n + self.m)
        is_basic = np.zeros(self.n + self.m, dtype=bool)
        is_basic[basic] = True
        for j in np.flatnonzero(~is_basic):
            use_upper = (at_upper[j] and math.isfinite(self.upper[j])) \
                or not math.isfinite(self.lower[j])
            at_upper[j] = use_upper
            x[j] = self.upper[j] if use_upper else self.lower[j]
        return x, is_basic

    def _factor(self, basic):
        return _BasisFactor(self._columns(basic), self.tol.pivot_tol)

    def _recompute_basics(self, factor, basic, x):
        x[basic] = 0.0
        x[basic] = factor.ftran(-self._times(x))
        residual = float(np.abs(self._times(x)).max())
        if residual > RESIDUAL_WARN * (1.0 + float(np.abs(x).max())):
            # one step of iterative refinement
            x[basic] += factor.ftran(-self._times(x))
            logger.debug("Basis residual %.2e refined to %.2e", residual,
                         float(np.abs(self._times(x)).max()))

    def _repair(self, basic, at_upper, x):
        """Replace linearly dependent basic columns by activity columns.

        A column-pivoted QR of the basis keeps a maximal independent set of
        columns; a second pivoted QR over their rows names the rows they
        cover. The activity columns of the other rows complete the basis.
        The dropped columns become nonbasic at their nearer bound.

        Raises:
            SingularBasisError: If the completion is not a basis either.
        """
        _, r_mat, order = qr(self._columns(basic), mode='economic', pivoting=True)
        diag = np.abs(np.diag(r_mat))
        rank = int(np.sum(diag > RANK_REL_TOL * diag[0])) if diag.size and diag[0] > 0 else 0
        kept = basic[order[:rank]]
        covered = np.zeros(0, dtype=int)
        if rank:
            _, _, rows = qr(self._columns(kept).T, mode='economic', pivoting=True)
            covered = rows[:rank]
        fill = self.n + np.setdiff1d(np.arange(self.m), covered)
        if np.isin(fill, kept).any():
            raise SingularBasisError("basis repair picked a column twice")
        for j in basic[order[rank:]]:
            to_lower = math.isfinite(self.lower[j]) and (
                not math.isfinite(self.upper[j])
                or x[j] - self.lower[j] <= self.upper[j] - x[j])
            at_upper[j] = not to_lower
        repaired = basic.copy()
        repaired[order[rank:]] = fill
        logger.warning("Singular basis: replaced %d dependent columns with activity columns",
                       self.m - rank)
        return repaired

    def _refresh(self, basic, at_upper, x, is_basic):
        """Refactorize and recompute the basics, repairing a singular basis."""
        try:
            factor = self._factor(basic)
        except SingularBasisError:
            try:
                basic = self._repair(basic, at_upper, x)
                x, is_basic = self._place_nonbasic(basic, at_upper)
                factor = self._factor(basic)
            except SingularBasisError:
                logger.warning("Basis repair failed; restarting from the activity basis")
                basic, at_upper = self._initial_state(None)
                x, is_basic = self._place_nonbasic(basic, at_upper)
                factor = self._factor(basic)
        self._recompute_basics(factor, basic, x)
        return factor, basic, at_upper, x, is_basic

    def _solve_without_rows(self):
        cost, lower, upper = self.cost[:self.n], self.lower[:self.n], self.upper[:self.n]
        to_upper = (cost < 0) | ((cost == 0) & np.isinf(lower))
        x = np.where(to_upper, upper, lower)
        basis = Basis(np.zeros(0, dtype=int), to_upper, self.n, 0)
        if np.isinf(x).any():
            ray = np.where(np.isinf(x), -np.sign(cost), 0.0)
            return LpResult(SolveStatus.UNBOUNDED, -math.inf, np.zeros(self.n), np.zeros(0),
                            np.zeros(self.n), 0, ray), basis
        return LpResult(SolveStatus.OPTIMAL, float(cost @ x), x, np.zeros(0),
                        cost.copy(), 0), basis

    def solve(self, start: Optional[Basis] = None) -> Tuple[LpResult, Basis]:
        """Optimize from ``start`` (or the activity basis).

        Returns:
            tuple: ``(LpResult, Basis)``; the basis can seed a later solve
            after rows are appended or bounds change.
        """
        self._setup()
        if self.m == 0:
            return self._solve_without_rows()
        basic, at_upper = self._initial_state(start)
        x, is_basic = self._place_nonbasic(basic, at_upper)
        factor, basic, at_upper, x, is_basic = self._refresh(basic, at_upper, x, is_basic)
        return self._iterate(basic, at_upper, is_basic, x, factor)

    def _ratio_test(self, x_b, lb, ub, delta, below, above):
        """Exact ratios per row and the Harris step limit."""
        slack = HARRIS_SHARE * self.tol.feasibility_tol
        ptol = max(self.tol.pivot_tol, PIVOT_REL_TOL * float(np.abs(delta).max()))
        pos, neg = delta > ptol, delta < -ptol
        feasible = ~below & ~above
        exact = np.full(self.m, math.inf)
        relaxed = np.full(self.m, math.inf)
        for rows, gap, rate in (
                (feasible & neg & np.isfinite(lb), x_b - lb, -delta),
                (feasible & pos & np.isfinite(ub), ub - x_b, delta),
                (below & pos, lb - x_b, delta),
                (above & neg, x_b - ub, -delta)):
            exact[rows] = gap[rows] / rate[rows]
            relaxed[rows] = (gap[rows] + slack) / rate[rows]
        return exact, float(relaxed.min())

    # pylint: disable=too-many-locals,too-many-branches,too-many-statements
    def _iterate(self, basic, at_upper, is_basic, x, factor):
        m, n, tol = self.m, self.n, self.tol
        ftol = tol.feasibility_tol
        cap = self.max_iterations or ITERATION_FACTOR * (m + n)
        movable = self.upper - self.lower > 0
        iterations = degenerate = rechecks = 0
        bland, fresh = False, True
        log = []
        status, y, d = None, np.zeros(m), np.zeros(n + m)

        while True:
            x_b = x[basic]
            lb, ub = self.lower[basic], self.upper[basic]
            below = x_b < lb - ftol
            above = x_b > ub + ftol
            phase = 1 if below.any() or above.any() else 2
            if phase == 1:
                c_b = above.astype(float) - below.astype(float)
                y = factor.btran(c_b)
                d = -self._transpose_times(y)
            else:
                y = factor.btran(self.cost[basic])
                d = self.cost - self._transpose_times(y)
            if self.record_log:
                infeasibility = float(np.sum(np.maximum(lb - x_b, 0) + np.maximum(x_b - ub, 0)))
                log.append((iterations, phase, float(self.cost @ x), infeasibility))

            candidates = ~is_basic & movable & (
                (~at_upper & (d < -ftol)) | (at_upper & (d > ftol)))
            if not candidates.any():
                if fresh or rechecks >= MAX_RECHECKS:
                    status = SolveStatus.INFEASIBLE if phase == 1 else SolveStatus.OPTIMAL
                    break
                # confirm on a fresh factorization
                rechecks += 1
                factor, basic, at_upper, x, is_basic = self._refresh(basic, at_upper, x, is_basic)
                fresh = True
                continue
            if iterations >= cap:
                status = SolveStatus.ITER_LIMIT
                break

            if bland:
                q = int(np.flatnonzero(candidates)[0])
            else:
                scores = np.where(candidates, np.abs(d), -1.0)
                q = int(np.argmax(scores))
            direction = -1.0 if at_upper[q] else 1.0
            w = factor.ftran(self._column(q))
            delta = -direction * w
            exact, limit = self._ratio_test(x_b, lb, ub, delta, below, above)
            span = self.upper[q] - self.lower[q]

            if math.isinf(limit) and math.isinf(span):
                if phase == 2:
                    status = SolveStatus.UNBOUNDED
                    ray = np.zeros(n + m)
                    ray[q] = direction
                    ray[basic] = delta
                    y = ray
                    break
                logger.warning("Phase 1 ratio test found no limit; stopping")
                status = SolveStatus.ITER_LIMIT
                break

            iterations += 1
            fresh = False
            if span <= limit:
                x[q] += direction * span
                x[basic] = x_b + span * delta
                at_upper[q] = not at_upper[q]
                x[q] = self.upper[q] if at_upper[q] else self.lower[q]
                degenerate = 0
                continue

            eligible = np.flatnonzero(exact <= limit)
            if bland:
                r = int(eligible[np.argmin(basic[eligible])])
            else:
                r = int(eligible[np.argmax(np.abs(delta[eligible]))])
            theta = max(float(exact[r]), 0.0)
            degenerate = degenerate + 1 if theta <= RATIO_TIE_TOL else 0
            if not bland and degenerate > 3 * m:
                logger.debug("Switching to Bland's rule after %d degenerate pivots", degenerate)
                bland = True

            x[q] += direction * theta
            x[basic] = x_b + theta * delta
            leaving = basic[r]
            if below[r]:
                to_upper = False
            elif above[r]:
                to_upper = True
            else:
                to_upper = delta[r] > 0
            at_upper[leaving] = to_upper
            x[leaving] = self.upper[leaving] if to_upper else self.lower[leaving]
            is_basic[leaving] = False
            is_basic[q] = True
            at_upper[q] = False
            basic[r] = q
            factor.update(r, w)
            if len(factor) >= tol.refactor_every:
                factor, basic, at_upper, x, is_basic = self._refresh(basic, at_upper, x, is_basic)
                fresh = True

        return self._result(status, basic, at_upper, x, y, d, iterations, log)

    def _result(self, status, basic, at_upper, x, y, d, iterations, log):
        n = self.n
        basis = Basis(basic.copy(), at_upper.copy(), n, self.m)
        values = x[:n].copy()
        if status is SolveStatus.OPTIMAL:
            result = LpResult(status, float(self.cost[:n] @ values), values, y.copy(),
                              d[:n].copy(), iterations, log=log)
        elif status is SolveStatus.INFEASIBLE:
            result = LpResult(status, math.nan, values, np.zeros(self.m), np.zeros(n),
                              iterations, ray=y.copy(), log=log)
        elif status is SolveStatus.UNBOUNDED:
            result = LpResult(status, -math.inf, values, np.zeros(self.m), np.zeros(n),
                              iterations, ray=y[:n].copy(), log=log)
        else:
            result = LpResult(status, math.nan, values, np.zeros(self.m), np.zeros(n),
                              iterations, log=log)
        logger.debug("LP %s: %s after %d iterations, objective %s",
                     self.model.name, status.value, iterations, result.objective)
        return result, basis


def solve_lp(model: Model, start: Optional[Basis] = None, tolerances=None,
             max_iterations=None, record_log=False) -> Tuple[LpResult, Basis]:
    """Solve the LP of a continuous model; see :class:`SimplexEngine`."""
    engine = SimplexEngine(model, tolerances, max_iterations, record_log)
    return engine.solve(start)


def resolve_after(model: Model, new_rows=(), bound_changes=(), basis: Optional[Basis] = None,
                  tolerances=None, max_iterations=None) -> Tuple[LpResult, Basis]:
    """Apply rows and bound changes to ``model`` and re-optimize from ``basis``.

    Args:
        model: Model to update in place.
        new_rows: Iterable of ``(expr, sense, rhs, tag)`` tuples.
        bound_changes: Iterable of ``(var, lower, upper)`` tuples.
        basis: Basis returned by the previous solve.
        tolerances: Tolerance pack.
        max_iterations: Iteration cap.

    Returns:
        tuple: ``(LpResult, Basis)``.
    """
    for expr, sense, rhs, tag in new_rows:
        model.add_constraint(expr, sense, rhs, tag)
    for var, lower, upper in bound_changes:
        model.set_bounds(var, lower, upper)
    return solve_lp(model, basis, tolerances, max_iterations)


def farkas_gap(model: Model, ray) -> float:
    """Largest value of ``y^T(A x - s)`` over the column and row boxes.

    A negative value proves that no point satisfies both the bounds and
    the rows, since every feasible point gives exactly zero.
    """
    y = np.asarray(ray, dtype=float)
    g = model.dense_matrix().T @ y if model.num_constraints else np.zeros(model.num_vars)
    lower, upper = model.lower_bounds(), model.upper_bounds()
    row_lo, row_hi = _row_bounds(model)
    coeffs = np.concatenate((g, -y))
    cutoff = 1e-9 * max(1.0, float(np.abs(coeffs).max())) if coeffs.size else 0.0
    total = 0.0
    for coeff, lo, hi in zip(coeffs, np.concatenate((lower, row_lo)),
                             np.concatenate((upper, row_hi))):
        if abs(coeff) < cutoff:
            continue
        bound = hi if coeff > 0 else lo
        if math.isinf(bound):
            return math.inf
        total += coeff * bound
    return total


def iteration_log_csv(result: LpResult) -> str:
    """CSV text ``iteration,phase,objective,infeasibility`` of a logged solve."""
    output = io.StringIO()
    writer = csv.writer(output)
    writer.writerow(['iteration', 'phase', 'objective', 'infeasibility'])
    for iteration, phase, objective, infeasibility in result.log:
        writer.writerow([iteration, phase, repr(objective), repr(infeasibility)])
    return output.getvalue()
