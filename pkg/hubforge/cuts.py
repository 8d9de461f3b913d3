"""Exact separation of the supermodular routing inequalities.

For commodity ``r`` with schedule ``v_1 <= ... <= v_T`` (sentinel last) and
activation values ``a_h`` of the schedule entries, the inequality at index
``t`` reads::

    eta_r >= v_t + sum_{h < t} (v_h - v_t) a_h

and its right-hand side ``S_rt`` is maximized at the first index where the
prefix mass reaches one. Both master variants share this code; CFS
schedules contain edge entries only.
"""

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import get_tolerances
from .costs import CommoditySchedule, ScheduleKind, SortedSchedule
from .linear_model import Sense

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeparationPoint:
    """Master point to separate.

    Attributes:
        y: Edge values, with the fictitious edge in the last slot.
        z: Node values.
    """
    y: np.ndarray
    z: np.ndarray

    @classmethod
    def from_values(cls, built, values) -> "SeparationPoint":
        """Extract y and z from a primal vector of a built master."""
        values = np.asarray(values, dtype=float)
        return cls(y=values[built.y_columns()], z=values[built.z_columns()])


@dataclass(frozen=True)
class Cut:
    """One supermodular inequality.

    Attributes:
        r: Commodity index.
        t: Schedule index (0-based) of the defining entry.
        value: Schedule value ``v_t``.
        terms: ``(kind, ref, coeff)`` for every cheaper entry with a
            nonzero coefficient ``v_h - v_t``.
        rhs_at_point: ``S_rt`` at the separated point.
        violation: ``S_rt - eta_r`` at the separated point.
    """
    r: int
    t: int
    value: float
    terms: Tuple[Tuple[ScheduleKind, int, float], ...]
    rhs_at_point: float
    violation: float


@dataclass
class SeparationStats:
    """Counters of one separation pass."""
    scanned: int = 0
    emitted: int = 0
    max_violation: float = 0.0
    seconds: float = 0.0


def activations(schedule: CommoditySchedule, point: SeparationPoint) -> np.ndarray:
    """Point value of every schedule entry, in schedule order."""
    refs = np.asarray(schedule.refs, dtype=int)
    is_z = np.array([k is ScheduleKind.Z for k in schedule.kinds], dtype=bool)
    out = np.empty(len(refs))
    out[is_z] = np.asarray(point.z, dtype=float)[refs[is_z]]
    out[~is_z] = np.asarray(point.y, dtype=float)[refs[~is_z]]
    return out


def _rhs(values, active, t):
    v_t = values[t]
    return float(v_t + np.dot(values[:t] - v_t, active[:t]))


def rhs_value(schedule: SortedSchedule, r, t, point: SeparationPoint) -> float:
    """Right-hand side ``S_rt`` of the inequality at index ``t`` (0-based).

    Raises:
        IndexError: If ``t`` is outside the schedule of ``r``.
    """
    sched = schedule[r]
    if not 0 <= t < len(sched):
        raise IndexError(f"schedule index {t} out of range for commodity {r + 1}")
    return _rhs(np.asarray(sched.values, dtype=float), activations(sched, point), t)


def maximizing_index(schedule: CommoditySchedule, active, zero_drop=None) -> int:
    """First index whose prefix mass reaches one, else the sentinel index."""
    zero_drop = get_tolerances().zero_drop if zero_drop is None else zero_drop
    mass = np.cumsum(np.asarray(active, dtype=float)[:-1])
    reached = np.flatnonzero(mass >= 1.0 - zero_drop)
    return int(reached[0]) if reached.size else schedule.sentinel_index


def make_cut(schedule: CommoditySchedule, r, t, active, eta_value, zero_drop) -> Cut:
    """Cut at index ``t`` evaluated at ``active``."""
    values = np.asarray(schedule.values, dtype=float)
    v_t = float(values[t])
    terms = []
    for h in range(t):
        coeff = float(values[h] - v_t)
        if abs(coeff) >= zero_drop:
            terms.append((schedule.kinds[h], int(schedule.refs[h]), coeff))
    rhs = _rhs(values, active, t)
    return Cut(r=r, t=t, value=v_t, terms=tuple(terms), rhs_at_point=rhs,
               violation=rhs - float(eta_value))


def most_violated(schedule: SortedSchedule, r, point: SeparationPoint, eta_value,
                  tol=None) -> Optional[Cut]:
    """Most violated inequality of commodity ``r``, or None if none exceeds ``tol``.

    Args:
        schedule: Sorted schedule of the master.
        r: Commodity index.
        point: Master point.
        eta_value: Current value of ``eta_r``.
        tol: Violation threshold; defaults to the configured cut tolerance.

    Returns:
        Cut or None: The cut at the maximizing index when violated.
    """
    tolerances = get_tolerances()
    tol = tolerances.cut_violation_tol if tol is None else tol
    sched = schedule[r]
    active = activations(sched, point)
    t_bar = maximizing_index(sched, active, tolerances.zero_drop)
    cut = make_cut(sched, r, t_bar, active, eta_value, tolerances.zero_drop)
    return cut if cut.violation > tol else None


def separate_all(schedule: SortedSchedule, point: SeparationPoint, etas: Sequence[float],
                 tol=None) -> Tuple[List[Cut], SeparationStats]:
    """One cut per violated commodity, most violated first (ties by commodity)."""
    started = time.perf_counter()
    stats = SeparationStats()
    cuts = []
    for r in range(len(schedule)):
        stats.scanned += 1
        cut = most_violated(schedule, r, point, etas[r], tol)
        if cut is not None:
            cuts.append(cut)
    cuts.sort(key=lambda c: (-c.violation, c.r))
    stats.emitted = len(cuts)
    stats.max_violation = cuts[0].violation if cuts else 0.0
    stats.seconds = time.perf_counter() - started
    logger.debug("Separation: %d of %d commodities violated, max violation %.6g",
                 stats.emitted, stats.scanned, stats.max_violation)
    return cuts, stats


def cut_row(built, cut: Cut):
    """Model row ``eta_r - sum coeff * var >= v_t`` as an ``(expr, sense, rhs, tag)`` tuple."""
    expr = {built.eta[cut.r]: 1.0}
    for kind, ref, coeff in cut.terms:
        var = built.z[ref] if kind is ScheduleKind.Z else built.y[ref]
        expr[var] = -coeff
    return expr, Sense.GE, cut.value, f"cut r={cut.r + 1} t={cut.t + 1}"


@dataclass
class CutLog:
    """Rows ``(pass, r, t, value, violation)`` of every emitted cut."""
    rows: List[Tuple[int, int, int, float, float]] = field(default_factory=list)

    def record(self, pass_no, cuts: Sequence[Cut]):
        for cut in cuts:
            self.rows.append((pass_no, cut.r + 1, cut.t + 1, cut.value, cut.violation))

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        output = io.StringIO()
        writer = csv.DictWriter(output, fieldnames=['pass', 'r', 't', 'value', 'violation'])
        writer.writeheader()
        for pass_no, r, t, value, violation in self.rows:
            writer.writerow({'pass': pass_no, 'r': r, 't': t, 'value': repr(value),
                             'violation': repr(violation)})
        return output.getvalue()
