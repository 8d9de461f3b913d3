"""Problem data model, file ingestion and validation for hubforge.

Nodes and commodities are 0-based in memory and 1-based in every file
format and report.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

TRIANGLE_TOL = 1e-9
MAX_REPORTED_TRIPLES = 10


class InstanceFormatError(ValueError):
    """Raised when instance text cannot be parsed.

    Attributes:
        line: 1-based line number of the offending row, or None.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"row {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Commodity:
    """A flow requirement from ``origin`` to ``dest`` of size ``demand``."""
    origin: int
    dest: int
    demand: float

    def __post_init__(self):
        if self.origin == self.dest:
            raise ValueError(
                f"commodity origin and destination coincide ({self.origin + 1})")
        if self.demand < 0:
            raise ValueError(f"negative demand {self.demand}")


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable MA-HLP instance.

    Attributes:
        n: Number of nodes.
        cost: n x n unit routing costs; the diagonal is forced to zero.
        setup: Hub setup cost per node.
        commodities: Flow requirements.
        alpha: Interhub discount factor.
        gamma: Access leg factor.
        theta: Distribution leg factor.
        name: Free-form identifier used in reports.
    """
    n: int
    cost: np.ndarray
    setup: np.ndarray
    commodities: Tuple[Commodity, ...]
    alpha: float = 0.5
    gamma: float = 1.0
    theta: float = 1.0
    name: str = "instance"

    def __post_init__(self):
        cost = np.array(self.cost, dtype=float, copy=True)
        setup = np.array(self.setup, dtype=float, copy=True).reshape(-1)
        if cost.shape != (self.n, self.n):
            raise ValueError(
                f"cost matrix has shape {cost.shape}, expected ({self.n}, {self.n})")
        if setup.shape != (self.n,):
            raise ValueError(
                f"setup vector has length {setup.shape[0]}, expected {self.n}")
        np.fill_diagonal(cost, 0.0)
        cost.setflags(write=False)
        setup.setflags(write=False)
        object.__setattr__(self, 'cost', cost)
        object.__setattr__(self, 'setup', setup)
        object.__setattr__(self, 'commodities', tuple(self.commodities))
        for commodity in self.commodities:
            if not (0 <= commodity.origin < self.n and 0 <= commodity.dest < self.n):
                raise ValueError(
                    f"commodity {commodity} references a node outside 1..{self.n}")

    @property
    def m(self) -> int:
        """Number of commodities."""
        return len(self.commodities)

    @cached_property
    def origins(self) -> np.ndarray:
        return np.array([c.origin for c in self.commodities], dtype=int)

    @cached_property
    def dests(self) -> np.ndarray:
        return np.array([c.dest for c in self.commodities], dtype=int)

    @cached_property
    def demands(self) -> np.ndarray:
        return np.array([c.demand for c in self.commodities], dtype=float)

    def replace(self, **changes) -> "Instance":
        """Return a copy with the given fields replaced."""
        return dataclasses.replace(self, **changes)


@dataclass
class ValidationReport:
    """Result of :func:`validate`: fatal errors and non-fatal warnings."""
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """True when downstream modules accept the instance."""
        return not self.errors


def _read_text(text) -> str:
    return text.read() if hasattr(text, 'read') else str(text)


def _floats(tokens, line, what):
    try:
        values = [float(tok) for tok in tokens]
    except ValueError as exc:
        raise InstanceFormatError(f"non-numeric {what}: {exc}", line) from exc
    if any(not np.isfinite(v) for v in values):
        raise InstanceFormatError(f"non-finite {what}", line)
    return values


def _expect_keyword(lines, pos, keyword):
    """Return (line number, tokens after keyword) for the next content line."""
    if pos >= len(lines):
        raise InstanceFormatError(f"missing '{keyword}' line")
    lineno, tokens = lines[pos]
    if not tokens or tokens[0] != keyword:
        raise InstanceFormatError(f"expected '{keyword}'", lineno)
    return lineno, tokens[1:]


def parse_canonical(text, name="instance") -> Instance:
    """Parse an instance in HLI format.

    Args:
        text: HLI content as a string or a readable text stream.
        name: Identifier stored on the returned instance.

    Returns:
        Instance: The parsed instance with self-costs forced to zero.

    Raises:
        InstanceFormatError: On malformed headers, dimension mismatches or
            negative costs and demands.
    """
    raw_lines = _read_text(text).splitlines()
    lines = [(number, line.split()) for number, line in enumerate(raw_lines, start=1)
             if line.strip() and not line.lstrip().startswith('#')]
    if not lines or lines[0][1][:2] != ['HLI', '1']:
        raise InstanceFormatError(
            "expected header 'HLI 1'", lines[0][0] if lines else 1)

    lineno, rest = _expect_keyword(lines, 1, 'n')
    if len(rest) != 1:
        raise InstanceFormatError("expected a single node count", lineno)
    try:
        n = int(rest[0])
    except ValueError as exc:
        raise InstanceFormatError(f"invalid node count {rest[0]!r}", lineno) from exc
    if n < 1:
        raise InstanceFormatError("node count must be positive", lineno)

    if len(lines) < 3:
        raise InstanceFormatError("missing factor line")
    lineno, tokens = lines[2]
    if len(tokens) != 6 or tokens[0::2] != ['alpha', 'gamma', 'theta']:
        raise InstanceFormatError(
            "expected 'alpha <dec> gamma <dec> theta <dec>'", lineno)
    alpha, gamma, theta = _floats(tokens[1::2], lineno, "factor")

    lineno, rest = _expect_keyword(lines, 3, 'setup')
    if len(rest) != n:
        raise InstanceFormatError(f"expected {n} values", lineno)
    setup = _floats(rest, lineno, "setup cost")
    if any(v < 0 for v in setup):
        raise InstanceFormatError("negative setup cost", lineno)

    cost = np.zeros((n, n))
    for i in range(n):
        pos = 4 + i
        if pos >= len(lines):
            raise InstanceFormatError(f"expected {n} cost rows, found {i}")
        lineno, tokens = lines[pos]
        if len(tokens) != n:
            raise InstanceFormatError(f"expected {n} values", lineno)
        row = _floats(tokens, lineno, "cost")
        if any(v < 0 for v in row):
            raise InstanceFormatError("negative cost", lineno)
        cost[i] = row

    lineno, rest = _expect_keyword(lines, 4 + n, 'commodities')
    try:
        m = int(rest[0]) if len(rest) == 1 else -1
    except ValueError:
        m = -1
    if m < 0:
        raise InstanceFormatError("expected 'commodities <m>'", lineno)

    body = lines[5 + n:]
    if len(body) != m:
        raise InstanceFormatError(
            f"expected {m} commodity lines, found {len(body)}",
            body[-1][0] if body else lineno)
    commodities = []
    for lineno, tokens in body:
        if len(tokens) != 3:
            raise InstanceFormatError("expected '<o> <d> <w>'", lineno)
        try:
            origin, dest = int(tokens[0]) - 1, int(tokens[1]) - 1
        except ValueError as exc:
            raise InstanceFormatError(f"invalid node index: {exc}", lineno) from exc
        (demand,) = _floats(tokens[2:], lineno, "demand")
        if not (0 <= origin < n and 0 <= dest < n):
            raise InstanceFormatError(f"node index outside 1..{n}", lineno)
        try:
            commodities.append(Commodity(origin, dest, demand))
        except ValueError as exc:
            raise InstanceFormatError(str(exc), lineno) from exc

    instance = Instance(n=n, cost=cost, setup=np.array(setup), commodities=tuple(commodities),
                        alpha=alpha, gamma=gamma, theta=theta, name=name)
    logger.debug("Parsed HLI instance %s: n=%d, |R|=%d", name, n, m)
    return instance


def _fmt(value) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith('.0') else text


def serialize(instance: Instance) -> str:
    """Write an instance in HLI format; the inverse of :func:`parse_canonical`."""
    out = ["HLI 1", f"n {instance.n}",
           f"alpha {_fmt(instance.alpha)} gamma {_fmt(instance.gamma)} "
           f"theta {_fmt(instance.theta)}",
           "setup " + " ".join(_fmt(v) for v in instance.setup)]
    out.extend(" ".join(_fmt(v) for v in row) for row in instance.cost)
    out.append(f"commodities {instance.m}")
    out.extend(f"{c.origin + 1} {c.dest + 1} {_fmt(c.demand)}"
               for c in instance.commodities)
    return "\n".join(out) + "\n"


def _tokens(raw):
    """Split a raw stream into floats, raising InstanceFormatError on junk."""
    tokens = _read_text(raw).split()
    if not tokens:
        raise InstanceFormatError("empty input")
    try:
        return [float(tok) for tok in tokens]
    except ValueError as exc:
        raise InstanceFormatError(f"non-numeric token: {exc}") from exc


def _check_prefix(values, n, per_node_tokens):
    size = int(values[0])
    if size != values[0] or size < 1:
        raise InstanceFormatError(f"invalid dataset size {values[0]}")
    expected = 1 + size * per_node_tokens
    if len(values) < expected:
        raise InstanceFormatError(
            f"dataset declares {size} nodes but holds {len(values)} tokens, "
            f"expected {expected}")
    if len(values) > expected:
        raise InstanceFormatError(
            f"{len(values) - expected} trailing tokens after the dataset")
    if n > size:
        raise InstanceFormatError(f"requested n={n} exceeds dataset size {size}")
    if n < 2:
        raise InstanceFormatError("n must be at least 2")
    return size


def _setup_prefix(setup, n):
    setup = np.asarray(setup, dtype=float).reshape(-1)
    if setup.shape[0] < n:
        raise ValueError(f"setup vector has {setup.shape[0]} entries, need {n}")
    return setup[:n]


def _all_pairs(flows, n):
    return tuple(Commodity(o, d, float(flows[o, d]))
                 for o in range(n) for d in range(n) if o != d)


def load_cab(raw, n, alpha, gamma, theta, setup, name="cab") -> Instance:
    """Load a CAB-style dataset restricted to its first ``n`` nodes.

    The raw layout is the dataset size, the flow matrix and the cost
    matrix, both row-major. Every ordered pair becomes a commodity.

    Raises:
        InstanceFormatError: On non-numeric tokens or when n exceeds the data.
    """
    values = _tokens(raw)
    size = _check_prefix(values, n, 2 * int(values[0]) if values[0] >= 1 else 0)
    block = size * size
    flows = np.array(values[1:1 + block]).reshape(size, size)[:n, :n]
    cost = np.array(values[1 + block:1 + 2 * block]).reshape(size, size)[:n, :n]
    return Instance(n=n, cost=cost, setup=_setup_prefix(setup, n),
                    commodities=_all_pairs(flows, n),
                    alpha=alpha, gamma=gamma, theta=theta, name=name)


def load_ap(raw, n, alpha, gamma, theta, setup, name="ap") -> Instance:
    """Load an AP-style dataset: coordinates plus an asymmetric flow matrix.

    Costs are Euclidean distances between the first ``n`` coordinates.
    """
    values = _tokens(raw)
    size = int(values[0]) if values[0] >= 1 else 0
    _check_prefix(values, n, 2 + size)
    coords = np.array(values[1:1 + 2 * size]).reshape(size, 2)[:n]
    flows = np.array(values[1 + 2 * size:]).reshape(size, size)[:n, :n]
    cost = cdist(coords, coords)
    return Instance(n=n, cost=cost, setup=_setup_prefix(setup, n),
                    commodities=_all_pairs(flows, n),
                    alpha=alpha, gamma=gamma, theta=theta, name=name)


def load_setup_file(path, n) -> np.ndarray:
    """Read a whitespace separated setup-cost vector and keep the first n."""
    with open(path, 'r', encoding='utf-8') as handle:
        values = _tokens(handle)
    return _setup_prefix(values, n)


def surrogate_setup(flows, mean) -> np.ndarray:
    """Setup costs proportional to node outflow, rescaled to the given mean.

    This is a stand-in generator; it does not replicate published setup
    cost tables.
    """
    flows = np.asarray(flows, dtype=float)
    outflow = flows.sum(axis=1) - np.diag(flows)
    total = outflow.sum()
    if total <= 0:
        return np.full(flows.shape[0], float(mean))
    return outflow * (float(mean) * flows.shape[0] / total)


def scale_setup(instance: Instance, factor: float) -> Instance:
    """Return a copy with every setup cost multiplied by ``factor``."""
    if factor < 0:
        raise ValueError(f"setup factor must be nonnegative, got {factor}")
    return instance.replace(setup=instance.setup * factor)


def generate_random(n, density=1.0, seed=0, alpha=0.5, gamma=1.0, theta=1.0,
                    setup_mean: Optional[float] = None, grid=100,
                    name=None) -> Instance:
    """Generate a random instance with Euclidean costs on integer grid points.

    Args:
        n: Number of nodes (at least 2).
        density: Probability that an ordered pair carries a commodity.
        seed: Seed for ``numpy.random.default_rng``.
        alpha: Interhub discount factor.
        gamma: Access factor.
        theta: Distribution factor.
        setup_mean: Mean setup cost; defaults to a value moderate against
            the total direct routing cost.
        grid: Coordinates are drawn from ``{0..grid}^2`` without repeats.
        name: Identifier; defaults to ``rand<n>_s<seed>``.

    Returns:
        Instance: Deterministic for a given argument tuple.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    cells = rng.choice((grid + 1) ** 2, size=n, replace=False)
    coords = np.column_stack((cells // (grid + 1), cells % (grid + 1))).astype(float)
    cost = cdist(coords, coords)
    flows = np.zeros((n, n))
    for o in range(n):
        for d in range(n):
            if o != d and rng.random() < density:
                flows[o, d] = float(rng.integers(1, 11))
    if not flows.any():
        flows[0, 1] = 1.0
    commodities = tuple(Commodity(o, d, flows[o, d])
                        for o in range(n) for d in range(n) if flows[o, d] > 0)
    if setup_mean is None:
        direct = sum(c.demand * cost[c.origin, c.dest] for c in commodities)
        setup_mean = 0.5 * direct / n
    return Instance(n=n, cost=cost, setup=surrogate_setup(flows, setup_mean),
                    commodities=commodities, alpha=alpha, gamma=gamma, theta=theta,
                    name=name or f"rand{n}_s{seed}")


def _triangle_violations(cost, tol=TRIANGLE_TOL):
    found = []
    n = cost.shape[0]
    for j in range(n):
        through_j = cost[:, [j]] + cost[[j], :]
        bad = np.argwhere(cost > through_j + tol)
        found.extend((int(i), j, int(k)) for i, k in bad)
    return found


def _demand_components(instance: Instance, nodes) -> List[List[int]]:
    """Connected components of the positive-demand graph restricted to ``nodes``."""
    pairs = [(c.origin, c.dest) for c in instance.commodities if c.demand > 0]
    if not pairs:
        return []
    origins, dests = zip(*pairs)
    graph = coo_matrix((np.ones(len(pairs)), (origins, dests)),
                       shape=(instance.n, instance.n))
    _count, labels = connected_components(graph, directed=False)
    parts = {}
    for node in nodes:
        parts.setdefault(int(labels[node]), []).append(node)
    return sorted(parts.values())


def validate(instance: Instance) -> ValidationReport:
    """Check an instance against the rules every downstream module assumes."""
    report = ValidationReport()
    cost = instance.cost
    if instance.n < 2:
        report.errors.append("at least 2 nodes are required")
    if (cost < 0).any():
        report.errors.append("costs must be nonnegative")
    if np.any(np.diag(cost) != 0):
        report.errors.append("self-costs c_ii must be zero")
    if (instance.setup < 0).any():
        report.errors.append("setup costs must be nonnegative")
    if any(c.demand < 0 for c in instance.commodities):
        report.errors.append("demands must be nonnegative")
    if not 0 <= instance.alpha <= 1:
        report.errors.append("alpha must lie in [0, 1]")
    if not instance.gamma > instance.alpha:
        report.errors.append("gamma must exceed alpha")
    if not instance.theta > instance.alpha:
        report.errors.append("theta must exceed alpha")
    if not instance.commodities:
        report.errors.append("at least one commodity is required")

    triples = _triangle_violations(cost)
    for i, j, k in triples[:MAX_REPORTED_TRIPLES]:
        report.warnings.append(
            f"triangle inequality violated: c[{i + 1},{k + 1}] > "
            f"c[{i + 1},{j + 1}] + c[{j + 1},{k + 1}]")
    if len(triples) > MAX_REPORTED_TRIPLES:
        report.warnings.append(
            f"{len(triples) - MAX_REPORTED_TRIPLES} further triangle violations")

    off_diagonal_zero = np.argwhere((cost == 0) & ~np.eye(instance.n, dtype=bool))
    for i, j in off_diagonal_zero:
        if i < j:
            report.warnings.append(f"zero cost between distinct nodes {i + 1} and {j + 1}")

    zero = [r + 1 for r, c in enumerate(instance.commodities) if c.demand == 0]
    if zero:
        report.warnings.append(f"zero-demand commodities: {zero}")
    touched = {node for c in instance.commodities if c.demand > 0
               for node in (c.origin, c.dest)}
    isolated = [i + 1 for i in range(instance.n) if i not in touched]
    if isolated:
        report.warnings.append(
            f"commodity graph is disconnected: nodes {isolated} carry no demand")
    parts = _demand_components(instance, sorted(touched))
    if len(parts) > 1:
        listed = "; ".join(str([i + 1 for i in part]) for part in parts)
        report.warnings.append(
            f"commodity graph is disconnected: {len(parts)} components among "
            f"nodes with demand: {listed}")

    for message in report.errors:
        logger.error("Instance %s: %s", instance.name, message)
    for message in report.warnings:
        logger.debug("Instance %s: %s", instance.name, message)
    return report
