"""Instance data model, validation, sub-graphs, layered expansion and generator."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BadBounds,
    CriticalEndpoint,
    CycleDetected,
    DestinationUnreachable,
    EmptySubgraph,
    InvalidParams,
    MalformedInstance,
)
from .network import Network, compile_network

log = logging.getLogger(__name__)

# Layer tag of the merged terminal node in a layered expansion.
SINK_LAYER = 3


@dataclass(frozen=True)
class CriticalData:
    kind: int
    adv_slope: float  # w^f, strictly negative
    def_slope: float  # w^l, strictly positive
    def_intercept: float = 0.0  # t^l


@dataclass(frozen=True)
class NodeRecord:
    base_utility: float = 0.0
    critical: CriticalData | None = None


@dataclass(frozen=True)
class KindRecord:
    budget: float


@dataclass(frozen=True)
class InterdictionInstance:
    nodes: tuple[NodeRecord, ...]
    arcs: tuple[tuple[int, int], ...]
    origin: int
    destination: int
    kinds: tuple[KindRecord, ...]
    coverage_bounds: tuple[float, float] = (0.0, 1.0)
    mu: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple((int(u), int(v)) for u, v in self.arcs))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        lo, hi = self.coverage_bounds
        object.__setattr__(self, "coverage_bounds", (float(lo), float(hi)))
        object.__setattr__(self, "mu", float(self.mu))

    def with_mu(self, mu: float) -> "InterdictionInstance":
        return InterdictionInstance(
            self.nodes, self.arcs, self.origin, self.destination, self.kinds, self.coverage_bounds, mu
        )


@dataclass(frozen=True)
class Constraints:
    """Feasible set: box [lx, ux] plus one budget per kind."""

    lx: float
    ux: float
    kind_of_var: np.ndarray
    budgets: np.ndarray

    @property
    def n_vars(self) -> int:
        return int(self.kind_of_var.shape[0])

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if x.size:
            worst = max(worst, float(np.max(self.lx - x)), float(np.max(x - self.ux)))
            sums = np.bincount(self.kind_of_var, weights=x, minlength=len(self.budgets))
            worst = max(worst, float(np.max(sums - self.budgets)))
        return max(worst, 0.0)

    def is_feasible(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return self.violation(x) <= tol


@dataclass(frozen=True)
class ValidatedInstance:
    """An instance with removed/pruned nodes and a topological order of the rest.

    ``order`` lists the surviving node ids; ``critical_ids`` fixes the layout of
    coverage vectors (ascending id).
    """

    instance: InterdictionInstance
    order: tuple[int, ...]
    pruned: tuple[int, ...] = ()
    removed: frozenset[int] = field(default_factory=frozenset)

    @property
    def mu(self) -> float:
        return self.instance.mu

    @property
    def origin(self) -> int:
        return self.instance.origin

    @property
    def destination(self) -> int:
        return self.instance.destination

    @cached_property
    def critical_ids(self) -> tuple[int, ...]:
        nodes = self.instance.nodes
        return tuple(sorted(i for i in self.order if nodes[i].critical is not None))

    @cached_property
    def arcs(self) -> tuple[tuple[int, int], ...]:
        keep = set(self.order)
        return tuple((u, v) for u, v in self.instance.arcs if u in keep and v in keep)

    @cached_property
    def constraints(self) -> Constraints:
        nodes = self.instance.nodes
        lx, ux = self.instance.coverage_bounds
        kinds = np.array([nodes[i].critical.kind for i in self.critical_ids], dtype=np.int64)
        budgets = np.array([k.budget for k in self.instance.kinds], dtype=float)
        return Constraints(lx, ux, kinds, budgets)

    @cached_property
    def network(self) -> Network:
        nodes = self.instance.nodes
        pos = {nid: i for i, nid in enumerate(self.order)}
        var_of = {nid: k for k, nid in enumerate(self.critical_ids)}
        arcs = [(pos[u], pos[v]) for u, v in self.arcs]
        var = [var_of.get(nid, -1) for nid in self.order]
        base = [nodes[nid].base_utility for nid in self.order]
        crit = [nodes[nid].critical for nid in self.critical_ids]
        return compile_network(
            self.order,
            arcs,
            var,
            base,
            [c.adv_slope for c in crit],
            [c.def_slope for c in crit],
            [c.def_intercept for c in crit],
        )

    def coverage_vector(self, x) -> np.ndarray:
        """Accept a mapping {critical id: value} or an aligned sequence."""
        if isinstance(x, Mapping):
            return np.array([float(x[s]) for s in self.critical_ids])
        arr = np.asarray(x, dtype=float).reshape(-1)
        if arr.shape[0] != len(self.critical_ids):
            raise InvalidParams(
                f"coverage vector has length {arr.shape[0]}, expected {len(self.critical_ids)}"
            )
        return arr

    def as_mapping(self, x: np.ndarray) -> dict[int, float]:
        return {s: float(v) for s, v in zip(self.critical_ids, x)}

    def with_mu(self, mu: float) -> "ValidatedInstance":
        return _validate(self.instance.with_mu(mu), self.removed)


def _check_fields(raw: InterdictionInstance) -> None:
    n = len(raw.nodes)
    if n < 2:
        raise MalformedInstance("instance needs at least two nodes")
    for name, nid in (("origin", raw.origin), ("destination", raw.destination)):
        if not 0 <= nid < n:
            raise MalformedInstance(f"{name} id {nid} out of range")
    if raw.origin == raw.destination:
        raise MalformedInstance("origin and destination coincide")
    seen = set()
    for u, v in raw.arcs:
        if not (0 <= u < n and 0 <= v < n):
            raise MalformedInstance(f"arc ({u}, {v}) references an unknown node")
        if u == v:
            raise CycleDetected(f"self-loop at node {u}")
        if (u, v) in seen:
            raise MalformedInstance(f"duplicate arc ({u}, {v})")
        seen.add((u, v))
    lx, ux = raw.coverage_bounds
    if not (np.isfinite(lx) and np.isfinite(ux)) or lx < 0 or lx > ux:
        raise BadBounds(f"coverage bounds must satisfy 0 <= lx <= ux, got ({lx}, {ux})")
    if not np.isfinite(raw.mu) or raw.mu <= 0:
        raise BadBounds(f"mu must be positive, got {raw.mu}")
    for k, kind in enumerate(raw.kinds):
        if not np.isfinite(kind.budget) or kind.budget < 0:
            raise BadBounds(f"budget of kind {k} must be nonnegative, got {kind.budget}")
    for i, node in enumerate(raw.nodes):
        if not np.isfinite(node.base_utility):
            raise BadBounds(f"node {i} has a non-finite utility")
        c = node.critical
        if c is None:
            continue
        if i in (raw.origin, raw.destination):
            raise CriticalEndpoint(f"node {i} is an endpoint and cannot be critical")
        if not 0 <= c.kind < len(raw.kinds):
            raise MalformedInstance(f"node {i} has unknown kind {c.kind}")
        if not c.adv_slope < 0:
            raise BadBounds(f"node {i}: adversary slope must be negative, got {c.adv_slope}")
        if not c.def_slope > 0:
            raise BadBounds(f"node {i}: defender slope must be positive, got {c.def_slope}")
        if not np.isfinite(c.def_intercept):
            raise BadBounds(f"node {i} has a non-finite defender intercept")
    if raw.nodes[raw.destination].base_utility != 0.0:
        raise BadBounds("destination utility must be 0")


def _topological_order(n: int, arcs, keep: set[int]) -> list[int]:
    indeg = {i: 0 for i in keep}
    succ: dict[int, list[int]] = {i: [] for i in keep}
    for u, v in arcs:
        if u in keep and v in keep:
            succ[u].append(v)
            indeg[v] += 1
    heap = [i for i in keep if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    if len(order) != len(keep):
        cyclic = sorted(i for i in keep if indeg[i] > 0)
        raise CycleDetected(f"cycle among nodes {cyclic[:10]}")
    return order


def _reach(start: int, adj: dict[int, list[int]], keep: set[int]) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v in keep and v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def _validate(raw: InterdictionInstance, removed: frozenset[int] = frozenset()) -> ValidatedInstance:
    _check_fields(raw)
    n = len(raw.nodes)
    _topological_order(n, raw.arcs, set(range(n)))  # cycle check on the full graph
    keep = set(range(n)) - removed
    fwd: dict[int, list[int]] = {}
    bwd: dict[int, list[int]] = {}
    for u, v in raw.arcs:
        fwd.setdefault(u, []).append(v)
        bwd.setdefault(v, []).append(u)
    ahead = _reach(raw.origin, fwd, keep)
    if raw.destination not in ahead:
        raise DestinationUnreachable(
            f"destination {raw.destination} is unreachable from origin {raw.origin}"
        )
    behind = _reach(raw.destination, bwd, keep)
    alive = ahead & behind
    pruned = tuple(sorted(keep - alive))
    if pruned:
        log.info("pruned %d node(s) off every origin-destination path: %s", len(pruned), list(pruned))
    order = tuple(_topological_order(n, raw.arcs, alive))
    return ValidatedInstance(raw, order, pruned, frozenset(removed))


def validate(raw: InterdictionInstance | ValidatedInstance) -> ValidatedInstance:
    """Check invariants, prune nodes off every origin-destination path, order the rest."""
    if isinstance(raw, ValidatedInstance):
        return _validate(raw.instance, raw.removed)
    return _validate(raw)


def build_subgraph_retaining(inst: ValidatedInstance, s: int) -> ValidatedInstance:
    """Sub-graph keeping critical node ``s`` and deleting every other critical node.

    Paths through ``s`` in the result are exactly the paths that cross ``s`` and
    no other critical node.
    """
    if s not in inst.critical_ids:
        raise InvalidParams(f"node {s} is not a critical node of the instance")
    removed = set(inst.removed) | (set(inst.critical_ids) - {s})
    try:
        return _validate(inst.instance, frozenset(removed))
    except DestinationUnreachable as exc:
        raise EmptySubgraph(f"no origin-destination path survives around node {s}") from exc


@dataclass(frozen=True, eq=False)
class LayeredInstance:
    """Product of the network with a saturating counter of visited critical nodes.

    ``states[i]`` is the (original node id, layer) pair at position ``i``. The
    three destination copies feed one merged terminal tagged ``SINK_LAYER``.
    Every critical node reached at layer 2 carries the extra utility ``-penalty``.
    Layered copies of a critical node share its coverage variable.
    """

    base: ValidatedInstance
    penalty: float
    states: tuple[tuple[int, int], ...]
    network: Network

    @property
    def mu(self) -> float:
        return self.base.mu

    @property
    def constraints(self) -> Constraints:
        return self.base.constraints

    @property
    def critical_ids(self) -> tuple[int, ...]:
        return self.base.critical_ids

    @cached_property
    def position(self) -> dict[tuple[int, int], int]:
        return {st: i for i, st in enumerate(self.states)}

    def terminal(self, layer: int) -> int | None:
        """Position of the destination copy at ``layer`` (None if unreachable)."""
        return self.position.get((self.base.destination, layer))

    def project_path(self, path: Sequence[tuple[int, int]]) -> tuple[int, ...]:
        """Map a layered path back to original node ids, dropping the merged terminal."""
        return tuple(nid for nid, layer in path if layer != SINK_LAYER)

    def coverage_vector(self, x) -> np.ndarray:
        return self.base.coverage_vector(x)


def build_layered(inst: ValidatedInstance, penalty_c: float) -> LayeredInstance:
    if not penalty_c >= 0 or not np.isfinite(penalty_c):
        raise InvalidParams(f"penalty must be a nonnegative finite number, got {penalty_c}")
    nodes = inst.instance.nodes
    dest = inst.destination
    succ: dict[int, list[int]] = {}
    for u, v in inst.arcs:
        succ.setdefault(u, []).append(v)
    topo = {nid: i for i, nid in enumerate(inst.order)}

    start = (inst.origin, 0)
    seen = {start}
    stack = [start]
    arcs = []
    while stack:
        u, layer = stack.pop()
        if u == dest:
            arcs.append(((u, layer), (dest, SINK_LAYER)))
            continue
        for v in succ.get(u, ()):
            nxt = (v, min(2, layer + (nodes[v].critical is not None)))
            arcs.append(((u, layer), nxt))
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    states = sorted(seen, key=lambda st: (topo[st[0]], st[1]))
    states.append((dest, SINK_LAYER))
    pos = {st: i for i, st in enumerate(states)}
    var_of = {nid: k for k, nid in enumerate(inst.critical_ids)}
    var = []
    base = []
    for nid, layer in states:
        rec = nodes[nid]
        if layer == SINK_LAYER:
            var.append(-1)
            base.append(0.0)
            continue
        var.append(var_of.get(nid, -1))
        extra = -penalty_c if (rec.critical is not None and layer == 2) else 0.0
        base.append(rec.base_utility + extra)
    crit = [nodes[nid].critical for nid in inst.critical_ids]
    net = compile_network(
        [nid for nid, _ in states],
        sorted((pos[a], pos[b]) for a, b in arcs),
        var,
        base,
        [c.adv_slope for c in crit],
        [c.def_slope for c in crit],
        [c.def_intercept for c in crit],
    )
    return LayeredInstance(inst, float(penalty_c), tuple(states), net)


DEFAULT_WEIGHT_RANGES: dict[str, tuple[float, float]] = {
    "w_l": (0.0, 1.0),
    "t_l": (0.0, 1.0),
    "w_f": (-1.0, 0.0),
    "t_f": (-1.0, 0.0),
}


def generate_random(
    n: int,
    p: float,
    critical_frac: float,
    seed: int,
    weight_ranges: Mapping[str, tuple[float, float]] | None = None,
    budget: float | None = None,
    mu: float = 1.0,
    coverage_bounds: tuple[float, float] = (0.0, 1.0),
) -> ValidatedInstance:
    """Random DAG on nodes 0..n-1 with arcs i->j (i < j) kept with probability ``p``.

    Origin is 0 and destination n-1. If the destination is unreachable the chain
    0->1->...->n-1 is added. Slopes are drawn so that w_f < 0 < w_l strictly.
    """
    if int(n) != n or n < 3:
        raise InvalidParams(f"need at least 3 nodes, got {n}")
    if not 0 < p <= 1:
        raise InvalidParams(f"edge probability must lie in (0, 1], got {p}")
    if not 0 <= critical_frac <= 1:
        raise InvalidParams(f"critical fraction must lie in [0, 1], got {critical_frac}")
    if seed < 0:
        raise InvalidParams("seed must be nonnegative")
    n = int(n)
    ranges = dict(DEFAULT_WEIGHT_RANGES)
    ranges.update(weight_ranges or {})
    (wl_lo, wl_hi), (wf_lo, wf_hi) = ranges["w_l"], ranges["w_f"]
    if wl_lo < 0 or wf_hi > 0:
        raise InvalidParams("weight ranges must keep w_l positive and w_f negative")
    rng = np.random.default_rng(seed)

    coins = rng.random((n, n))
    arcs = {(i, j) for i in range(n) for j in range(i + 1, n) if coins[i, j] < p}
    fwd: dict[int, list[int]] = {}
    for u, v in arcs:
        fwd.setdefault(u, []).append(v)
    if n - 1 not in _reach(0, fwd, set(range(n))):
        arcs |= {(i, i + 1) for i in range(n - 1)}

    n_crit = min(int(np.floor(critical_frac * n)), n - 2)
    critical = set(rng.choice(np.arange(1, n - 1), size=n_crit, replace=False).tolist())

    def draw(key: str, size: int) -> np.ndarray:
        lo, hi = ranges[key]
        return lo + (hi - lo) * rng.random(size)

    t_f = draw("t_f", n)
    t_f[n - 1] = 0.0
    w_l = wl_hi - (wl_hi - wl_lo) * rng.random(n)  # in (lo, hi]
    t_l = draw("t_l", n)
    w_f = draw("w_f", n)  # in [lo, hi)
    nodes = []
    for i in range(n):
        crit = None
        if i in critical:
            crit = CriticalData(0, float(w_f[i]), float(w_l[i]), float(t_l[i]))
        nodes.append(NodeRecord(float(t_f[i]), crit))
    m = len(critical) / 4.0 if budget is None else float(budget)
    raw = InterdictionInstance(
        tuple(nodes), tuple(sorted(arcs)), 0, n - 1, (KindRecord(m),), coverage_bounds, mu
    )
    return validate(raw)


def diamond(mu: float = 1.0, budget: float = 1.0) -> ValidatedInstance:
    """Two symmetric paths 0->1->3 and 0->2->3 with critical nodes 1 and 2, reward x."""
    crit = CriticalData(0, -1.0, 1.0, 0.0)
    nodes = (NodeRecord(0.0), NodeRecord(0.0, crit), NodeRecord(0.0, crit), NodeRecord(0.0))
    raw = InterdictionInstance(
        nodes, ((0, 1), (0, 2), (1, 3), (2, 3)), 0, 3, (KindRecord(budget),), (0.0, 1.0), mu
    )
    return validate(raw)


def chain(n_nodes: int, critical: Sequence[int], mu: float = 1.0, budget: float = 1.0) -> ValidatedInstance:
    """Single path 0->1->...->n-1 with the given critical nodes (reward x, w_f = -1)."""
    crit = CriticalData(0, -1.0, 1.0, 0.0)
    nodes = tuple(NodeRecord(0.0, crit if i in critical else None) for i in range(n_nodes))
    arcs = tuple((i, i + 1) for i in range(n_nodes - 1))
    raw = InterdictionInstance(nodes, arcs, 0, n_nodes - 1, (KindRecord(budget),), (0.0, 1.0), mu)
    return validate(raw)
