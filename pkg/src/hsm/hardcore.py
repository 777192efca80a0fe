"""Explicit hard-core instances and brute-force oracles.

Everything here works on small graphs by exhaustive enumeration of
independent sets. The enumeration is the ground truth that the Markov
chains, the estimator and the spectral checks are tested against.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

BRUTE_FORCE_CAP = 24


class CapExceededError(ValueError):
    """Raised when an exhaustive computation would exceed its size cap."""


class InvalidGraphError(ValueError):
    """Raised when adjacency data violates the graph invariants."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on vertices ``0..vertex_count-1``.

    Parameters
    ----------
    vertex_count : int
    adjacency : tuple of tuple of int
        Strictly sorted neighbor list of each vertex. Must be symmetric.
    labels : tuple, optional
        Opaque per-vertex labels (grid coordinates, names); not used for
        identity.
    """

    vertex_count: int
    adjacency: tuple[tuple[int, ...], ...]
    labels: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        n = self.vertex_count
        if n < 0:
            raise InvalidGraphError("graph.vertex_count", "negative vertex count")
        if len(self.adjacency) != n:
            raise InvalidGraphError("graph.adjacency_length",
                                    f"expected {n} neighbor lists, got {len(self.adjacency)}")
        if self.labels is not None and len(self.labels) != n:
            raise InvalidGraphError("graph.labels_length", "one label per vertex required")
        for v, nbrs in enumerate(self.adjacency):
            for a, b in zip(nbrs, nbrs[1:]):
                if a >= b:
                    raise InvalidGraphError("graph.adjacency_sorted",
                                            f"neighbors of {v} not strictly sorted")
            for w in nbrs:
                if not 0 <= w < n:
                    raise InvalidGraphError("graph.index_range", f"neighbor {w} of {v} out of range")
                if w == v:
                    raise InvalidGraphError("graph.no_self_loops", f"self-loop at {v}")
        for v, nbrs in enumerate(self.adjacency):
            for w in nbrs:
                if v not in self._neighbor_sets[w]:
                    raise InvalidGraphError("graph.adjacency_symmetric",
                                            f"{v} lists {w} but {w} does not list {v}")

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[Sequence[int]], labels=None) -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(vertex_count)]
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise InvalidGraphError("graph.index_range", f"edge ({u}, {v}) out of range")
            if u == v:
                raise InvalidGraphError("graph.no_self_loops", f"self-loop at {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        adjacency = tuple(tuple(sorted(s)) for s in nbrs)
        return cls(vertex_count, adjacency, None if labels is None else tuple(labels))

    @cached_property
    def _neighbor_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(a) for a in self.adjacency)

    @cached_property
    def neighbor_masks(self) -> tuple[int, ...]:
        """Open neighborhoods as Python integer bitmasks."""
        return tuple(sum(1 << w for w in a) for a in self.adjacency)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._neighbor_sets[u]

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    yield u, v

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def is_tree(self) -> bool:
        n = self.vertex_count
        if n == 0:
            return False
        return self.edge_count == n - 1 and len(_component_of(self, 0)) == n

    def is_connected(self) -> bool:
        n = self.vertex_count
        return n == 0 or len(_component_of(self, 0)) == n


def _component_of(graph: Graph, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in graph.adjacency[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


@dataclass(frozen=True)
class HardCoreInstance:
    """A graph with one positive weight per vertex."""

    graph: Graph
    weights: tuple[float, ...]

    def __post_init__(self):
        # any sequence (list, array) is stored as a tuple of floats so instances stay hashable
        object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))
        if len(self.weights) != self.graph.vertex_count:
            raise ValueError("one weight per vertex required")
        for v, lam in enumerate(self.weights):
            if not (math.isfinite(lam) and lam > 0):
                raise ValueError(f"weight of vertex {v} must be positive and finite, got {lam}")

    @classmethod
    def univariate(cls, graph: Graph, lam: float) -> "HardCoreInstance":
        return cls(graph, (float(lam),) * graph.vertex_count)

    @classmethod
    def from_edges(cls, vertex_count: int, edges, lam) -> "HardCoreInstance":
        graph = Graph.from_edges(vertex_count, edges)
        if np.ndim(lam) == 0:
            return cls.univariate(graph, float(lam))
        return cls(graph, tuple(float(x) for x in lam))

    @property
    def n(self) -> int:
        return self.graph.vertex_count

    @property
    def is_univariate(self) -> bool:
        return len(set(self.weights)) <= 1

    @cached_property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class PartialConfig:
    """Spins fixed on a vertex subset; 1 = occupied, 0 = unoccupied."""

    assignment: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {int(v): int(s) for v, s in dict(self.assignment).items()}
        if any(s not in (0, 1) for s in clean.values()):
            raise ValueError("spins must be 0 or 1")
        object.__setattr__(self, "assignment", clean)

    def __hash__(self):
        return hash(tuple(sorted(self.assignment.items())))

    @classmethod
    def zeros(cls, vertices: Iterable[int]) -> "PartialConfig":
        return cls({v: 0 for v in vertices})

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.assignment)

    @property
    def occupied(self) -> frozenset[int]:
        return frozenset(v for v, s in self.assignment.items() if s == 1)

    def extended(self, v: int, spin: int) -> "PartialConfig":
        out = dict(self.assignment)
        out[v] = spin
        return PartialConfig(out)


@dataclass(frozen=True)
class CliqueCover:
    """Indexed family of vertex subsets; validity is checked separately."""

    cliques: tuple[tuple[int, ...], ...]

    def __init__(self, cliques: Iterable[Iterable[int]]):
        object.__setattr__(self, "cliques", tuple(tuple(sorted(set(int(v) for v in c))) for c in cliques))

    def __len__(self):
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)

    def __getitem__(self, i):
        return self.cliques[i]

    @classmethod
    def singletons(cls, n: int) -> "CliqueCover":
        return cls([(v,) for v in range(n)])

    @property
    def is_disjoint(self) -> bool:
        seen: set[int] = set()
        for c in self.cliques:
            if seen.intersection(c):
                return False
            seen.update(c)
        return True


class BlockCover(CliqueCover):
    """Like :class:`CliqueCover` but blocks need not be cliques."""

    @property
    def blocks(self):
        return self.cliques


# -- brute force ---------------------------------------------------------------

def is_independent(graph: Graph, vertices: Iterable[int]) -> bool:
    """True iff no edge of ``graph`` has both endpoints in ``vertices``."""
    vs = set()
    for v in vertices:
        if not 0 <= v < graph.vertex_count:
            raise IndexError(f"vertex {v} out of range for graph with {graph.vertex_count} vertices")
        vs.add(v)
    return all(not vs.intersection(graph.adjacency[v]) for v in vs)


def _check_cap(n: int, cap: int | None):
    cap = BRUTE_FORCE_CAP if cap is None else cap
    if n > cap:
        raise CapExceededError(f"{n} vertices exceeds the brute-force cap of {cap}")


def independent_set_masks(graph: Graph, cap: int | None = None) -> list[int]:
    """All independent sets as bitmasks, empty set first (pre-order backtracking)."""
    _check_cap(graph.vertex_count, cap)
    n = graph.vertex_count
    closed = [m | (1 << v) for v, m in enumerate(graph.neighbor_masks)]
    out: list[int] = []
    # explicit stack of (first candidate vertex, set mask, blocked mask)
    stack = [(0, 0, 0)]
    while stack:
        start, mask, blocked = stack.pop()
        out.append(mask)
        children = []
        for v in range(start, n):
            if not (blocked >> v) & 1:
                children.append((v + 1, mask | (1 << v), blocked | closed[v]))
        stack.extend(reversed(children))
    return out


def enumerate_independent_sets(instance: HardCoreInstance | Graph, cap: int | None = None) -> Iterator[tuple[int, ...]]:
    """Yield every independent set once as a sorted tuple, starting with ``()``."""
    graph = instance.graph if isinstance(instance, HardCoreInstance) else instance
    for mask in independent_set_masks(graph, cap):
        yield _mask_members(mask)


def _mask_members(mask: int) -> tuple[int, ...]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return tuple(out)


@dataclass(frozen=True)
class StateTable:
    """Independent sets of an instance with their (unnormalized) weights.

    ``members[k, v]`` is True iff vertex ``v`` is in the ``k``-th set.
    """

    sets: tuple[tuple[int, ...], ...]
    masks: tuple[int, ...]
    members: np.ndarray
    weights: np.ndarray
    Z: float

    @cached_property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.Z

    @cached_property
    def index(self) -> dict[int, int]:
        return {m: k for k, m in enumerate(self.masks)}

    def __len__(self):
        return len(self.masks)


@lru_cache(maxsize=256)
def _state_table(instance: HardCoreInstance, cap: int) -> StateTable:
    masks = independent_set_masks(instance.graph, cap)
    n = instance.n
    members = np.zeros((len(masks), n), dtype=bool)
    for k, mask in enumerate(masks):
        for v in _mask_members(mask):
            members[k, v] = True
    lam = instance.weight_array
    weights = np.prod(np.where(members, lam, 1.0), axis=1) if n else np.ones(1)
    Z = math.fsum(weights)
    if not math.isfinite(Z):
        raise OverflowError("partition function overflows float64")
    sets = tuple(_mask_members(m) for m in masks)
    return StateTable(sets, tuple(masks), members, weights, Z)


def state_table(instance: HardCoreInstance, cap: int | None = None) -> StateTable:
    _check_cap(instance.n, cap)
    return _state_table(instance, BRUTE_FORCE_CAP if cap is None else cap)


def partition_function_bruteforce(instance: HardCoreInstance, cap: int | None = None) -> float:
    """Exact ``Z = sum_I prod_{v in I} lambda_v`` by enumeration (compensated sum)."""
    return state_table(instance, cap).Z


def gibbs_exact(instance: HardCoreInstance, cap: int | None = None) -> dict[tuple[int, ...], float]:
    """Exact Gibbs distribution as a mapping from independent set to probability."""
    table = state_table(instance, cap)
    return dict(zip(table.sets, table.probabilities.tolist()))


def _consistent_rows(table: StateTable, condition: PartialConfig | None) -> np.ndarray:
    rows = np.ones(len(table), dtype=bool)
    if condition is None:
        return rows
    for v, spin in condition.assignment.items():
        rows &= table.members[:, v] if spin == 1 else ~table.members[:, v]
    return rows


def marginals(instance: HardCoreInstance, condition: PartialConfig | None = None,
              cap: int | None = None) -> np.ndarray:
    """Per-vertex ``(Pr[v in I], Pr[v not in I])`` under the (conditioned) Gibbs law.

    Returns
    -------
    ndarray, shape (n, 2)

    Raises
    ------
    ValueError
        If the condition has probability zero (e.g. two adjacent occupied vertices).
    """
    table = state_table(instance, cap)
    if condition is not None:
        for v in condition.domain:
            if not 0 <= v < instance.n:
                raise IndexError(f"conditioned vertex {v} out of range")
    rows = _consistent_rows(table, condition)
    w = table.weights[rows]
    total = math.fsum(w)
    if total == 0.0:
        raise ValueError("inconsistent condition: no independent set matches it")
    p_in = (w @ table.members[rows]) / total
    p_in = np.clip(p_in, 0.0, 1.0)
    return np.column_stack([p_in, 1.0 - p_in])


def induced_subinstance(instance: HardCoreInstance, subset: Iterable[int]) -> tuple[HardCoreInstance, tuple[int, ...]]:
    """Instance on ``G[S]`` keeping the weights of ``S``.

    Returns the sub-instance and the translation table ``new index -> old index``.
    """
    keep = tuple(sorted(set(subset)))
    for v in keep:
        if not 0 <= v < instance.n:
            raise IndexError(f"vertex {v} not in instance")
    new_of = {v: i for i, v in enumerate(keep)}
    adjacency = tuple(
        tuple(sorted(new_of[w] for w in instance.graph.adjacency[v] if w in new_of)) for v in keep)
    labels = None
    if instance.graph.labels is not None:
        labels = tuple(instance.graph.labels[v] for v in keep)
    graph = Graph(len(keep), adjacency, labels)
    return HardCoreInstance(graph, tuple(instance.weights[v] for v in keep)), keep


def clique_partition_function(instance: HardCoreInstance, clique: Iterable[int]) -> float:
    """``Z(G[K]) = 1 + sum_{v in K} lambda_v`` for a clique ``K``."""
    return 1.0 + math.fsum(instance.weights[v] for v in clique)


@dataclass(frozen=True)
class CoverReport:
    valid: bool
    disjoint: bool
    covering: bool
    cliques_ok: bool
    z_max: float | None
    failures: tuple[str, ...] = ()

    @property
    def max_clique_Z_bound(self) -> float | None:
        return self.z_max


def validate_clique_cover(graph: Graph | HardCoreInstance, cover: CliqueCover) -> CoverReport:
    """Check covering and clique conditions; report ``Z_max`` for valid covers.

    ``z_max`` needs weights, so it is only filled in when a
    :class:`HardCoreInstance` is passed.
    """
    instance = graph if isinstance(graph, HardCoreInstance) else None
    g = instance.graph if instance is not None else graph
    failures = []
    union: set[int] = set()
    cliques_ok = True
    for i, clique in enumerate(cover.cliques):
        bad = [v for v in clique if not 0 <= v < g.vertex_count]
        if bad:
            failures.append(f"clique {i} has out-of-range vertices {bad}")
            cliques_ok = False
            continue
        union.update(clique)
        for a_pos, a in enumerate(clique):
            for b in clique[a_pos + 1:]:
                if not g.has_edge(a, b):
                    cliques_ok = False
                    failures.append(f"clique {i}: {a} and {b} not adjacent")
    missing = sorted(set(range(g.vertex_count)) - union)
    covering = not missing
    if missing:
        failures.append(f"vertices not covered: {missing}")
    if len(cover) == 0 and g.vertex_count > 0:
        covering = False
    valid = covering and cliques_ok
    z_max = None
    if valid and instance is not None:
        z_max = max((clique_partition_function(instance, c) for c in cover.cliques), default=1.0)
    return CoverReport(valid, cover.is_disjoint, covering, cliques_ok, z_max, tuple(failures))


def tree_threshold(max_degree: int) -> float:
    """Tree threshold ``(D-1)^(D-1) / (D-2)^D``, evaluated in log space."""
    D = int(max_degree)
    if D != max_degree or D < 3:
        raise ValueError(f"tree threshold needs an integer degree >= 3, got {max_degree}")
    return math.exp(log_tree_threshold(D))


def log_tree_threshold(max_degree: int) -> float:
    D = max_degree
    # (D-1) ln((D-1)/(D-2)) - ln(D-2), without cancellation for large D
    return (D - 1) * math.log1p(1.0 / (D - 2)) - math.log(D - 2)


def greedy_clique_cover(graph: Graph) -> CliqueCover:
    """Disjoint clique cover built greedily in vertex order."""
    left = set(range(graph.vertex_count))
    cliques = []
    for v in range(graph.vertex_count):
        if v not in left:
            continue
        clique = [v]
        left.discard(v)
        for w in graph.adjacency[v]:
            if w in left and all(graph.has_edge(w, u) for u in clique):
                clique.append(w)
                left.discard(w)
        cliques.append(clique)
    return CliqueCover(cliques)


# -- instance files ------------------------------------------------------------

def instance_to_dict(instance: HardCoreInstance) -> dict:
    lam = instance.weights[0] if instance.is_univariate and instance.n else list(instance.weights)
    if instance.n == 0:
        lam = 1.0
    return {"vertices": instance.n, "edges": [list(e) for e in instance.graph.edges()], "lambda": lam}


def instance_from_dict(data: Mapping) -> HardCoreInstance:
    """Parse ``{"vertices", "edges", "lambda"}``.

    An ``"adjacency"`` list of neighbor lists may replace ``"edges"``; it is
    validated as given, so asymmetric input is rejected.
    """
    n = int(data["vertices"])
    lam = data.get("lambda", 1.0)
    if "adjacency" in data:
        graph = Graph(n, tuple(tuple(int(w) for w in a) for a in data["adjacency"]))
    else:
        graph = Graph.from_edges(n, data.get("edges", []))
    if isinstance(lam, (list, tuple)):
        return HardCoreInstance(graph, tuple(float(x) for x in lam))
    return HardCoreInstance.univariate(graph, float(lam))


def load_instance(path: str | Path) -> HardCoreInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def dump_instance(instance: HardCoreInstance, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh)
