"""Trees of self-avoiding walks and influences on trees.

The tree ``T(G, r)`` has one node per self-avoiding walk from ``r``; a walk
``r, ..., u`` that can step back to an earlier vertex ``v_j`` (other than
the immediate predecessor) gets a *fixed* leaf copy of ``v_j``. With the
natural vertex order, the copy is fixed occupied when the vertex following
``v_j`` on the walk has a larger index than the walk's last vertex, and
fixed unoccupied otherwise.

Influences from the root are computed two ways:

* conditioning: a tree recursion where a fixed-occupied child blocks its
  parent and a fixed-unoccupied child is ignored, followed by the product
  of ``-p`` along the root-to-node path;
* surgery: fixed-unoccupied copies are deleted, fixed-occupied copies are
  deleted together with their (thereby blocked) parent, and the conditional
  marginals of each node are propagated down the path of the remaining
  forest for both root spins.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..hardcore import CapExceededError, Graph, HardCoreInstance, PartialConfig, marginals
from .influence import pairwise_influence

SAW_NODE_CAP = 50_000

FREE, FIXED_1, FIXED_0 = "free", "fixed_1", "fixed_0"


@dataclass(frozen=True)
class SawTree:
    """Rooted tree of self-avoiding walks; node 0 is the root.

    Children are listed in increasing order of the origin vertex, so node
    numbering follows a pre-order traversal.
    """

    parent: tuple[int, ...]
    origin: tuple[int, ...]
    status: tuple[str, ...]
    weight: tuple[float, ...]
    depth: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    root_vertex: int

    def __len__(self):
        return len(self.parent)

    @property
    def root(self) -> int:
        return 0

    def copies(self, v: int) -> list[int]:
        """Free copies of graph vertex ``v``."""
        return [k for k, (o, s) in enumerate(zip(self.origin, self.status)) if o == v and s == FREE]

    def path_to_root(self, node: int) -> list[int]:
        path = [node]
        while self.parent[path[-1]] >= 0:
            path.append(self.parent[path[-1]])
        return path[::-1]

    def as_graph(self) -> Graph:
        edges = [(p, k) for k, p in enumerate(self.parent) if p >= 0]
        return Graph.from_edges(len(self), edges, labels=self.origin)

    def as_instance(self) -> tuple[HardCoreInstance, PartialConfig]:
        """Hard-core instance on all tree nodes plus the condition fixing the fixed copies.

        Fixed copies carry the weight of their origin; the condition pins them.
        """
        inst = HardCoreInstance(self.as_graph(), self.weight)
        cond = PartialConfig({k: (1 if s == FIXED_1 else 0) for k, s in enumerate(self.status) if s != FREE})
        return inst, cond


def saw_tree(instance: HardCoreInstance, root: int, node_cap: int = SAW_NODE_CAP) -> SawTree:
    """Build ``T(G, root)`` with fixed copies per the natural-order rule."""
    n = instance.n
    if not 0 <= root < n:
        raise IndexError(f"root {root} out of range")
    adj = instance.graph.adjacency
    lam = instance.weights
    parent, origin, status, weight, depth = [-1], [root], [FREE], [lam[root]], [0]
    children: list[list[int]] = [[]]

    def add(p: int, v: int, st: str, dep: int) -> int:
        if len(parent) >= node_cap:
            raise CapExceededError(f"SAW tree exceeds {node_cap} nodes")
        parent.append(p)
        origin.append(v)
        status.append(st)
        weight.append(lam[v])
        depth.append(dep)
        children.append([])
        children[p].append(len(parent) - 1)
        return len(parent) - 1

    # explicit DFS stack: (node, walk as list, position map)
    stack = [(0, [root])]
    while stack:
        node, walk = stack.pop()
        last = walk[-1]
        pos = {v: k for k, v in enumerate(walk)}
        pending = []
        for u in adj[last]:
            if u not in pos:
                child = add(node, u, FREE, len(walk))
                pending.append((child, walk + [u]))
            elif pos[u] < len(walk) - 2:
                j = pos[u]
                st = FIXED_1 if walk[j + 1] > last else FIXED_0
                add(node, u, st, len(walk))
        stack.extend(reversed(pending))
    # renumber into pre-order so that node ids increase along every path
    order = []
    st2 = [0]
    while st2:
        k = st2.pop()
        order.append(k)
        st2.extend(reversed(children[k]))
    new_id = {old: i for i, old in enumerate(order)}
    return SawTree(
        parent=tuple(new_id[parent[o]] if parent[o] >= 0 else -1 for o in order),
        origin=tuple(origin[o] for o in order),
        status=tuple(status[o] for o in order),
        weight=tuple(weight[o] for o in order),
        depth=tuple(depth[o] for o in order),
        children=tuple(tuple(new_id[c] for c in children[o]) for o in order),
        root_vertex=root,
    )


# -- route 1: conditioning recursion --------------------------------------------------------

def subtree_ratios(tree: SawTree) -> np.ndarray:
    """``R_b = lambda_b prod_c 1/(1 + R_c)`` over free children, 0 if a child is fixed occupied."""
    R = np.zeros(len(tree))
    for b in range(len(tree) - 1, -1, -1):   # children have larger ids
        if tree.status[b] != FREE:
            continue
        val = tree.weight[b]
        for c in tree.children[b]:
            if tree.status[c] == FIXED_1:
                val = 0.0
                break
            if tree.status[c] == FREE:
                val /= 1.0 + R[c]
        R[b] = val
    return R


def root_influences_conditioning(tree: SawTree) -> np.ndarray:
    """``Psi_T(root, b)`` for every node: product of ``-R/(1+R)`` along the path (0 for fixed nodes)."""
    R = subtree_ratios(tree)
    p = R / (1.0 + R)
    psi = np.zeros(len(tree))
    for b in range(1, len(tree)):
        if tree.status[b] != FREE:
            continue
        par = tree.parent[b]
        psi[b] = -p[b] * (psi[par] if par != 0 else 1.0)
    return psi


# -- route 2: surgery and path propagation --------------------------------------------------

def _surgery(tree: SawTree) -> tuple[list[bool], list[list[int]]]:
    """Nodes kept after deleting fixed copies and the parents of fixed-occupied copies."""
    keep = [s == FREE for s in tree.status]
    for k, s in enumerate(tree.status):
        if s == FIXED_1:
            keep[tree.parent[k]] = False
    kids = [[c for c in tree.children[b] if keep[c]] for b in range(len(tree))]
    return keep, kids


def root_influences_surgery(tree: SawTree) -> np.ndarray:
    """``Psi_T(root, b)`` on the forest obtained by surgery.

    A node occupied with probability ``p`` given its parent unoccupied is
    occupied with probability ``p * Pr[parent unoccupied]`` overall; this is
    run down each path from both root spins and differenced.
    """
    keep, kids = _surgery(tree)
    if not keep[0]:
        # the root itself is blocked by a fixed copy: its spin is determined
        return np.zeros(len(tree))
    # marginal of each kept node given its parent unoccupied, on the pruned forest
    q = np.zeros(len(tree))
    for b in range(len(tree) - 1, -1, -1):
        if not keep[b]:
            continue
        z_out = 1.0
        z_in = tree.weight[b]
        for c in kids[b]:
            z_out *= 1.0 / (1.0 - q[c])   # Z_c / Z_c^{c unoccupied}
        q[b] = z_in / (z_in + z_out)
    occ1 = np.zeros(len(tree))
    occ0 = np.zeros(len(tree))
    occ1[0], occ0[0] = 1.0, 0.0
    psi = np.zeros(len(tree))
    reach = [False] * len(tree)     # kept, with every ancestor kept
    reach[0] = True
    for b in range(1, len(tree)):
        par = tree.parent[b]
        if not (keep[b] and reach[par]):
            continue
        reach[b] = True
        occ1[b] = q[b] * (1.0 - occ1[par])
        occ0[b] = q[b] * (1.0 - occ0[par])
        psi[b] = occ1[b] - occ0[b]
    return psi


def tree_influences_bruteforce(tree: SawTree) -> np.ndarray:
    """``Psi_T(root, b)`` by enumeration on the conditioned tree (small trees only)."""
    inst, cond = tree.as_instance()
    out = np.zeros(len(tree))
    free = [k for k in range(len(tree)) if tree.status[k] == FREE]
    c1 = cond.extended(0, 1)
    c0 = cond.extended(0, 0)
    try:
        m1 = marginals(inst, c1)[:, 0]
    except ValueError:
        return out          # root cannot be occupied: influence undefined, report 0
    m0 = marginals(inst, c0)[:, 0]
    for k in free[1:]:
        out[k] = m1[k] - m0[k]
    return out


# -- verification ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SawInfluenceReport:
    root: int
    graph_influence: np.ndarray
    tree_influence: np.ndarray
    route_discrepancy: float
    max_discrepancy: float
    tree_size: int

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_discrepancy <= tol and self.route_discrepancy <= tol


def verify_saw_influence(instance: HardCoreInstance, root: int) -> SawInfluenceReport:
    """Compare ``Psi_G(root, v)`` with the sum of ``Psi_T(root, copy)`` over free copies of ``v``."""
    tree = saw_tree(instance, root)
    a = root_influences_conditioning(tree)
    b = root_influences_surgery(tree)
    summed = np.zeros(instance.n)
    for k in range(1, len(tree)):
        if tree.status[k] == FREE:
            summed[tree.origin[k]] += a[k]
    graph = pairwise_influence(instance).entries[root]
    graph = np.where(np.isnan(graph), 0.0, graph)
    return SawInfluenceReport(root, graph, summed, float(np.abs(a - b).max(initial=0.0)),
                              float(np.abs(graph - summed).max(initial=0.0)), len(tree))


@dataclass(frozen=True)
class MultiplicativityReport:
    triples_checked: int
    max_error: float

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_error <= tol


def _tree_path(graph: Graph, v: int, w: int) -> list[int]:
    prev = {v: -1}
    queue = [v]
    for x in queue:
        for y in graph.adjacency[x]:
            if y not in prev:
                prev[y] = x
                queue.append(y)
    path = [w]
    while path[-1] != v:
        path.append(prev[path[-1]])
    return path[::-1]


def verify_tree_multiplicativity(instance: HardCoreInstance) -> MultiplicativityReport:
    """Check ``Psi(v,w) = Psi(v,u) Psi(u,w)`` for non-adjacent ``v, w`` and interior ``u``."""
    g = instance.graph
    if not g.is_tree():
        raise ValueError("instance graph is not a tree")
    psi = pairwise_influence(instance).entries
    worst = 0.0
    count = 0
    for v in range(instance.n):
        for w in range(instance.n):
            if v == w or g.has_edge(v, w):
                continue
            path = _tree_path(g, v, w)
            for u in path[1:-1]:
                worst = max(worst, abs(psi[v, w] - psi[v, u] * psi[u, w]))
                count += 1
    return MultiplicativityReport(count, worst)


@dataclass(frozen=True)
class DecayReport:
    layer_sums: tuple[float, ...]
    bounds: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return all(s <= b + 1e-12 for s, b in zip(self.layer_sums, self.bounds))


def influence_decay_check(instance: HardCoreInstance, root: int, mu_fn: Sequence[float],
                          alpha: float) -> DecayReport:
    """Layer sums ``sum_{w in L_k} |Psi_T(r,w)| mu(origin(w))`` against ``(1-alpha)^k mu(r)``."""
    tree = saw_tree(instance, root)
    psi = root_influences_conditioning(tree)
    max_depth = max(tree.depth)
    sums = [0.0] * max_depth
    for k in range(1, len(tree)):
        if tree.status[k] == FREE:
            sums[tree.depth[k] - 1] += abs(psi[k]) * mu_fn[tree.origin[k]]
    bounds = [(1 - alpha) ** k * mu_fn[root] for k in range(1, max_depth + 1)]
    return DecayReport(tuple(sums), tuple(bounds))
