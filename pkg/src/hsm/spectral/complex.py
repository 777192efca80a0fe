"""Weighted simplicial-complex representation of a hard-core instance.

For a disjoint clique cover ``K_1..K_m`` the ground set has, per clique, an
"empty" element ``o_i`` and one element ``c_v`` for every ``v in K_i``.
Each independent set ``I`` becomes the maximum face holding ``c_v`` for
``v in I`` and ``o_i`` for every clique that ``I`` misses; its weight is
``mu(I)``. Lower faces get the summed weight of the maximum faces above
them.

Maximum faces are stored as an ``(N, m)`` array of ground-element ids (one
column per partition) in the order of :func:`hsm.hardcore.state_table`, so
face ``k`` corresponds to independent set ``k`` of the table.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dynamics import DynamicsKind, TransitionMatrix, spectral_gap, transition_matrix_exact
from ..hardcore import (CapExceededError, CliqueCover, Graph, HardCoreInstance, clique_partition_function,
                        induced_subinstance, state_table, validate_clique_cover)
from .influence import InfluenceBoundCertificate

FACE_CAP = 100_000


class DegenerateLinkError(ValueError):
    """The link of a face has fewer than two partitions or no positive weight."""


class ZeroProbabilityEventError(ValueError):
    """A ground-set event used for conditioning has probability zero."""


@dataclass(frozen=True)
class ComplexRep:
    """Simplicial-complex representation ``(X, w)``.

    Attributes
    ----------
    cliques : tuple of tuple of int
        The disjoint cover; partition ``i`` belongs to clique ``i``.
    elements : tuple of tuple
        Ground set; ``("o", i)`` or ``("c", v)``.
    partition_of : ndarray of int
        Partition index of each ground element.
    faces : ndarray of int, shape (N, m)
        Ground-element id chosen from each partition by every maximum face.
    weights : ndarray
        ``mu(I)`` for every maximum face.
    states : tuple of tuple of int
        Independent set of each maximum face.
    """

    cliques: tuple[tuple[int, ...], ...]
    elements: tuple[tuple, ...]
    partition_of: np.ndarray
    faces: np.ndarray
    weights: np.ndarray
    states: tuple[tuple[int, ...], ...]

    @property
    def m(self) -> int:
        return len(self.cliques)

    @property
    def dimension(self) -> int:
        return self.m

    @property
    def ground_size(self) -> int:
        return len(self.elements)

    def element_id(self, element: tuple) -> int:
        return self.elements.index(tuple(element))

    def incidence(self) -> np.ndarray:
        """``(N, |U|)`` 0/1 matrix of face membership."""
        M = np.zeros((len(self.weights), self.ground_size))
        rows = np.repeat(np.arange(len(self.weights)), self.m)
        M[rows, self.faces.ravel()] = 1.0
        return M

    def face_weight(self, face: Sequence[int]) -> float:
        """``w(tau)`` for a face given as ground-element ids (sum over maximum faces above it)."""
        mask = self._containing(face)
        return math.fsum(self.weights[mask])

    def _containing(self, face: Sequence[int]) -> np.ndarray:
        mask = np.ones(len(self.weights), dtype=bool)
        for x in face:
            mask &= self.faces[:, self.partition_of[x]] == x
        return mask

    def scaled(self, r: float) -> "ComplexRep":
        """Same complex with every maximum-face weight multiplied by ``r``."""
        return ComplexRep(self.cliques, self.elements, self.partition_of, self.faces, self.weights * r, self.states)


def complex_representation(instance: HardCoreInstance, cover: CliqueCover, face_cap: int = FACE_CAP) -> ComplexRep:
    """Build the representation for a disjoint clique cover."""
    report = validate_clique_cover(instance, cover)
    if not report.disjoint:
        raise ValueError("cover must be disjoint")
    if not report.valid:
        raise ValueError(f"invalid clique cover: {'; '.join(report.failures)}")
    table = state_table(instance)
    if len(table) > face_cap:
        raise CapExceededError(f"{len(table)} maximum faces exceed the cap of {face_cap}")
    cliques = tuple(tuple(c) for c in cover)
    elements: list[tuple] = []
    part: list[int] = []
    elem_of_vertex = {}
    empty_elem = []
    for i, c in enumerate(cliques):
        empty_elem.append(len(elements))
        elements.append(("o", i))
        part.append(i)
        for v in c:
            elem_of_vertex[v] = len(elements)
            elements.append(("c", v))
            part.append(i)
    faces = np.empty((len(table), len(cliques)), dtype=np.int64)
    for k, I in enumerate(table.sets):
        row = list(empty_elem)
        for v in I:
            row[part[elem_of_vertex[v]]] = elem_of_vertex[v]
        faces[k] = row
    weights = table.weights / table.Z
    return ComplexRep(cliques, tuple(elements), np.asarray(part, dtype=np.int64), faces, weights,
                      tuple(table.sets))


# -- walks ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class SkeletonWalk:
    """Skeleton walk of a link: states are ground-element ids."""

    elements: tuple[int, ...]
    probabilities: np.ndarray
    stationary: np.ndarray
    pair_weights: np.ndarray

    @property
    def lambda2(self) -> float:
        return spectral_gap(self.probabilities, self.stationary).lambda2


def skeleton_walk_matrix(rep: ComplexRep, face: Sequence[int] = ()) -> SkeletonWalk:
    """Non-lazy walk on the weighted 1-skeleton of the link of ``face``.

    ``P(x, y)`` is proportional to ``w(face + {x, y})``; the stationary law
    is proportional to ``w(face + {x})``.
    """
    face = tuple(face)
    used = {int(rep.partition_of[x]) for x in face}
    if len(used) != len(face):
        raise DegenerateLinkError("face takes two elements from one partition")
    if rep.m - len(face) < 2:
        raise DegenerateLinkError("link needs at least two free partitions")
    rows = rep._containing(face)
    if not rows.any():
        raise DegenerateLinkError("face is not in the complex")
    M = rep.incidence()[rows]
    w = rep.weights[rows]
    keep = [x for x in range(rep.ground_size)
            if rep.partition_of[x] not in used and M[:, x] @ w > 0]
    Mk = M[:, keep]
    W = (Mk * w[:, None]).T @ Mk
    np.fill_diagonal(W, 0.0)
    deg = W.sum(axis=1)
    if (deg <= 0).any():
        raise DegenerateLinkError("isolated vertex in the link skeleton")
    P = W / deg[:, None]
    pi = deg / deg.sum()
    return SkeletonWalk(tuple(keep), P, pi, W)


def two_step_walk_matrix(rep: ComplexRep) -> TransitionMatrix:
    """Down-up walk on maximum faces: drop a uniform element, re-extend proportionally to weight."""
    N, m = rep.faces.shape
    if m < 1:
        raise ValueError("needs at least one partition")
    P = np.zeros((N, N))
    for i in range(m):
        rest = np.delete(rep.faces, i, axis=1)
        groups: dict[bytes, list[int]] = {}
        for k in range(N):
            groups.setdefault(rest[k].tobytes(), []).append(k)
        for members in groups.values():
            idx = np.asarray(members)
            w = rep.weights[idx]
            P[np.ix_(idx, idx)] += (w / w.sum())[None, :] / m
    return TransitionMatrix(rep.states, P)


def two_step_matches_block_dynamics(instance: HardCoreInstance, rep: ComplexRep) -> float:
    """Max entrywise difference between the two-step walk and block dynamics on the same cover."""
    two = two_step_walk_matrix(rep)
    block = transition_matrix_exact(instance, DynamicsKind.block(CliqueCover(rep.cliques)))
    perm = [block.index[s] for s in two.states]
    B = block.probabilities[np.ix_(perm, perm)]
    return float(np.abs(two.probabilities - B).max())


# -- clique influence -----------------------------------------------------------------------

@dataclass(frozen=True)
class CliqueInfluenceMatrix:
    elements: tuple[tuple, ...]
    partition_of: np.ndarray
    entries: np.ndarray

    @property
    def lambda1(self) -> float:
        """Largest real part of the spectrum."""
        if self.entries.size == 0:
            return 0.0
        return float(np.linalg.eigvals(self.entries).real.max())


def clique_influence_from_rep(rep: ComplexRep) -> CliqueInfluenceMatrix:
    M = rep.incidence()
    w = rep.weights / rep.weights.sum()
    joint = (M * w[:, None]).T @ M
    p = joint.diagonal().copy()
    if (p <= 0).any():
        bad = rep.elements[int(np.flatnonzero(p <= 0)[0])]
        raise ZeroProbabilityEventError(f"event {bad} has probability zero")
    psi = joint / p[:, None] - p[None, :]
    same = rep.partition_of[:, None] == rep.partition_of[None, :]
    psi[same] = 0.0
    return CliqueInfluenceMatrix(rep.elements, rep.partition_of, psi)


def clique_influence_matrix(instance: HardCoreInstance, cover: CliqueCover) -> CliqueInfluenceMatrix:
    """``Psi^K(x, y) = mu(y | x) - mu(y)`` across partitions, 0 within a partition."""
    return clique_influence_from_rep(complex_representation(instance, cover))


# -- spectral checks ------------------------------------------------------------------------

def max_clique_Z(instance: HardCoreInstance, cover: CliqueCover) -> float:
    return max((clique_partition_function(instance, c) for c in cover), default=1.0)


@dataclass(frozen=True)
class SpectralBoundsReport:
    m: int
    lambda2_skeleton: float
    lambda1_clique_influence: float
    z_max: float
    influence_bound: float
    canonical_path_bound: float
    subset_bound: float | None = None
    worst_subset_lambda1: float | None = None
    tol: float = 1e-9

    @property
    def influence_ok(self) -> bool:
        return self.lambda2_skeleton <= self.influence_bound + self.tol

    @property
    def canonical_path_ok(self) -> bool:
        return self.lambda2_skeleton <= self.canonical_path_bound + self.tol

    @property
    def subset_ok(self) -> bool:
        return self.subset_bound is None or self.worst_subset_lambda1 <= self.subset_bound + self.tol

    @property
    def passed(self) -> bool:
        return self.influence_ok and self.canonical_path_ok and self.subset_ok

    @property
    def worst_slack(self) -> float:
        slacks = [self.influence_bound - self.lambda2_skeleton,
                  self.canonical_path_bound - self.lambda2_skeleton]
        if self.subset_bound is not None:
            slacks.append(self.subset_bound - self.worst_subset_lambda1)
        return min(slacks)


def _restricted_cover(cover: CliqueCover, keep: Sequence[int]) -> CliqueCover:
    pos = {v: k for k, v in enumerate(keep)}
    cl = [[pos[v] for v in c if v in pos] for c in cover]
    return CliqueCover([c for c in cl if c])


def verify_spectral_bounds(instance: HardCoreInstance, cover: CliqueCover,
                           certificate: InfluenceBoundCertificate | None = None,
                           subsets: Sequence[Sequence[int]] | None = None,
                           tol: float = 1e-9) -> SpectralBoundsReport:
    """Skeleton ``lambda_2`` against ``lambda_1(Psi^K)/(m-1)`` and ``1 - 1/(12 Z_max^2)``.

    With a certificate ``(q, C)``, also checks ``lambda_1(Psi^K_{G[S]}) <= (2 + C) C``
    for the induced instance on every subset in ``subsets`` (all nonempty
    subsets when omitted), each with the cover restricted to ``S``.
    """
    rep = complex_representation(instance, cover)
    if rep.m < 2:
        raise ValueError("spectral bounds need m >= 2")
    lam2 = skeleton_walk_matrix(rep).lambda2
    lam1 = clique_influence_from_rep(rep).lambda1
    zmax = max_clique_Z(instance, cover)
    sub_bound = worst = None
    if certificate is not None:
        C = certificate.C
        sub_bound = (2 + C) * C
        if subsets is None:
            subsets = [S for k in range(1, instance.n + 1) for S in itertools.combinations(range(instance.n), k)]
        worst = -math.inf
        for S in subsets:
            sub, keep = induced_subinstance(instance, S)
            rc = _restricted_cover(cover, keep)
            worst = max(worst, clique_influence_matrix(sub, rc).lambda1)
    return SpectralBoundsReport(rep.m, lam2, lam1, zmax, lam1 / (rep.m - 1),
                                1.0 - 1.0 / (12.0 * zmax ** 2), sub_bound, worst, tol)


def clique_vs_block_check(instance: HardCoreInstance, cover: CliqueCover, tol: float = 1e-9) -> dict:
    """``lambda_2(clique) <= 1 - (1 - lambda_2(block)) / (2 Z_max)`` from exact matrices."""
    table = state_table(instance)
    pi = table.probabilities
    cl = transition_matrix_exact(instance, DynamicsKind.clique(cover))
    bl = transition_matrix_exact(instance, DynamicsKind.block(cover))
    lc = spectral_gap(cl, pi).lambda2      # both matrices use the table's state order
    lb = spectral_gap(bl, pi).lambda2
    zmax = max_clique_Z(instance, cover)
    bound = 1.0 - (1.0 - lb) / (2.0 * zmax)
    return {"lambda2_clique": lc, "lambda2_block": lb, "z_max": zmax, "bound": bound,
            "slack": bound - lc, "passed": lc <= bound + tol}


def scale_invariance_check(rep: ComplexRep, r: float, face: Sequence[int] = ()) -> float:
    """Max entrywise difference of the skeleton walk after scaling all weights by ``r``."""
    a = skeleton_walk_matrix(rep, face).probabilities
    b = skeleton_walk_matrix(rep.scaled(r), face).probabilities
    return float(np.abs(a - b).max())


def skeleton_reversibility_residual(rep: ComplexRep) -> float:
    """Detailed-balance residual of the skeleton walk against ``pi(x) = mu(x)/m``."""
    walk = skeleton_walk_matrix(rep)
    M = rep.incidence()
    mu = (rep.weights / rep.weights.sum()) @ M
    pi = mu[list(walk.elements)] / rep.m
    F = pi[:, None] * walk.probabilities
    return float(np.abs(F - F.T).max())


# -- local expansion ------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalExpansionProfile:
    alphas: tuple[float, ...]
    faces_examined: int
    two_step_lambda2: float
    theorem_bound: float
    tol: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.two_step_lambda2 <= self.theorem_bound + self.tol


def local_expansion_profile(rep: ComplexRep, face_cap: int = FACE_CAP) -> LocalExpansionProfile:
    """``alpha_k`` = max skeleton ``lambda_2`` over links of ``k``-faces, ``k = 0..m-2``."""
    m = rep.m
    if m < 2:
        raise ValueError("local expansion needs m >= 2")
    alphas = []
    examined = 0
    for k in range(m - 1):
        faces = set()
        for row in rep.faces:
            for cols in itertools.combinations(range(m), k):
                faces.add(tuple(int(row[c]) for c in cols))
            if len(faces) + examined > face_cap:
                raise CapExceededError(f"more than {face_cap} faces")
        examined += len(faces)
        alphas.append(max(skeleton_walk_matrix(rep, f).lambda2 for f in faces))
    two = two_step_walk_matrix(rep)
    pi = rep.weights / rep.weights.sum()
    lam2 = spectral_gap(two, pi).lambda2
    bound = 1.0 - math.prod(1.0 - a for a in alphas) / m
    return LocalExpansionProfile(tuple(alphas), examined, lam2, bound)


# -- disjoint covers ------------------------------------------------------------------------

@dataclass(frozen=True)
class DisjointCover:
    cover: CliqueCover
    empty_indices: tuple[int, ...]


def disjointify_cover(graph: Graph | HardCoreInstance, cover: CliqueCover) -> DisjointCover:
    """Replace each clique by itself minus every vertex assigned to an earlier clique.

    The cover keeps its size; cliques that become empty are kept and listed
    in ``empty_indices``.
    """
    g = graph.graph if isinstance(graph, HardCoreInstance) else graph
    report = validate_clique_cover(g, cover)
    if not (report.covering and report.cliques_ok):
        raise ValueError(f"invalid clique cover: {'; '.join(report.failures)}")
    seen: set[int] = set()
    out = []
    for c in cover:
        k = [v for v in c if v not in seen]
        seen.update(c)
        out.append(k)
    empty = tuple(i for i, c in enumerate(out) if not c)
    return DisjointCover(CliqueCover(out), empty)


# -- identities linking clique and pairwise influence ---------------------------------------

def clique_influence_identities(instance: HardCoreInstance, cover: CliqueCover) -> dict[str, float]:
    """Maximum residuals of the three identities relating ``Psi^K`` to ``Psi``.

    * ``influence_on_clique``: ``Psi^K(x, o_j) = -sum_{v in K_j} Psi^K(x, c_v)``;
    * ``clique_to_pairwise_1``: ``Psi^K(c_v, c_w) = mu(0_v) Psi(v, w)`` across cliques;
    * ``clique_to_pairwise_2``: ``Psi^K(o_i, c_w) = -sum_{v in K_i} mu(1_v) Psi_{G_v}(v, w)``
      with ``G_v = G[V minus (K_i minus {v})]``.

    The minus sign in the last identity follows from
    ``mu(1_w) = mu(o_i) mu(1_w | o_i) + sum_v mu(1_v) mu(1_w | 1_v)``: each
    term is ``mu(1_v) (mu(1_w | 0_v, 0_rest) - mu(1_w | 1_v, 0_rest))``. The
    unsigned form is reported as ``clique_to_pairwise_2_unsigned`` for
    reference; it does not hold in general.
    """
    from .influence import pairwise_influence

    rep = complex_representation(instance, cover)
    K = clique_influence_from_rep(rep).entries
    eid = {e: k for k, e in enumerate(rep.elements)}
    psi = pairwise_influence(instance).entries
    mu1 = (rep.weights / rep.weights.sum()) @ rep.incidence()
    r_row = r_one = r_two = r_two_unsigned = 0.0
    for j, Kj in enumerate(rep.cliques):
        cols = [eid[("c", v)] for v in Kj]
        resid = K[:, eid[("o", j)]] + K[:, cols].sum(axis=1)
        r_row = max(r_row, float(np.abs(resid).max()))
    for i, Ki in enumerate(rep.cliques):
        for j, Kj in enumerate(rep.cliques):
            if i == j:
                continue
            for v in Ki:
                for w in Kj:
                    lhs = K[eid[("c", v)], eid[("c", w)]]
                    rhs = (1.0 - mu1[eid[("c", v)]]) * psi[v, w]
                    r_one = max(r_one, abs(lhs - rhs))
        # identity 2: the induced instances G_v
        sub_psi = {}
        for v in Ki:
            keep = [u for u in range(instance.n) if u == v or u not in Ki]
            sub, kept = induced_subinstance(instance, keep)
            sub_psi[v] = (pairwise_influence(sub).entries, {u: k for k, u in enumerate(kept)})
        for j, Kj in enumerate(rep.cliques):
            if i == j:
                continue
            for w in Kj:
                total = 0.0
                for v in Ki:
                    P, pos = sub_psi[v]
                    total += mu1[eid[("c", v)]] * P[pos[v], pos[w]]
                lhs = K[eid[("o", i)], eid[("c", w)]]
                r_two = max(r_two, abs(lhs + total))
                r_two_unsigned = max(r_two_unsigned, abs(lhs - total))
    return {"influence_on_clique": float(r_row), "clique_to_pairwise_1": float(r_one),
            "clique_to_pairwise_2": float(r_two), "clique_to_pairwise_2_unsigned": float(r_two_unsigned)}
