"""Pairwise influence, the influence bound condition and the strict clique dynamics condition.

All probabilities come from exact enumeration. The Gibbs measure of an
induced subgraph ``G[S]`` is the Gibbs measure of ``G`` conditioned on
every vertex outside ``S`` being unoccupied, so a single table of
independent sets of ``G`` serves every subset.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..hardcore import CapExceededError, HardCoreInstance, PartialConfig, StateTable, state_table

EXHAUSTIVE_CAP = 12


class UndefinedInfluenceError(ValueError):
    """A conditioning event has probability zero."""


@dataclass(frozen=True)
class InfluenceMatrix:
    """``entries[a, b] = Psi(vertices[a], vertices[b])``; NaN rows are undefined.

    A row is undefined when the source vertex is forced (its spin has
    probability one under the condition).
    """

    vertices: tuple[int, ...]
    entries: np.ndarray
    condition: PartialConfig = field(default_factory=PartialConfig)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.entries).any(axis=1)

    def __call__(self, v: int, w: int) -> float:
        pos = {u: k for k, u in enumerate(self.vertices)}
        return float(self.entries[pos[v], pos[w]])

    def as_full(self, n: int) -> np.ndarray:
        """Embed into an ``n x n`` matrix with zeros outside the index set."""
        out = np.zeros((n, n))
        idx = np.asarray(self.vertices, dtype=int)
        out[np.ix_(idx, idx)] = self.entries
        return out


def _influence_from_rows(members: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Influence matrix from the independent sets (rows) consistent with a condition."""
    total = math.fsum(weights)
    Mw = members * weights[:, None]
    joint = Mw.T @ members                  # joint[v, w] = weight of sets containing v and w
    occ = joint.diagonal().copy()
    col = Mw.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p1 = joint / occ[:, None]
        p0 = (col[None, :] - joint) / (total - occ)[:, None]
        psi = p1 - p0
    forced = (occ <= 0) | (total - occ <= 0)
    np.fill_diagonal(psi, 0.0)
    psi[forced, :] = np.nan
    return psi


def _condition_rows(table: StateTable, condition: PartialConfig | None) -> np.ndarray:
    rows = np.ones(len(table), dtype=bool)
    if condition is not None:
        for v, spin in condition.assignment.items():
            rows &= table.members[:, v] if spin else ~table.members[:, v]
    return rows


def pairwise_influence(instance: HardCoreInstance, condition: PartialConfig | None = None) -> InfluenceMatrix:
    """``Psi(v, w) = mu(1_w | 1_v, sigma) - mu(1_w | 0_v, sigma)`` for ``v, w`` outside the condition."""
    table = state_table(instance)
    rows = _condition_rows(table, condition)
    if not rows.any():
        raise UndefinedInfluenceError("condition has probability zero")
    free = tuple(v for v in range(instance.n) if condition is None or v not in condition.assignment)
    members = table.members[rows][:, list(free)].astype(float)
    psi = _influence_from_rows(members, table.weights[rows])
    return InfluenceMatrix(free, psi, condition or PartialConfig())


def subset_influence(table: StateTable, subset: Sequence[int]) -> np.ndarray:
    """``Psi_{G[S]}`` on ``S`` (sorted), computed from the table of ``G``."""
    S = list(subset)
    smask = sum(1 << v for v in S)
    rows = np.fromiter(((m & ~smask) == 0 for m in table.masks), dtype=bool, count=len(table))
    members = table.members[rows][:, S].astype(float)
    return _influence_from_rows(members, table.weights[rows])


# -- influence bound condition ---------------------------------------------------------

@dataclass(frozen=True)
class InfluenceBoundCertificate:
    """``sum_{v in S} |Psi_{G[S]}(r, v)| q(v) <= C q(r)`` held on every checked ``(S, r)``."""

    q: tuple[float, ...]
    C: float
    checked_subsets: str
    subsets_checked: int
    worst_ratio: float
    worst_slack: float

    ok = True


@dataclass(frozen=True)
class InfluenceBoundCounterexample:
    subset: tuple[int, ...]
    root: int
    lhs: float
    rhs: float

    ok = False

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def _subsets(n: int, policy) -> tuple[Iterable[tuple[int, ...]], str]:
    if policy == "exhaustive":
        if n > EXHAUSTIVE_CAP:
            raise CapExceededError(f"exhaustive subset check needs n <= {EXHAUSTIVE_CAP}")
        gen = (S for k in range(1, n + 1) for S in itertools.combinations(range(n), k))
        return gen, "all nonempty subsets"
    kind, count, seed = policy
    if kind != "sampled":
        raise ValueError(f"unknown subset policy {policy!r}")
    rng = np.random.default_rng(seed)

    def gen_sampled():
        for _ in range(count):
            mask = rng.random(n) < 0.5
            if not mask.any():
                mask[rng.integers(n)] = True
            yield tuple(np.flatnonzero(mask).tolist())
    return gen_sampled(), f"{count} random subsets (seed {seed})"


def check_influence_condition(instance: HardCoreInstance, q: Sequence[float], C: float,
                              subset_policy="exhaustive", tol: float = 1e-9):
    """Verify the influence bound for all (or sampled) subsets ``S`` and roots ``r in S``.

    Returns a certificate, or the first counterexample found.
    """
    q = np.asarray(q, dtype=float)
    if len(q) != instance.n or (q <= 0).any():
        raise ValueError("q must be positive with one entry per vertex")
    table = state_table(instance)
    subsets, desc = _subsets(instance.n, subset_policy)
    worst_ratio = 0.0
    worst_slack = math.inf
    count = 0
    for S in subsets:
        count += 1
        psi = subset_influence(table, S)
        qs = q[list(S)]
        lhs = np.abs(psi) @ qs
        rhs = C * qs
        ratio = float((lhs / qs).max())
        worst_ratio = max(worst_ratio, ratio)
        slack = rhs - lhs
        k = int(slack.argmin())
        worst_slack = min(worst_slack, float(slack[k]))
        if slack[k] < -tol:
            return InfluenceBoundCounterexample(tuple(S), S[k], float(lhs[k]), float(rhs[k]))
    return InfluenceBoundCertificate(tuple(q.tolist()), C, desc, count, worst_ratio, worst_slack)


# -- strict clique dynamics condition ---------------------------------------------------

@dataclass(frozen=True)
class CdcCertificate:
    mu_fn: tuple[float, ...]
    alpha: float
    worst_slack: float

    ok = True


@dataclass(frozen=True)
class CdcCounterexample:
    vertex: int
    lhs: float
    rhs: float

    ok = False


def cdc_sums(instance: HardCoreInstance, mu_fn: Sequence[float]) -> np.ndarray:
    """``sum_{w in N(v)} lambda_w / (1 + lambda_w) mu(w)`` for every ``v``."""
    mu = np.asarray(mu_fn, dtype=float)
    lam = instance.weight_array
    contrib = lam / (1 + lam) * mu
    return np.array([math.fsum(contrib[w] for w in instance.graph.adjacency[v]) for v in range(instance.n)])


def cdc_max_alpha(instance: HardCoreInstance, mu_fn: Sequence[float]) -> float:
    """Largest ``alpha`` for which the strict condition holds (may be <= 0)."""
    mu = np.asarray(mu_fn, dtype=float)
    if instance.n == 0:
        return 1.0
    return float(1.0 - (cdc_sums(instance, mu) / mu).max())


def check_strict_cdc(instance: HardCoreInstance, mu_fn: Sequence[float], alpha: float, tol: float = 1e-12):
    """Check ``sum_{w in N(v)} lambda_w/(1+lambda_w) mu(w) <= (1 - alpha) mu(v)`` for every ``v``."""
    mu = np.asarray(mu_fn, dtype=float)
    if len(mu) != instance.n or (mu <= 0).any():
        raise ValueError("mu_fn must be positive with one entry per vertex")
    lhs = cdc_sums(instance, mu)
    rhs = (1 - alpha) * mu
    slack = rhs - lhs
    for v in range(instance.n):
        if slack[v] < -tol:
            return CdcCounterexample(v, float(lhs[v]), float(rhs[v]))
    return CdcCertificate(tuple(mu.tolist()), alpha, float(slack.min()) if instance.n else math.inf)


@dataclass(frozen=True)
class CdcInfluenceReport:
    cdc: CdcCertificate | CdcCounterexample
    influence: InfluenceBoundCertificate | InfluenceBoundCounterexample | None
    C: float

    @property
    def passed(self) -> bool:
        return self.cdc.ok and self.influence is not None and self.influence.ok

    @property
    def worst_slack(self) -> float:
        if self.influence is None:
            return math.nan
        return self.influence.worst_slack if self.influence.ok else self.influence.slack


def cdc_implies_influence_bound_check(instance: HardCoreInstance, mu_fn: Sequence[float],
                                      alpha: float) -> CdcInfluenceReport:
    """Check the strict condition, then the influence bound with ``q = mu`` and ``C = 1/alpha``."""
    cdc = check_strict_cdc(instance, mu_fn, alpha)
    if not cdc.ok:
        return CdcInfluenceReport(cdc, None, 1.0 / alpha)
    infl = check_influence_condition(instance, mu_fn, 1.0 / alpha, "exhaustive")
    return CdcInfluenceReport(cdc, infl, 1.0 / alpha)


def influence_sign_symmetry(instance: HardCoreInstance) -> list[tuple[int, int, float, float]]:
    """Pairs where ``sign Psi(v,w) != sign Psi(w,v)`` (diagnostic only)."""
    psi = pairwise_influence(instance).entries
    out = []
    for v in range(instance.n):
        for w in range(v + 1, instance.n):
            a, b = psi[v, w], psi[w, v]
            if np.sign(np.round(a, 14)) != np.sign(np.round(b, 14)):
                out.append((v, w, float(a), float(b)))
    return out


# -- spectral radius via a weighted row condition --------------------------------------------

@dataclass(frozen=True)
class SpectralRadiusCheck:
    row_condition: bool
    spectral_radius: float
    xi: float
    passed: bool


def spectral_radius_bound_check(A, p, xi: float, tol: float = 1e-9) -> SpectralRadiusCheck:
    """If ``sum_j |A_ij| p_j <= xi p_i`` for all ``i`` then ``rho(A) <= xi``; check both."""
    A = np.asarray(A, dtype=float)
    p = np.asarray(p, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or p.shape != (A.shape[0],):
        raise ValueError("A must be square and p must match its size")
    cond = bool((np.abs(A) @ p <= xi * p + tol).all())
    radius = float(np.abs(np.linalg.eigvals(A)).max()) if A.size else 0.0
    passed = (not cond) or radius <= xi + tol
    return SpectralRadiusCheck(cond, radius, xi, passed)
