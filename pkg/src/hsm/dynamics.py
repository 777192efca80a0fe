"""Clique, block and Glauber dynamics for the hard-core model.

Each step consumes exactly two uniforms ``(u1, u2)`` from the chain's
generator: ``u1`` picks the clique (or block) as ``floor(u1 * m)`` and ``u2``
picks the outcome against the cumulative outcome probabilities. The same
arithmetic is used by the compiled kernels in :mod:`hsm._kernels`, so
a seed determines a trajectory regardless of which implementation runs it.

Exact transition matrices over all independent sets are available for
small instances, together with total-variation mixing times and spectral
gaps.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .hardcore import (BRUTE_FORCE_CAP, BlockCover, CapExceededError, CliqueCover,
                       Graph, HardCoreInstance, StateTable, independent_set_masks,
                       state_table, validate_clique_cover)

BLOCK_CAP = 20


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator for the stream ``(seed, *keys)``.

    Streams with different keys are statistically independent, so replicas
    can be scheduled in any order and still reproduce.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class ChainState:
    """Current independent set of a running chain together with its generator."""

    current: frozenset[int]
    step_count: int
    rng: np.random.Generator

    @classmethod
    def empty(cls, seed: int | np.random.Generator = 0) -> "ChainState":
        rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
        return cls(frozenset(), 0, rng)


@dataclass(frozen=True)
class DynamicsKind:
    """Which chain to run.

    ``variant`` is ``"clique"`` or ``"block"``; Glauber dynamics is the
    clique variant with the singleton cover. ``lazy`` holds the state with
    probability 1/2 before each move.
    """

    variant: str
    cover: CliqueCover
    lazy: bool = False
    name: str = ""

    def __post_init__(self):
        if self.variant not in ("clique", "block"):
            raise ValueError(f"unknown dynamics variant {self.variant!r}")
        if not self.name:
            object.__setattr__(self, "name", self.variant)

    @classmethod
    def clique(cls, cover: CliqueCover) -> "DynamicsKind":
        return cls("clique", cover)

    @classmethod
    def block(cls, cover: BlockCover | CliqueCover) -> "DynamicsKind":
        return cls("block", cover)

    @classmethod
    def glauber(cls, n: int) -> "DynamicsKind":
        return cls("clique", CliqueCover.singletons(n), name="glauber")

    def as_lazy(self) -> "DynamicsKind":
        return replace(self, lazy=True, name=f"lazy-{self.name}")


def lazy(kind: DynamicsKind) -> DynamicsKind:
    """Lazy version of ``kind`` (hold with probability 1/2)."""
    return kind.as_lazy()


# -- clique outcome tables -----------------------------------------------------

@dataclass(frozen=True)
class CliqueArrays:
    """CSR layout of a graph and a (possibly restricted) clique cover."""

    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray
    cl_ptr: np.ndarray
    cl_idx: np.ndarray
    cum: np.ndarray

    @property
    def m(self) -> int:
        return self.cl_ptr.size - 1

    def clique(self, i: int) -> np.ndarray:
        return self.cl_idx[self.cl_ptr[i]:self.cl_ptr[i + 1]]

    def cumulative(self, i: int) -> np.ndarray:
        a, b = self.cl_ptr[i], self.cl_ptr[i + 1]
        return self.cum[a + i:b + i + 1]


def clique_outcome_cdf(weights: Sequence[float]) -> np.ndarray:
    """Cumulative probabilities of (empty, v_1, ..., v_k) for a clique."""
    z = 1.0 + math.fsum(weights)
    partial = [1.0]
    for lam in weights:
        partial.append(partial[-1] + lam)
    cdf = np.array(partial) / z
    cdf[-1] = 1.0
    return cdf


def build_clique_arrays(instance: HardCoreInstance, cliques: Iterable[Sequence[int]]) -> CliqueArrays:
    adj = instance.graph.adjacency
    nbr_ptr = np.zeros(instance.n + 1, dtype=np.int64)
    nbr_ptr[1:] = np.cumsum([len(a) for a in adj])
    nbr_idx = np.fromiter((w for a in adj for w in a), dtype=np.int64, count=int(nbr_ptr[-1]))
    cliques = [tuple(c) for c in cliques]
    cl_ptr = np.zeros(len(cliques) + 1, dtype=np.int64)
    cl_ptr[1:] = np.cumsum([len(c) for c in cliques])
    cl_idx = np.fromiter((v for c in cliques for v in c), dtype=np.int64, count=int(cl_ptr[-1]))
    cum = np.concatenate([clique_outcome_cdf([instance.weights[v] for v in c]) for c in cliques]) \
        if cliques else np.zeros(0)
    return CliqueArrays(nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum)


def _check_cover(instance: HardCoreInstance, cover: CliqueCover, cliques: bool = True):
    report = validate_clique_cover(instance, cover)
    if not report.covering or (cliques and not report.cliques_ok):
        raise ValueError("invalid cover: " + "; ".join(report.failures))


_ARRAY_CACHE: dict = {}


def _arrays_for(instance: HardCoreInstance, cover: CliqueCover) -> CliqueArrays:
    key = (instance, cover)
    arr = _ARRAY_CACHE.get(key)
    if arr is None:
        _check_cover(instance, cover)
        arr = build_clique_arrays(instance, cover.cliques)
        if len(_ARRAY_CACHE) > 64:
            _ARRAY_CACHE.clear()
        _ARRAY_CACHE[key] = arr
    return arr


# -- single steps -------------------------------------------------------------------

def _apply_clique_move(instance: HardCoreInstance, clique: Sequence[int], cdf: np.ndarray,
                       current: frozenset[int], u2: float) -> frozenset[int]:
    j = bisect.bisect_right(cdf[:-1].tolist(), u2)
    if j == 0:
        return current.difference(clique)
    v = clique[j - 1]
    if any(w in current for w in instance.graph.adjacency[v]):
        return current
    return current | {v}


def clique_dynamics_step(instance: HardCoreInstance, cover: CliqueCover, state: ChainState) -> ChainState:
    """One clique-dynamics step; returns the successor state (the generator is shared).

    Pick ``i`` uniformly; draw ``I+`` from the Gibbs law of the clique
    (empty with probability ``1/Z(K_i)``); if empty, clear ``K_i``; else
    add ``I+`` when the union stays independent; otherwise stay.
    """
    arrays = _arrays_for(instance, cover)
    u1 = state.rng.random()
    u2 = state.rng.random()
    m = arrays.m
    i = min(int(u1 * m), m - 1)
    new = _apply_clique_move(instance, cover.cliques[i], arrays.cumulative(i), state.current, u2)
    return ChainState(new, state.step_count + 1, state.rng)


def _block_conditional(instance: HardCoreInstance, block: Sequence[int], outside: frozenset[int]):
    """Admissible configurations of ``block`` given the occupied outside set, with weights."""
    if len(block) > BLOCK_CAP:
        raise CapExceededError(f"block of size {len(block)} exceeds the cap of {BLOCK_CAP}")
    adj = instance.graph.adjacency
    free = [v for v in block if not any(w in outside for w in adj[v])]
    pos = {v: k for k, v in enumerate(free)}
    # independent sets of the part of the block not blocked from outside
    sub = Graph(len(free), tuple(tuple(sorted(pos[w] for w in adj[v] if w in pos)) for v in free))
    configs = []
    weights = []
    for mask in independent_set_masks(sub, cap=BLOCK_CAP):
        members = tuple(free[k] for k in range(len(free)) if (mask >> k) & 1)
        configs.append(members)
        weights.append(math.prod(instance.weights[v] for v in members))
    return configs, np.asarray(weights)


def block_dynamics_step(instance: HardCoreInstance, cover: BlockCover | CliqueCover, state: ChainState) -> ChainState:
    """One heat-bath update of a uniformly chosen block given the outside configuration."""
    blocks = cover.cliques
    u1 = state.rng.random()
    u2 = state.rng.random()
    m = len(blocks)
    i = min(int(u1 * m), m - 1)
    block = blocks[i]
    outside = state.current.difference(block)
    configs, w = _block_conditional(instance, block, outside)
    cdf = np.cumsum(w) / math.fsum(w)
    k = min(bisect.bisect_right(cdf[:-1].tolist(), u2), len(configs) - 1)
    return ChainState(outside | frozenset(configs[k]), state.step_count + 1, state.rng)


def step(instance: HardCoreInstance, kind: DynamicsKind, state: ChainState) -> ChainState:
    """Dispatch one step of ``kind`` (lazy variants draw one extra uniform first)."""
    if kind.lazy and state.rng.random() < 0.5:
        return ChainState(state.current, state.step_count + 1, state.rng)
    if kind.variant == "clique":
        return clique_dynamics_step(instance, kind.cover, state)
    return block_dynamics_step(instance, kind.cover, state)


# -- running chains -----------------------------------------------------------------

@dataclass
class ChainRun:
    """Retained samples of a run (with the step index of each) and the final state."""

    samples: list[tuple[int, ...]]
    times: list[int]
    final_state: ChainState


def _retained(t: int, burn_in: int, thin: int) -> bool:
    return t > burn_in and (t - burn_in) % thin == 0


def run_chain(instance: HardCoreInstance, kind: DynamicsKind, steps: int, seed: int = 0,
              burn_in: int = 0, thin: int = 1, compiled: bool | None = None) -> ChainRun:
    """Run ``steps`` steps from the empty set and keep every ``thin``-th post-burn-in state.

    The state after step ``t`` (1-based) is retained when ``t > burn_in``
    and ``(t - burn_in) % thin == 0``. Non-lazy clique dynamics runs
    in the compiled kernel unless ``compiled=False``; both give identical
    trajectories.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if thin < 1 or burn_in < 0:
        raise ValueError("thin must be >= 1 and burn_in >= 0")
    state = ChainState.empty(seed)
    if compiled is None:
        compiled = kind.variant == "clique" and not kind.lazy
    samples: list[tuple[int, ...]] = []
    times: list[int] = []
    if compiled and kind.variant == "clique" and not kind.lazy:
        arrays = _arrays_for(instance, kind.cover)
        occupied = np.zeros(instance.n, dtype=np.bool_)
        chunk = 65536
        done = 0
        while done < steps:
            k = min(chunk, steps - done)
            record = np.zeros((k, instance.n), dtype=np.bool_)
            _kernels.run_explicit(state.rng, arrays.nbr_ptr, arrays.nbr_idx, arrays.cl_ptr,
                                  arrays.cl_idx, arrays.cum, 0, k, occupied, record)
            for r in range(k):
                t = done + r + 1
                if _retained(t, burn_in, thin):
                    samples.append(tuple(np.flatnonzero(record[r]).tolist()))
                    times.append(t)
            done += k
        final = ChainState(frozenset(np.flatnonzero(occupied).tolist()), steps, state.rng)
        return ChainRun(samples, times, final)
    for t in range(1, steps + 1):
        state = step(instance, kind, state)
        if _retained(t, burn_in, thin):
            samples.append(tuple(sorted(state.current)))
            times.append(t)
    return ChainRun(samples, times, state)


def empirical_distribution(instance: HardCoreInstance, kind: DynamicsKind, steps: int,
                           seed: int = 0) -> np.ndarray:
    """Visit frequencies of a clique-dynamics run, indexed like :func:`state_table`."""
    if kind.variant != "clique" or kind.lazy:
        raise ValueError("only non-lazy clique dynamics has a compiled histogram")
    if instance.n > BRUTE_FORCE_CAP:
        raise CapExceededError("histogram needs a brute-force sized instance")
    arrays = _arrays_for(instance, kind.cover)
    bits = np.array([1 << v for v in range(instance.n)], dtype=np.int64)
    counts = _kernels.state_counts_explicit(make_rng(seed), arrays.nbr_ptr, arrays.nbr_idx,
                                            arrays.cl_ptr, arrays.cl_idx, arrays.cum, steps,
                                            np.zeros(instance.n, dtype=np.bool_), bits)
    table = state_table(instance)
    freq = counts[np.asarray(table.masks, dtype=np.int64)]
    return freq / max(steps, 1)


def dump_trajectory(run: ChainRun, path: str | Path) -> None:
    """Write retained samples as JSON lines ``{"t": step, "set": [...]}``."""
    with open(path, "w") as fh:
        for t, s in zip(run.times, run.samples):
            fh.write(json.dumps({"t": t, "set": list(s)}) + "\n")


def load_trajectory(path: str | Path) -> list[tuple[int, tuple[int, ...]]]:
    with open(path) as fh:
        return [(rec["t"], tuple(rec["set"])) for rec in map(json.loads, fh) if rec]


# -- exact matrices ---------------------------------------------------------------

@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix over an indexed list of independent sets."""

    states: tuple[tuple[int, ...], ...]
    probabilities: np.ndarray

    def __post_init__(self):
        P = self.probabilities
        if P.shape != (len(self.states), len(self.states)):
            raise ValueError("matrix shape does not match the state list")
        if (P < -1e-15).any() or not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("matrix is not row-stochastic")

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {s: k for k, s in enumerate(self.states)}

    def __len__(self):
        return len(self.states)


def _clique_matrix(instance: HardCoreInstance, cover: CliqueCover, table: StateTable) -> np.ndarray:
    N = len(table)
    P = np.zeros((N, N))
    m = len(cover)
    nbr = instance.graph.neighbor_masks
    lam = instance.weights
    for i, clique in enumerate(cover.cliques):
        z = 1.0 + math.fsum(lam[v] for v in clique)
        kmask = sum(1 << v for v in clique)
        for a, I in enumerate(table.masks):
            P[a, table.index[I & ~kmask]] += 1.0 / (m * z)
            for v in clique:
                J = I if (nbr[v] & I) else I | (1 << v)
                P[a, table.index[J]] += lam[v] / (m * z)
    return P


def _block_matrix(instance: HardCoreInstance, cover: CliqueCover, table: StateTable) -> np.ndarray:
    N = len(table)
    P = np.zeros((N, N))
    m = len(cover)
    for block in cover.cliques:
        bmask = sum(1 << v for v in block)
        cache: dict[int, tuple[list[int], np.ndarray]] = {}
        for a, I in enumerate(table.masks):
            out = I & ~bmask
            if out not in cache:
                outside = frozenset(v for v in range(instance.n) if (out >> v) & 1)
                configs, w = _block_conditional(instance, block, outside)
                targets = [table.index[out | sum(1 << v for v in c)] for c in configs]
                cache[out] = (targets, w / math.fsum(w))
            targets, probs = cache[out]
            for b, p in zip(targets, probs):
                P[a, b] += p / m
    return P


def transition_matrix_exact(instance: HardCoreInstance, kind: DynamicsKind) -> TransitionMatrix:
    """Exact one-step matrix of ``kind`` over all independent sets (brute-force sized)."""
    table = state_table(instance)
    if kind.variant == "clique":
        _check_cover(instance, kind.cover)
        P = _clique_matrix(instance, kind.cover, table)
    else:
        _check_cover(instance, kind.cover, cliques=False)
        P = _block_matrix(instance, kind.cover, table)
    if kind.lazy:
        P = 0.5 * (P + np.eye(len(table)))
    return TransitionMatrix(table.sets, P)


def tv_distance(p, q) -> float:
    """Total-variation distance ``(1/2) sum |p - q|`` of two distributions on the same index."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"mismatched supports {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


class MixingCapReached(RuntimeError):
    """The chain was not within the requested distance by the iteration cap."""

    def __init__(self, cap: int, distance: float):
        super().__init__(f"not mixed by cap: distance {distance:.3g} after {cap} steps")
        self.cap = cap
        self.distance = distance


def mixing_time_exact(instance: HardCoreInstance, kind: DynamicsKind, epsilon: float,
                      start: Iterable[int] = (), max_steps: int = 100_000,
                      matrix: TransitionMatrix | None = None) -> int:
    """Smallest ``t`` with ``d_TV(P^t(start, .), mu) <= epsilon``."""
    P = matrix if matrix is not None else transition_matrix_exact(instance, kind)
    pi = state_table(instance).probabilities
    x = np.zeros(len(P))
    x[P.index[tuple(sorted(start))]] = 1.0
    M = P.probabilities
    for t in range(max_steps + 1):
        dist = tv_distance(x, pi)
        if dist <= epsilon:
            return t
        x = x @ M
    raise MixingCapReached(max_steps, dist)


class DetailedBalanceError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralGap:
    lambda2: float
    lambda_min: float
    gap: float
    eigenvalues: np.ndarray = field(repr=False, compare=False)


def detailed_balance_residual(P: np.ndarray, pi: np.ndarray) -> float:
    flow = pi[:, None] * P
    return float(np.abs(flow - flow.T).max())


def spectral_gap(matrix: TransitionMatrix | np.ndarray, stationary) -> SpectralGap:
    """Eigenvalues of the reversible matrix via ``D^{1/2} P D^{-1/2}``.

    Raises :class:`DetailedBalanceError` when ``pi(x)P(x,y)`` and
    ``pi(y)P(y,x)`` differ by more than 1e-9.
    """
    P = matrix.probabilities if isinstance(matrix, TransitionMatrix) else np.asarray(matrix, float)
    pi = np.asarray(stationary, dtype=float)
    resid = detailed_balance_residual(P, pi)
    if resid > 1e-9:
        raise DetailedBalanceError(f"detailed balance violated by {resid:.3g}")
    s = np.sqrt(pi)
    S = s[:, None] * P / s[None, :]
    S = 0.5 * (S + S.T)
    ev = np.linalg.eigvalsh(S)
    lam2 = float(ev[-2]) if len(ev) > 1 else 0.0
    lam_min = float(ev[0]) if len(ev) > 1 else 0.0
    return SpectralGap(lam2, lam_min, 1.0 - max(lam2, abs(lam_min)), ev)


def mixing_time_bound(gap: float, pi_min: float, epsilon: float) -> float:
    """Upper bound ``(1/gap) ln(1/(pi_min eps))`` on the mixing time."""
    if gap <= 0:
        return math.inf
    return math.log(1.0 / (pi_min * epsilon)) / gap
