"""Telescoping estimation of partition functions from clique-dynamics samples.

With ``V_i = V \\ (K_0 ∪ ... ∪ K_{i-1})`` the partition function factors as

    Z(G) = prod_i  Z(G[V_i]) / Z(G[V_{i+1}]) = prod_i 1 / p_i,

where ``p_i`` is the probability under ``mu(G[V_i])`` that clique ``K_i`` is
empty. Each ``p_i`` is estimated by the fraction of ``s`` approximate
samples (fresh clique-dynamics runs from the empty set) in which ``K_i``
is empty. Clique indices are 0-based throughout.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .dynamics import build_clique_arrays, make_rng
from .hardcore import (CliqueCover, HardCoreInstance, induced_subinstance, partition_function_bruteforce,
                       state_table, validate_clique_cover)
from .spheres import (CellCover, Discretization, HardSphereInstance, cell_clique_cover, check_fugacity_regime,
                      choose_resolution, convergence_error_bound, discretized_weight_below_threshold,
                      max_degree_bound)

DEFAULT_S_CONSTANT = 48.0
DEFAULT_EPS_S_CONSTANT = 1.0 / 8.0
DEFAULT_STEPS_CONSTANT = 1.5


class RegimeViolation(ValueError):
    """The hard-sphere fugacity is outside the supported regime."""


class ZeroRatioError(RuntimeError):
    """No sample had the target clique empty; the estimate would be infinite."""


@dataclass(frozen=True)
class Budget:
    samples_per_ratio: int
    per_sample_tv: float
    steps_per_sample: int


def sample_budget(m: int, z_max: float, epsilon: float, s_constant: float = DEFAULT_S_CONSTANT,
                  eps_s_constant: float = DEFAULT_EPS_S_CONSTANT,
                  steps_constant: float = DEFAULT_STEPS_CONSTANT) -> Budget:
    """Concrete sample sizes for an ``epsilon``-approximation.

    ``s = ceil(s_constant m Z_max / eps^2)``,
    ``eps_s = eps_s_constant eps / (m Z_max)``,
    ``steps = ceil(steps_constant m Z_max ln(m Z_max / eps_s))``.
    """
    if m <= 0 or z_max <= 0 or epsilon <= 0:
        raise ValueError("m, Z_max and epsilon must be positive")
    s = math.ceil(s_constant * m * z_max / epsilon ** 2 - 1e-9)
    eps_s = eps_s_constant * epsilon / (m * z_max)
    return Budget(s, eps_s, chain_length(m, z_max, eps_s, steps_constant))


def chain_length(m: int, z_max: float, eps_s: float, steps_constant: float = DEFAULT_STEPS_CONSTANT) -> int:
    """Steps per sample, ``ceil(c m Z_max ln(m Z_max / eps_s))``."""
    return max(1, math.ceil(steps_constant * m * z_max * math.log(m * z_max / eps_s)))


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator settings; unset sample sizes are filled from :func:`sample_budget`.

    ``sampler="exact"`` replaces the chains by exact Gibbs draws (small
    instances only) to separate sampling bias from statistical error.
    """

    epsilon: float = 0.1
    samples_per_ratio: int | None = None
    per_sample_tv: float | None = None
    chain_steps_per_sample: int | None = None
    master_seed: int = 0
    parallel_chains: int = 1
    s_constant: float = DEFAULT_S_CONSTANT
    eps_s_constant: float = DEFAULT_EPS_S_CONSTANT
    steps_constant: float = DEFAULT_STEPS_CONSTANT
    sampler: str = "chain"
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.parallel_chains < 1 or self.threads < 1:
            raise ValueError("parallel_chains and threads must be >= 1")
        if self.sampler not in ("chain", "exact"):
            raise ValueError(f"unknown sampler {self.sampler!r}")

    def resolve(self, m: int, z_max: float) -> Budget:
        b = sample_budget(m, z_max, self.epsilon, self.s_constant, self.eps_s_constant, self.steps_constant)
        eps_s = self.per_sample_tv if self.per_sample_tv is not None else b.per_sample_tv
        steps = self.chain_steps_per_sample
        if steps is None:
            steps = chain_length(m, z_max, eps_s, self.steps_constant)
        s = self.samples_per_ratio if self.samples_per_ratio is not None else b.samples_per_ratio
        return Budget(int(s), float(eps_s), int(steps))

    def steps_for(self, m_active: int, z_max: float, budget: Budget) -> int:
        """Chain length for a ratio whose chain runs on ``m_active`` cliques.

        The schedule is applied to the restricted cover; an explicit
        ``chain_steps_per_sample`` is used unchanged.
        """
        if self.chain_steps_per_sample is not None:
            return int(self.chain_steps_per_sample)
        return chain_length(m_active, z_max, budget.per_sample_tv, self.steps_constant)


@dataclass
class EstimateReport:
    """Result of a telescoping estimate; ``estimate = prod 1/p_i``."""

    estimate: float
    log_estimate: float
    per_clique_ratios: list[float]
    hits: list[int]
    sample_counts: list[int]
    seed: int
    m: int
    z_max: float
    epsilon: float
    budget: dict
    regime_flags: dict = field(default_factory=dict)
    discretization: dict | None = None
    wall_time: float | None = None

    def to_dict(self, include_time: bool = False) -> dict:
        out = asdict(self)
        if not include_time or out["wall_time"] is None:
            out.pop("wall_time")
        if out["discretization"] is None:
            out.pop("discretization")
        return out

    def to_json(self, include_time: bool = False) -> str:
        return json.dumps(self.to_dict(include_time), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        lines = ["index,ratio,hits,samples"]
        for i, (p, h, s) in enumerate(zip(self.per_clique_ratios, self.hits, self.sample_counts)):
            lines.append(f"{i},{p!r},{h},{s}")
        return "\n".join(lines) + "\n"


# -- vertex sequence and exact ratios ---------------------------------------------------

def vertex_sequence(cover: CliqueCover, n: int) -> list[frozenset[int]]:
    """``V_0 = V, V_{i+1} = V_i \\ K_i``; the last entry is empty for a covering family."""
    seq = [frozenset(range(n))]
    for clique in cover.cliques:
        seq.append(seq[-1].difference(clique))
    return seq


def restricted_cliques(cover: CliqueCover, n: int, i: int) -> list[tuple[int, ...]]:
    """Cover of ``G[V_i]`` by ``K_j ∩ V_i`` for ``j >= i``; entry 0 is the target clique.

    Empty intersections other than the target are dropped.
    """
    V_i = vertex_sequence(cover, n)[i]
    out = [tuple(v for v in cover.cliques[i] if v in V_i)]
    for clique in cover.cliques[i + 1:]:
        rest = tuple(v for v in clique if v in V_i)
        if rest:
            out.append(rest)
    return out


def exact_ratios(instance: HardCoreInstance, cover: CliqueCover) -> list[float]:
    """Brute-force ``p_i = Z(G[V_{i+1}]) / Z(G[V_i])``."""
    zs = [partition_function_bruteforce(induced_subinstance(instance, V)[0])
          for V in vertex_sequence(cover, instance.n)]
    return [zs[i + 1] / zs[i] for i in range(len(cover))]


# -- sampling ---------------------------------------------------------------------------

def _split(total: int, parts: int) -> list[int]:
    return [total // parts + (1 if r < total % parts else 0) for r in range(parts)]


def _run_tasks(fn, tasks: list, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _explicit_hits(instance: HardCoreInstance, cliques: list[tuple[int, ...]], steps: int,
                   seed: int, i: int, r: int, n_samples: int) -> int:
    arrays = build_clique_arrays(instance, cliques)
    rng = make_rng(seed, i, r)
    if instance.n <= 63:
        nbr_mask = np.array(instance.graph.neighbor_masks, dtype=np.int64)
        cl_mask = np.array([sum(1 << v for v in c) for c in cliques], dtype=np.int64)
        return int(_kernels.count_empty_bitmask(rng, nbr_mask, arrays.cl_ptr, arrays.cl_idx, cl_mask,
                                                arrays.cum, steps, n_samples, cl_mask[0]))
    occupied = np.zeros(instance.n, dtype=np.bool_)
    return int(_kernels.count_empty_explicit(rng, arrays.nbr_ptr, arrays.nbr_idx,
                                             arrays.cl_ptr, arrays.cl_idx, arrays.cum, 0, steps,
                                             n_samples, occupied))


def _exact_hits(instance: HardCoreInstance, cover: CliqueCover, seed: int, i: int, r: int,
                n_samples: int) -> int:
    V_i = vertex_sequence(cover, instance.n)[i]
    sub, keep = induced_subinstance(instance, V_i)
    table = state_table(sub)
    local = {v: k for k, v in enumerate(keep)}
    target = [local[v] for v in cover.cliques[i] if v in local]
    empty = ~table.members[:, target].any(axis=1) if target else np.ones(len(table), dtype=bool)
    cdf = np.cumsum(table.probabilities)
    cdf[-1] = 1.0
    draws = np.searchsorted(cdf, make_rng(seed, i, r).random(n_samples), side="right")
    return int(empty[draws].sum())


@dataclass(frozen=True)
class RatioResult:
    ratio: float
    hits: int
    samples: int


def ratio_estimate(instance: HardCoreInstance, cover: CliqueCover, i: int,
                   config: EstimatorConfig, budget: Budget | None = None) -> RatioResult:
    """Estimate ``Pr_{mu(G[V_i])}[I ∩ K_i = ∅]`` from ``s`` samples.

    Raises :class:`ZeroRatioError` if no sample has ``K_i`` empty.
    """
    report = validate_clique_cover(instance, cover)
    if not report.valid:
        raise ValueError("invalid cover: " + "; ".join(report.failures))
    if budget is None:
        budget = config.resolve(len(cover), report.z_max)
    cliques = restricted_cliques(cover, instance.n, i)
    s = budget.samples_per_ratio
    if not cliques[0]:
        return RatioResult(1.0, s, s)
    steps = config.steps_for(len(cliques), report.z_max, budget)
    parts = _split(s, config.parallel_chains)
    if config.sampler == "exact":
        fn = lambda rk: _exact_hits(instance, cover, config.master_seed, i, rk[0], rk[1])  # noqa: E731
    else:
        fn = lambda rk: _explicit_hits(instance, cliques, steps,  # noqa: E731
                                       config.master_seed, i, rk[0], rk[1])
    hits = sum(_run_tasks(fn, list(enumerate(parts)), config.threads))
    if hits == 0:
        raise ZeroRatioError(f"clique {i} was never empty in {s} samples; increase the sample size")
    return RatioResult(hits / s, hits, s)


def _assemble(ratios: Sequence[RatioResult], seed: int, m: int, z_max: float, config: EstimatorConfig,
              budget: Budget) -> EstimateReport:
    log_est = -math.fsum(math.log(r.ratio) for r in ratios)
    return EstimateReport(
        estimate=math.exp(log_est), log_estimate=log_est,
        per_clique_ratios=[r.ratio for r in ratios], hits=[r.hits for r in ratios],
        sample_counts=[r.samples for r in ratios], seed=seed, m=m, z_max=z_max,
        epsilon=config.epsilon, budget=asdict(budget))


def estimate_partition_function(instance: HardCoreInstance, cover: CliqueCover,
                                config: EstimatorConfig) -> EstimateReport:
    """``prod_i 1 / p_hat_i`` over the cliques of a valid cover (log-space product)."""
    t0 = time.perf_counter()
    report = validate_clique_cover(instance, cover)
    if not report.valid:
        raise ValueError("invalid cover: " + "; ".join(report.failures))
    budget = config.resolve(len(cover), report.z_max)
    ratios = [ratio_estimate(instance, cover, i, config, budget) for i in range(len(cover))]
    out = _assemble(ratios, config.master_seed, len(cover), report.z_max, config, budget)
    out.wall_time = time.perf_counter() - t0
    return out


# -- implicit grids -------------------------------------------------------------------------

def _grid_hits(cover: CellCover, steps: int, seed: int, i: int, r: int, n_samples: int) -> int:
    disc = cover.disc
    occ = np.zeros(cover.m, dtype=np.bool_)
    coords = np.zeros((cover.m, disc.d), dtype=np.int64)
    return int(_kernels.count_empty_grid(make_rng(seed, i, r), i, cover.cell_sizes, cover.empty_probabilities,
                                         cover.cells_per_axis, cover.a, disc.grid_side, disc.d,
                                         disc.conflict_sq_max, cover.neighbor_cell_offsets, steps,
                                         n_samples, occ, coords))


def grid_ratio_estimate(cover: CellCover, i: int, config: EstimatorConfig, budget: Budget) -> RatioResult:
    """Ratio for cell ``i`` on the grid restricted to cells ``i, i+1, ...``."""
    s = budget.samples_per_ratio
    parts = _split(s, config.parallel_chains)
    steps = config.steps_for(cover.m - i, cover.z_max, budget)
    fn = lambda rk: _grid_hits(cover, steps, config.master_seed, i, rk[0], rk[1])  # noqa: E731
    hits = sum(_run_tasks(fn, list(enumerate(parts)), config.threads))
    if hits == 0:
        raise ZeroRatioError(f"cell {i} was never empty in {s} samples; increase the sample size")
    return RatioResult(hits / s, hits, s)


def estimate_grid_partition_function(cover: CellCover, config: EstimatorConfig) -> EstimateReport:
    """Telescoping estimate of ``Z(G_rho, lam_rho)`` without materializing the grid graph."""
    t0 = time.perf_counter()
    budget = config.resolve(cover.m, cover.z_max)
    ratios = [grid_ratio_estimate(cover, i, config, budget) for i in range(cover.m)]
    out = _assemble(ratios, config.master_seed, cover.m, cover.z_max, config, budget)
    out.discretization = {**cover.disc.report(), "cell_side": cover.a, "m": cover.m}
    out.wall_time = time.perf_counter() - t0
    return out


def hard_sphere_setup(instance: HardSphereInstance, epsilon: float, delta: float,
                      strict: bool = True) -> tuple[Discretization, CellCover, dict, dict]:
    """Resolution, cell cover, regime flags and a discretization summary for the pipeline.

    Uses ``gamma = delta' = delta / 2`` and ``eps' = epsilon / 3``.
    """
    if not check_fugacity_regime(instance, delta):
        raise RegimeViolation(
            f"lambda={instance.lam} exceeds (1 - delta) e / 2^d = {(1 - delta) * math.e / 2 ** instance.d:.6g}")
    gamma = delta / 2
    eps_prime = epsilon / 3
    disc = choose_resolution(instance, eps_prime, gamma, strict)
    cover = cell_clique_cover(disc)
    deg = max_degree_bound(disc, gamma)
    flags = {
        "fugacity_regime": True,
        "rho_at_least_2sqrt_d": float(disc.rho) >= 2 * math.sqrt(instance.d),
        "degree_bound_precondition": deg.precondition_met,
        "weight_below_tree_threshold": discretized_weight_below_threshold(disc, gamma, delta / 2),
        "discretization_error_within_eps_prime": convergence_error_bound(instance, disc.rho) <= eps_prime,
        "cells_are_cliques": cover.diameter_sq() <= disc.conflict_sq_max,
    }
    summary = {**disc.report(), "cell_side": cover.a, "m": cover.m, "z_max": cover.z_max,
               "degree_bound": deg.bound, "rho_gamma": deg.rho_gamma, "gamma": gamma,
               "eps_prime": eps_prime, "convergence_error_bound": convergence_error_bound(instance, disc.rho),
               "instance": instance.to_dict(), "delta": delta}
    return disc, cover, flags, summary


def estimate_hard_sphere(instance: HardSphereInstance, epsilon: float, delta: float, seed: int = 0,
                         config: EstimatorConfig | None = None, strict: bool = True) -> EstimateReport:
    """End-to-end ``epsilon``-approximation of the continuous partition function.

    The discretization error and the sampling error each get ``epsilon / 3``.
    ``config`` may override sampler constants; its ``epsilon`` and seed are
    replaced by ``epsilon / 3`` and ``seed``.
    """
    t0 = time.perf_counter()
    disc, cover, flags, summary = hard_sphere_setup(instance, epsilon, delta, strict)
    base = config if config is not None else EstimatorConfig()
    cfg = replace(base, epsilon=epsilon / 3, master_seed=seed)
    out = estimate_grid_partition_function(cover, cfg)
    out.epsilon = epsilon
    out.regime_flags = flags
    out.discretization = summary
    out.wall_time = time.perf_counter() - t0
    return out
