"""Batteries of exact numerical checks on small built-in instance families.

Each suite returns a list of :class:`LemmaResult`, one per checked
statement, with the worst slack seen (``rhs - lhs`` for inequalities,
``tol - error`` for identities) and a digest of the instances used.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .dynamics import DynamicsKind, detailed_balance_residual, transition_matrix_exact
from .hardcore import (BlockCover, CliqueCover, Graph, HardCoreInstance, PartialConfig, greedy_clique_cover,
                       induced_subinstance, instance_to_dict, log_tree_threshold, marginals, state_table)
from .spectral.complex import (clique_influence_identities, clique_vs_block_check, complex_representation,
                               disjointify_cover, local_expansion_profile, max_clique_Z, scale_invariance_check,
                               skeleton_reversibility_residual, two_step_matches_block_dynamics,
                               verify_spectral_bounds)
from .spectral.influence import (cdc_implies_influence_bound_check, cdc_max_alpha, check_influence_condition,
                                 influence_sign_symmetry, pairwise_influence, spectral_radius_bound_check)
from .spectral.saw import influence_decay_check, verify_saw_influence, verify_tree_multiplicativity
from .spheres import Discretization, HardSphereInstance, exact_max_degree, explicit_graph, max_degree_bound

SUITES = ("stationarity", "influence", "saw", "complex", "bounds")


@dataclass
class LemmaResult:
    lemma: str
    passed: bool = True
    worst_slack: float = math.inf
    checks: int = 0
    failures: list[str] = field(default_factory=list)
    instance_digest: str = ""
    diagnostic: bool = False
    _instances: list = field(default_factory=list, repr=False)

    def record(self, name: str, instance: HardCoreInstance | None, slack: float, detail: str = "") -> None:
        self.checks += 1
        self.worst_slack = min(self.worst_slack, float(slack))
        if instance is not None:
            self._instances.append(instance_to_dict(instance))
        if slack < 0:
            if not self.diagnostic:
                self.passed = False
            if len(self.failures) < 5:
                self.failures.append(f"{name}: slack {slack:.3e} {detail}".strip())

    def finish(self) -> "LemmaResult":
        blob = json.dumps(self._instances, sort_keys=True).encode()
        self.instance_digest = hashlib.sha256(blob).hexdigest()[:16]
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_instances")
        d["worst_slack"] = None if math.isinf(self.worst_slack) else self.worst_slack
        return d


# -- instance families ----------------------------------------------------------------------

def _path(n):
    return [(i, i + 1) for i in range(n - 1)]


def _cycle(n):
    return _path(n) + [(n - 1, 0)]


def _complete(n):
    return list(itertools.combinations(range(n), 2))


def _random_graph(rng, n, p):
    return [(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < p]


def _random_tree(rng, n):
    return [(int(rng.integers(v)), v) for v in range(1, n)]


def instance_family(seed: int = 0, random_count: int = 8, max_n: int = 10) -> list[tuple[str, HardCoreInstance]]:
    """Paths, cycles, cliques, stars, random graphs (``n <= max_n``) and tiny hard-sphere grids."""
    rng = np.random.default_rng(seed)
    out = []
    for n in (2, 3, 5):
        out.append((f"path{n}", HardCoreInstance.from_edges(n, _path(n), 1.0)))
    for n in (3, 4, 5, 6):
        out.append((f"cycle{n}", HardCoreInstance.from_edges(n, _cycle(n), 0.8)))
    for n in (2, 3, 4):
        out.append((f"clique{n}", HardCoreInstance.from_edges(n, _complete(n), 0.6)))
    out.append(("star4", HardCoreInstance.from_edges(5, [(0, k) for k in range(1, 5)], 0.5)))
    for k in range(random_count):
        n = int(rng.integers(4, max_n + 1))
        edges = _random_graph(rng, n, float(rng.uniform(0.2, 0.6)))
        out.append((f"random{k}", HardCoreInstance.from_edges(n, edges, rng.uniform(0.2, 2.0, n))))
    for d, ell, rho in ((1, 4.0, 2), (2, 1.0, 2), (2, 1.0, 3)):
        disc = Discretization(HardSphereInstance(d, ell, 0.5), rho)
        out.append((f"grid_d{d}_rho{rho}", explicit_graph(disc)))
    return out


def _covers(instance: HardCoreInstance) -> list[tuple[str, CliqueCover]]:
    greedy = greedy_clique_cover(instance.graph)
    covers = [("singletons", CliqueCover.singletons(instance.n)), ("greedy", greedy)]
    edges = _edge_cover(instance)
    if not edges.is_disjoint:
        covers.append(("edges", edges))
        dis = disjointify_cover(instance, edges).cover
        covers.append(("edges_disjoint", CliqueCover([c for c in dis if c])))
    return covers


def _edge_cover(instance: HardCoreInstance) -> CliqueCover:
    """Every edge as a clique, plus isolated vertices; overlapping whenever a vertex has degree >= 2."""
    g = instance.graph
    return CliqueCover([list(e) for e in g.edges()] + [[v] for v in range(g.vertex_count) if g.degree(v) == 0])


def _disjoint_nonempty(instance: HardCoreInstance) -> CliqueCover:
    dis = disjointify_cover(instance, greedy_clique_cover(instance.graph)).cover
    return CliqueCover([c for c in dis if c])


def _cdc_instance(rng, n: int, alpha: float) -> HardCoreInstance:
    """Random graph with weights small enough for the strict condition with ``mu = 1``."""
    edges = _random_graph(rng, n, float(rng.uniform(0.2, 0.5)))
    g = Graph.from_edges(n, edges)
    cap = (1 - alpha) / max(g.max_degree, 1)
    frac = rng.uniform(0.3, 1.0, n) * cap
    return HardCoreInstance(g, tuple(float(f / (1 - f)) for f in frac))


# -- suites ---------------------------------------------------------------------------------

def suite_stationarity(family) -> list[LemmaResult]:
    stat = LemmaResult("stationarity")
    rev = LemmaResult("detailed_balance")
    for name, inst in family:
        table = state_table(inst)
        pi = table.probabilities
        kinds = [("glauber", DynamicsKind.glauber(inst.n))]
        for cname, cover in _covers(inst):
            kinds.append((f"clique/{cname}", DynamicsKind.clique(cover)))
            kinds.append((f"block/{cname}", DynamicsKind.block(BlockCover(cover.cliques))))
        for kname, kind in kinds:
            P = transition_matrix_exact(inst, kind).probabilities
            stat.record(f"{name}/{kname}", inst, 1e-10 - float(np.abs(pi @ P - pi).max()))
            rev.record(f"{name}/{kname}", inst, 1e-10 - detailed_balance_residual(P, pi))
    return [stat.finish(), rev.finish()]


def suite_influence(family, seed: int = 0) -> list[LemmaResult]:
    basic = LemmaResult("influence_definition")
    prob = LemmaResult("probability_bound")
    coh = LemmaResult("conditional_coherence")
    radius = LemmaResult("spectral_radius")
    cdc = LemmaResult("pairwise_influence_spmc")
    sign = LemmaResult("sign_symmetry", diagnostic=True)
    for name, inst in family:
        if inst.n > 10:
            continue
        psi = pairwise_influence(inst).entries
        err = max(float(np.abs(np.diag(psi)).max()), float(np.abs(psi).max()) - 1.0, 0.0)
        basic.record(name, inst, 1e-12 - err)
        mu1 = marginals(inst)[:, 0]
        for v, w in inst.graph.edges():
            for a, b in ((v, w), (w, v)):
                prob.record(f"{name}/{a}->{b}", inst, -psi[a, b] - mu1[b])
        # zero-conditioning on a vertex set equals the induced instance
        S = list(range(0, inst.n, 3))
        rest = [v for v in range(inst.n) if v not in S]
        if len(rest) >= 2:
            cond = pairwise_influence(inst, PartialConfig.zeros(S)).entries
            sub, _ = induced_subinstance(inst, rest)
            coh.record(name, inst, 1e-12 - float(np.abs(cond - pairwise_influence(sub).entries).max()))
        xi = float(np.abs(psi).sum(axis=1).max())
        chk = spectral_radius_bound_check(psi, np.ones(inst.n), xi)
        radius.record(name, inst, xi + 1e-9 - chk.spectral_radius)
        sign.record(name, inst, -float(len(influence_sign_symmetry(inst))))
    rng = np.random.default_rng(seed + 1)
    for k in range(6):
        inst = _cdc_instance(rng, int(rng.integers(4, 9)), 0.3)
        alpha = min(0.3, cdc_max_alpha(inst, np.ones(inst.n)))
        rep = cdc_implies_influence_bound_check(inst, np.ones(inst.n), alpha)
        # a failed strict condition has no influence slack to report
        cdc.record(f"cdc{k}", inst, rep.worst_slack if rep.influence is not None else -1.0)
    return [r.finish() for r in (basic, prob, coh, radius, cdc, sign)]


def suite_saw(family, seed: int = 0) -> list[LemmaResult]:
    saw = LemmaResult("saw_influence")
    routes = LemmaResult("saw_route_agreement")
    mult = LemmaResult("tree_influence")
    decay = LemmaResult("influence_decay")
    for name, inst in family:
        if inst.n > 7 or inst.graph.edge_count > 12:
            continue
        for r in range(inst.n):
            rep = verify_saw_influence(inst, r)
            saw.record(f"{name}/root{r}", inst, 1e-10 - rep.max_discrepancy)
            routes.record(f"{name}/root{r}", inst, 1e-10 - rep.route_discrepancy)
    rng = np.random.default_rng(seed + 2)
    for k in range(5):
        n = int(rng.integers(3, 11))
        inst = HardCoreInstance.from_edges(n, _random_tree(rng, n), rng.uniform(0.2, 2.0, n))
        mult.record(f"tree{k}", inst, 1e-12 - verify_tree_multiplicativity(inst).max_error)
    for k in range(4):
        inst = _cdc_instance(rng, int(rng.integers(4, 7)), 0.3)
        mu = np.ones(inst.n)
        alpha = cdc_max_alpha(inst, mu)
        for r in range(inst.n):
            rep = influence_decay_check(inst, r, mu, alpha)
            slack = min((b - s for s, b in zip(rep.layer_sums, rep.bounds)), default=0.0)
            decay.record(f"cdc{k}/root{r}", inst, slack + 1e-12)
    return [r.finish() for r in (saw, routes, mult, decay)]


def suite_complex(family) -> list[LemmaResult]:
    two = LemmaResult("two_step_equals_block")
    pure = LemmaResult("complex_structure")
    rev = LemmaResult("skeleton_reversibility")
    scale = LemmaResult("complex_scale_invariance")
    ident = {k: LemmaResult(k) for k in ("influence_on_clique", "clique_to_pairwise_1", "clique_to_pairwise_2")}
    local = LemmaResult("local_expansion")
    for name, inst in family:
        if inst.n > 10:
            continue
        cover = _disjoint_nonempty(inst)
        rep = complex_representation(inst, cover)
        two.record(name, inst, 1e-12 - two_step_matches_block_dynamics(inst, rep))
        per_part = np.array([[rep.partition_of[x] for x in row] for row in rep.faces])
        ok = (per_part == np.arange(rep.m)).all() and len(set(map(tuple, rep.faces.tolist()))) == len(rep.faces)
        pure.record(name, inst, (1e-12 - abs(rep.weights.sum() - 1.0)) if ok else -1.0)
        if rep.m < 2:
            continue
        rev.record(name, inst, 1e-12 - skeleton_reversibility_residual(rep))
        scale.record(name, inst, 1e-12 - scale_invariance_check(rep, 3.5))
        for key, val in clique_influence_identities(inst, cover).items():
            if key in ident:
                ident[key].record(name, inst, 1e-10 - val)
        if rep.m <= 5 and len(rep.faces) <= 200:
            prof = local_expansion_profile(rep)
            local.record(name, inst, prof.theorem_bound + 1e-9 - prof.two_step_lambda2)
    return [r.finish() for r in (two, pure, rev, scale, *ident.values(), local)]


def suite_bounds(family, seed: int = 0) -> list[LemmaResult]:
    eig = LemmaResult("eigenvalues_skeleton")
    canon = LemmaResult("canonical_paths")
    comp = LemmaResult("comparison_clique_dynamics")
    cib = LemmaResult("clique_influence_bound")
    dis = LemmaResult("non_disjoint_comparison")
    deg = LemmaResult("degree_bound")
    thr = LemmaResult("tree_threshold_arithmetic")
    for name, inst in family:
        if inst.n > 10:
            continue
        cover = _disjoint_nonempty(inst)
        if len(cover) >= 2:
            rep = verify_spectral_bounds(inst, cover)
            eig.record(name, inst, rep.influence_bound - rep.lambda2_skeleton + 1e-9)
            canon.record(name, inst, rep.canonical_path_bound - rep.lambda2_skeleton + 1e-9)
        for cov in (greedy_clique_cover(inst.graph), _edge_cover(inst)):
            c = clique_vs_block_check(inst, cov)
            comp.record(name, inst, c["slack"] + 1e-9)
            d = disjointify_cover(inst, cov).cover
            dis.record(name, inst, max_clique_Z(inst, cov) - max_clique_Z(inst, d) + 1e-12)
    rng = np.random.default_rng(seed + 3)
    for k in range(3):
        inst = _cdc_instance(rng, int(rng.integers(4, 7)), 0.3)
        mu = np.ones(inst.n)
        alpha = cdc_max_alpha(inst, mu)
        cert = check_influence_condition(inst, mu, 1.0 / alpha)
        cover = _disjoint_nonempty(inst)
        if not cert.ok or len(cover) < 2:
            continue
        subsets = [S for r in range(2, inst.n + 1) for S in itertools.combinations(range(inst.n), r)]
        rep = verify_spectral_bounds(inst, cover, certificate=cert, subsets=subsets)
        cib.record(f"cdc{k}", inst, rep.subset_bound - rep.worst_subset_lambda1 + 1e-9)
    for d in (1, 2):
        for rho_ell in range(2, 17):
            for ell in (1, 2):
                rho = Fraction(rho_ell, ell)
                disc = Discretization(HardSphereInstance(d, float(ell), 0.5), rho)
                if disc.vertex_count > 1024:
                    continue
                b = max_degree_bound(disc, 0.5)
                if b.precondition_met:
                    deg.record(f"d{d}/rho{rho}", None, b.bound - exact_max_degree(disc))
    for D in range(3, 201):
        thr.record(f"Delta{D}", None, math.log(D) + log_tree_threshold(D) - 1.0)
    return [r.finish() for r in (eig, canon, comp, cib, dis, deg, thr)]


def run_suite(suite: str, seed: int = 0, instances: list[tuple[str, HardCoreInstance]] | None = None) -> dict:
    """Run ``suite`` (or ``"all"``) and return the JSON-ready report."""
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    family = instances if instances is not None else instance_family(seed)
    names = SUITES if suite == "all" else (suite,)
    results = []
    for s in names:
        if s == "stationarity":
            results += suite_stationarity(family)
        elif s == "influence":
            results += suite_influence(family, seed)
        elif s == "saw":
            results += suite_saw(family, seed)
        elif s == "complex":
            results += suite_complex(family)
        else:
            results += suite_bounds(family, seed)
    digest = hashlib.sha256(json.dumps([instance_to_dict(i) for _, i in family], sort_keys=True).encode())
    return {"suite": suite, "seed": seed, "instance_digest": digest.hexdigest()[:16],
            "passed": all(r.passed for r in results), "results": [r.to_dict() for r in results]}
