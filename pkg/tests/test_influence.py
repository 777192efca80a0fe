"""Pairwise influence, the influence bound condition and the strict clique dynamics condition."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import instances, random_instance
from hsm.hardcore import HardCoreInstance, PartialConfig, induced_subinstance, state_table
from hsm.spectral.influence import (
    UndefinedInfluenceError,
    cdc_implies_influence_bound_check,
    cdc_max_alpha,
    check_influence_condition,
    check_strict_cdc,
    influence_sign_symmetry,
    pairwise_influence,
    spectral_radius_bound_check,
    subset_influence,
)


def edge(lam=1.0):
    return HardCoreInstance.from_edges(2, [(0, 1)], lam)


def star(k, lam=1.0):
    return HardCoreInstance.from_edges(k + 1, [(0, i) for i in range(1, k + 1)], lam)


def test_single_edge_influence():
    psi = pairwise_influence(edge())
    assert psi(0, 1) == pytest.approx(-0.5)
    assert psi(1, 0) == pytest.approx(-0.5)


def test_isolated_vertices_have_no_influence():
    psi = pairwise_influence(HardCoreInstance.from_edges(2, [], 1.0))
    assert psi(0, 1) == 0.0


def test_path3_hand_values():
    psi = pairwise_influence(HardCoreInstance.from_edges(3, [(0, 1), (1, 2)], 1.0))
    assert psi(0, 1) == pytest.approx(-1 / 3)
    assert psi(1, 2) == pytest.approx(-1 / 2)
    assert psi(0, 2) == pytest.approx(1 / 6)


def _direct_influence(inst, v, w, condition=None):
    """Conditional probabilities summed over explicitly listed independent sets."""
    table = state_table(inst)
    cond = {} if condition is None else condition.assignment
    num = {0: 0.0, 1: 0.0}
    den = {0: 0.0, 1: 0.0}
    for members, wt in zip(table.members, table.weights):
        if any(bool(members[u]) != bool(s) for u, s in cond.items()):
            continue
        sv = int(members[v])
        den[sv] += wt
        num[sv] += wt * members[w]
    return num[1] / den[1] - num[0] / den[0]


@given(instances(2, 7))
def test_influence_matches_direct_sums(inst):
    psi = pairwise_influence(inst)
    for v in range(inst.n):
        for w in range(inst.n):
            if v != w:
                assert psi(v, w) == pytest.approx(_direct_influence(inst, v, w), abs=1e-12)


@given(instances(3, 8), st.data())
def test_conditional_coherence(inst, data):
    """Influence under 0_S equals influence on the induced instance G[V \\ S]."""
    S = data.draw(st.sets(st.integers(0, inst.n - 1), max_size=inst.n - 2))
    cond = PartialConfig.zeros(S)
    psi_c = pairwise_influence(inst, cond)
    sub, keep = induced_subinstance(inst, [v for v in range(inst.n) if v not in S])
    psi_s = pairwise_influence(sub)
    assert psi_c.vertices == tuple(keep)
    assert np.allclose(psi_c.entries, psi_s.entries, atol=1e-12, equal_nan=True)


def test_conditioning_on_occupied_vertex():
    inst = HardCoreInstance.from_edges(3, [(0, 1), (1, 2)], 1.0)
    psi = pairwise_influence(inst, PartialConfig({1: 1}))
    # 0 and 2 are forced empty, so their rows are undefined
    assert not psi.defined.any()


def test_zero_probability_condition():
    with pytest.raises(UndefinedInfluenceError):
        pairwise_influence(edge(), PartialConfig({0: 1, 1: 1}))


def test_subset_influence_equals_induced_instance(rng):
    inst = random_instance(rng, 8, 0.4)
    table = state_table(inst)
    S = [0, 2, 3, 6]
    sub, _ = induced_subinstance(inst, S)
    assert np.allclose(subset_influence(table, S), pairwise_influence(sub).entries, atol=1e-12)


def test_sign_symmetry_diagnostic_runs(rng):
    # not asserted as a law: just exercise the diagnostic on a few instances
    for _ in range(5):
        out = influence_sign_symmetry(random_instance(rng, 7, 0.4))
        assert isinstance(out, list)


# -- influence bound condition --------------------------------------------------------

def test_edgeless_certificate():
    cert = check_influence_condition(HardCoreInstance.from_edges(4, [], 1.0), [1.0] * 4, 0.0)
    assert cert.ok and cert.worst_ratio == 0.0


def test_single_edge_certificate():
    cert = check_influence_condition(edge(), [1.0, 1.0], 0.5)
    assert cert.ok
    assert cert.worst_ratio == pytest.approx(0.5)
    bad = check_influence_condition(edge(), [1.0, 1.0], 0.4)
    assert not bad.ok and bad.lhs == pytest.approx(0.5)


def test_sampled_subset_policy(rng):
    inst = random_instance(rng, 9, 0.3, (0.1, 0.3))
    cert = check_influence_condition(inst, [1.0] * 9, 10.0, ("sampled", 20, 1))
    assert cert.ok and cert.subsets_checked == 20


def test_influence_condition_rejects_bad_q():
    with pytest.raises(ValueError):
        check_influence_condition(edge(), [1.0, 0.0], 1.0)


# -- strict clique dynamics condition --------------------------------------------------

def test_cdc_edgeless():
    assert check_strict_cdc(HardCoreInstance.from_edges(3, [], 5.0), [1, 2, 3], 1.0).ok


def test_cdc_single_edge_threshold():
    assert check_strict_cdc(edge(), [1, 1], 0.5).ok
    assert not check_strict_cdc(edge(), [1, 1], 0.51).ok
    assert cdc_max_alpha(edge(), [1, 1]) == pytest.approx(0.5)


def test_cdc_star_fails():
    for alpha in (0.0, 0.1, 0.5):
        res = check_strict_cdc(star(3), [1, 1, 1, 1], alpha)
        assert not res.ok and res.vertex == 0 and res.lhs == pytest.approx(1.5)


def test_cdc_implies_influence_single_edge():
    rep = cdc_implies_influence_bound_check(edge(), [1, 1], 0.5)
    assert rep.passed and rep.C == 2.0
    assert rep.influence.worst_ratio == pytest.approx(0.5)


def test_cdc_implies_influence_edgeless():
    assert cdc_implies_influence_bound_check(HardCoreInstance.from_edges(3, [], 1.0), [1, 1, 1], 0.9).passed


def test_cdc_implies_influence_random_tree():
    rng = np.random.default_rng(8)
    for _ in range(3):
        parents = [int(rng.integers(0, v)) for v in range(1, 8)]
        edges = [(p, v) for v, p in enumerate(parents, start=1)]
        deg = max(sum(1 for e in edges if v in e) for v in range(8))
        # lam/(1+lam) * deg <= 0.7 gives the condition with alpha = 0.3 and mu = 1
        x = 0.7 / deg
        inst = HardCoreInstance.from_edges(8, edges, x / (1 - x))
        rep = cdc_implies_influence_bound_check(inst, [1.0] * 8, 0.3)
        assert rep.cdc.ok and rep.passed
        assert rep.C == pytest.approx(10 / 3)


# -- spectral radius -------------------------------------------------------------------

def test_spectral_radius_examples():
    z = spectral_radius_bound_check(np.zeros((3, 3)), np.ones(3), 0.0)
    assert z.row_condition and z.passed
    ident = spectral_radius_bound_check(np.eye(3), np.ones(3), 1.0)
    assert ident.row_condition and ident.spectral_radius == pytest.approx(1.0) and ident.passed


@given(st.integers(1, 8), st.integers(0, 10**6))
def test_perron_row_sum_bound(n, seed):
    A = np.random.default_rng(seed).normal(size=(n, n))
    xi = np.abs(A).sum(axis=1).max()
    res = spectral_radius_bound_check(A, np.ones(n), xi)
    assert res.row_condition and res.passed


def test_spectral_radius_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        spectral_radius_bound_check(np.eye(2), np.ones(3), 1.0)
