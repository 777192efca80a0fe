"""Hard-sphere model, grid discretization, cell cover and one-dimensional oracles."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hsm.hardcore import CapExceededError, partition_function_bruteforce, validate_clique_cover
from hsm.spheres import (
    CellCover,
    Discretization,
    HardSphereInstance,
    cell_clique_cover,
    cell_side,
    check_fugacity_regime,
    choose_resolution,
    convergence_error_bound,
    discretized_weight_below_threshold,
    discretized_Z_1d,
    exact_max_degree,
    explicit_graph,
    integer_sphere_bound,
    integer_sphere_count,
    lattice_rods_Z,
    max_degree_bound,
    neighbors,
    ordered_tuple_counts,
    sphere_radius,
    tonks_gas_Z,
    unit_ball_volume,
)


def disc(d, ell, lam, rho, strict=True):
    return Discretization(HardSphereInstance(d, ell, lam), Fraction(rho), strict)


# -- geometry ------------------------------------------------------------------------

@pytest.mark.parametrize("d,expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_unit_ball_volume(d, expected):
    assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("d,expected", [(1, 0.5), (2, 0.564190), (3, 0.620350)])
def test_sphere_radius_examples(d, expected):
    assert sphere_radius(d) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("d", range(1, 9))
def test_unit_particle_volume(d):
    assert unit_ball_volume(d) * sphere_radius(d) ** d == pytest.approx(1.0, abs=1e-12)


def test_instance_json_roundtrip():
    inst = HardSphereInstance(2, 3.0, 0.4)
    assert HardSphereInstance.from_dict(inst.to_dict()) == inst
    assert inst.to_dict() == {"d": 2, "ell": 3.0, "lambda": 0.4}


# -- discretization ------------------------------------------------------------------

def test_discretization_fields():
    dz = disc(2, 3, 0.5, 4)
    assert dz.grid_side == 12
    assert dz.vertex_count == 144
    assert dz.lam_rho == 0.5 / 16
    assert dz.conflict_radius == pytest.approx(8 * sphere_radius(2))


def test_discretization_requires_integer_side():
    with pytest.raises(ValueError):
        disc(1, 2, 1.0, Fraction(1, 3))


def test_neighbors_interior_and_boundary():
    dz = disc(1, 2, 1.0, 4)
    assert neighbors(dz, (3,)) == [(0,), (1,), (2,), (4,), (5,), (6,)]
    assert neighbors(dz, (0,)) == [(1,), (2,), (3,)]


def test_distance_at_conflict_radius_is_not_an_edge():
    dz = disc(1, 2, 1.0, 4)
    assert not dz.conflicts((0,), (4,))
    assert disc(1, 2, 1.0, 4, strict=False).conflicts((0,), (4,))


def test_neighbors_out_of_bounds():
    with pytest.raises(IndexError):
        neighbors(disc(1, 2, 1.0, 4), (8,))


def test_explicit_graph_rho_one_has_no_edge():
    lam = 0.7
    inst = explicit_graph(disc(1, 2, lam, 1))
    assert inst.n == 2 and inst.graph.edge_count == 0
    assert partition_function_bruteforce(inst) == pytest.approx((1 + lam) ** 2)


def test_explicit_graph_cap():
    with pytest.raises(CapExceededError):
        explicit_graph(disc(2, 4, 0.5, 20))


GRIDS = [(1, 2, 4), (1, 3, 3), (1, 1, 7), (2, 1, 3), (2, 2, 3), (2, 2, 4), (2, 1, 5), (3, 1, 3), (3, 1, 4)]


@pytest.mark.parametrize("d,ell,rho", GRIDS)
def test_neighbor_oracle_matches_explicit_graph(d, ell, rho):
    dz = disc(d, ell, 0.1, rho)
    inst = explicit_graph(dz)
    # d = 1: (2 rho r)^2 = rho^2 exactly; d >= 2: irrational, so float is safe
    r2 = dz.rho ** 2 if d == 1 else (2 * float(dz.rho) * dz.parent.radius) ** 2
    for k in range(inst.n):
        x = dz.point_of(k)
        nb = sorted(dz.index_of(y) for y in neighbors(dz, x))
        assert nb == sorted(inst.graph.adjacency[k])
        # independent check by float distance (no grid point lies on the boundary here)
        direct = sorted(j for j in range(inst.n)
                        if j != k and sum((a - b) ** 2 for a, b in zip(x, dz.point_of(j))) < r2)
        assert nb == direct


def test_vertex_count_and_interior_degree():
    dz = disc(2, 3, 0.1, 3)
    inst = explicit_graph(dz)
    assert inst.n == 81
    centre = dz.index_of((4, 4))
    assert inst.graph.degree(centre) == len(dz.offsets)


# -- integer spheres and degree bounds ------------------------------------------------

def test_integer_sphere_count_examples():
    assert integer_sphere_count(2, 2) == 13
    for t in (0, 0.5, 1, 2.7, 10):
        assert integer_sphere_count(1, t) == 2 * math.floor(t) + 1


def test_integer_sphere_count_bruteforce():
    for d, s in [(2, 3.3), (3, 2.2), (2, 5.0)]:
        R = math.floor(s)
        direct = sum(1 for p in itertools.product(range(-R, R + 1), repeat=d) if sum(c * c for c in p) <= s * s)
        assert integer_sphere_count(d, s) == direct


def test_integer_sphere_count_too_large():
    with pytest.raises(CapExceededError):
        integer_sphere_count(4, 1e4)


@given(st.integers(1, 3), st.floats(0.5, 3.0), st.floats(0.2, 1.0))
def test_sphere_bound_dominates_count(d, s, gamma):
    b = integer_sphere_bound(d, s, 1.0, gamma)
    rho = max(1.0, b.rho_min)
    b = integer_sphere_bound(d, s, rho, gamma)
    if rho * s <= 40:
        assert b.precondition_met
        assert integer_sphere_count(d, rho * s) <= b.value


def test_max_degree_bound_examples():
    assert max_degree_bound(disc(2, 1, 0.1, 10), 0.5).bound == pytest.approx(600)
    assert max_degree_bound(disc(1, 1, 0.1, 8), 1.0).bound == pytest.approx(32)


@pytest.mark.parametrize("d,ell,rho", [(1, 2, 4), (1, 2, 8), (1, 4, 16), (2, 2, 8), (2, 4, 10), (2, 2, 16)])
def test_exact_degree_below_bound(d, ell, rho):
    dz = disc(d, ell, 0.1, rho)
    b = max_degree_bound(dz, 1.0)
    if b.precondition_met:
        assert exact_max_degree(dz) <= b.bound


def test_fugacity_regime_examples():
    assert math.e / 4 == pytest.approx(0.679570, abs=1e-6)
    assert check_fugacity_regime(HardSphereInstance(2, 1, 0.6), 0.1)
    assert not check_fugacity_regime(HardSphereInstance(1, 1, 1.4), 0.1)


def test_weight_below_tree_threshold_examples():
    assert discretized_weight_below_threshold(disc(1, 1, 1.0, 16), 0.1, 0.1)
    lam_c = math.e / 2
    assert not discretized_weight_below_threshold(disc(1, 1, lam_c, 16), 0.1, 0.1)


@pytest.mark.parametrize("d,lam,delta", [(1, 1.0, 0.2), (1, 1.2, 0.1), (2, 0.5, 0.2), (2, 0.6, 0.1)])
def test_regime_implies_discrete_threshold(d, lam, delta):
    inst = HardSphereInstance(d, 1, lam)
    assert check_fugacity_regime(inst, delta)
    gamma = delta / 2
    rho_min = math.ceil(max_degree_bound(disc(d, 1, lam, 1), gamma).rho_gamma)
    for rho in (rho_min, 2 * rho_min, 8 * rho_min):
        dz = disc(d, 1, lam, rho)
        assert max_degree_bound(dz, gamma).precondition_met
        assert discretized_weight_below_threshold(dz, gamma, delta / 2)


# -- cell cover ------------------------------------------------------------------------

def test_cell_side_examples():
    assert cell_side(disc(2, 1, 0.1, 10)) == 7
    cov = cell_clique_cover(disc(1, 2, 0.1, 4))
    assert cov.a == 4 and cov.m == 2


@pytest.mark.parametrize("d,ell,rho", GRIDS + [(2, 3, 4), (1, 5, 4)])
def test_cells_are_cliques_pairwise(d, ell, rho):
    dz = disc(d, ell, 0.3, rho)
    cov = cell_clique_cover(dz)
    assert cov.m == (-(-dz.grid_side // cov.a)) ** d
    seen = set()
    for i in range(cov.m):
        pts = list(cov.cell_points(i))
        assert len(pts) == cov.cell_sizes[i]
        for x, y in itertools.combinations(pts, 2):
            assert dz.conflicts(x, y)
        for k, x in enumerate(pts):
            assert cov.cell_of(x) == i
            assert cov.point_in_cell(i, k) == x
        seen.update(pts)
    assert len(seen) == dz.vertex_count
    report = validate_clique_cover(explicit_graph(dz), cov.to_clique_cover())
    assert report.valid and report.disjoint


def test_cell_partition_functions():
    dz = disc(2, 2, 0.5, 4)
    cov = cell_clique_cover(dz)
    for i in range(cov.m):
        assert cov.cell_Z(i) == pytest.approx(1 + cov.cell_sizes[i] * dz.lam_rho)
    assert cov.z_max == max(cov.cell_Z(i) for i in range(cov.m))


def test_cell_side_zero_rejected():
    # rho = 1 in d = 2: conflict radius 2/sqrt(pi) ~ 1.13 < sqrt(2), so a = 0
    with pytest.raises(ValueError):
        cell_clique_cover(disc(2, 2, 0.1, 1))


def test_boundary_cells_truncated():
    cov = CellCover(disc(1, 5, 0.1, 2), 4)
    assert list(cov.cell_sizes) == [4, 4, 2]


# -- resolution choice -----------------------------------------------------------------

def test_choose_resolution_meets_error_bound():
    inst = HardSphereInstance(1, 2, 1.0)
    dz = choose_resolution(inst, 0.5, 0.5)
    assert float(dz.rho) >= 2
    assert convergence_error_bound(inst, dz.rho) <= 0.5
    # smallest admissible: one grid step less fails some requirement
    smaller = Fraction(dz.grid_side - 1, 2)
    assert convergence_error_bound(inst, smaller) > 0.5 or float(smaller) < 2


def test_doubling_rho_halves_error_bound():
    inst = HardSphereInstance(2, 1.5, 0.3)
    assert convergence_error_bound(inst, 20) == pytest.approx(2 * convergence_error_bound(inst, 40))


def test_choose_resolution_rejects_bad_arguments():
    with pytest.raises(ValueError):
        choose_resolution(HardSphereInstance(1, 1, 1.0), 0.0, 0.5)


# -- one-dimensional oracles ----------------------------------------------------------

def test_tonks_gas_examples():
    assert tonks_gas_Z(4, 1) == pytest.approx(10.875, rel=1e-15)
    assert tonks_gas_Z(3.3, 0.0) == 1.0
    assert tonks_gas_Z(0.4, 2.0) == pytest.approx(1 + 0.8)


def test_tonks_gas_against_quadrature():
    """Independent route: integrate the ordered-gap density numerically (k = 2 term)."""
    from scipy import integrate
    ell, lam = 2.5, 0.8
    # ordered pair volume: {0 <= x < y < ell, y - x >= 1}
    vol2, _ = integrate.dblquad(lambda y, x: 1.0, 0, ell, lambda x: min(x + 1, ell), lambda x: ell)
    assert lam ** 2 * vol2 == pytest.approx(lam ** 2 * (ell - 1) ** 2 / 2, rel=1e-8)


@pytest.mark.parametrize("ell,rho", [(1, 4), (2, 3), (2, 4), (3, 4), (2, 6), (1, 12), (3, 3)])
def test_closed_form_matches_bruteforce(ell, rho):
    dz = disc(1, ell, 1.3, rho)
    assert discretized_Z_1d(dz) == pytest.approx(partition_function_bruteforce(explicit_graph(dz)), rel=1e-12)


@pytest.mark.parametrize("ell,rho", [(1, 4), (2, 3), (2, 5), (3, 4), (2, 6), (1, 12), (4, 3)])
def test_rescaling_identity_exact(ell, rho):
    """Z(G_rho, lam_rho) = sum_k lam^k / k! * rho^-k * N_k with exact rationals."""
    lam = Fraction(3, 2)
    dz = disc(1, ell, float(lam), rho)
    n_k = ordered_tuple_counts(dz)
    rhs = sum(lam ** k / math.factorial(k) * Fraction(1, rho ** k) * c for k, c in enumerate(n_k))
    # brute force over subsets with exact weights
    inst = explicit_graph(dz)
    w = lam / rho
    lhs = Fraction(0)
    for mask in range(1 << inst.n):
        pts = [v for v in range(inst.n) if mask >> v & 1]
        if all(u not in inst.graph.adjacency[v] for u, v in itertools.combinations(pts, 2)):
            lhs += w ** len(pts)
    assert lhs == rhs


def test_lattice_rods_small():
    # n=4, gap 2: {}, 4 singletons, {0,2},{0,3},{1,3}
    assert lattice_rods_Z(4, 2, 1.0) == 8.0


def test_convergence_to_tonks_gas():
    exact = tonks_gas_Z(4, 1)
    rhos = [4, 8, 16, 32]
    errs = [abs(discretized_Z_1d(disc(1, 4, 1.0, r)) - exact) / exact for r in rhos]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    slope = np.polyfit(np.log(rhos), np.log(errs), 1)[0]
    assert -1.5 <= slope <= -0.5
