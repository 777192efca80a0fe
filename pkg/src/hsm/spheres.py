"""Hard spheres in a cube and their hard-core discretization on an integer grid.

A :class:`HardSphereInstance` is the continuous model (dimension ``d``,
side ``ell``, fugacity ``lam``) with particle radius ``r`` chosen so that
each particle has unit volume. At resolution ``rho`` (with ``rho * ell``
an integer) the grid ``{0, ..., rho*ell - 1}^d`` carries a hard-core model
with weight ``lam / rho^d`` in which two grid points conflict when their
Euclidean distance is below ``2 rho r``.

Edge membership is decided in exact integer arithmetic: the squared
threshold ``(2 rho r)^2`` is evaluated once (exactly for ``d = 1``, with
high-precision ``mpmath`` otherwise) and reduced to the largest admissible
integer squared distance ``conflict_sq_max``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import mpmath
import numpy as np

from .hardcore import CapExceededError, CliqueCover, Graph, HardCoreInstance, log_tree_threshold

EXPLICIT_GRID_CAP = 4096


def unit_ball_volume(d: int) -> float:
    """Volume ``pi^(d/2) / Gamma(d/2 + 1)`` of the unit ball in ``d`` dimensions."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_radius(d: int) -> float:
    """Radius of a ball of unit volume."""
    return unit_ball_volume(d) ** (-1.0 / d)


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class HardSphereInstance:
    """Continuous hard-sphere model on ``[0, ell)^d`` with fugacity ``lam``."""

    d: int
    ell: float
    lam: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not (self.ell > 0 and math.isfinite(self.ell)):
            raise ValueError(f"side length must be positive, got {self.ell}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"fugacity must be positive, got {self.lam}")

    @property
    def radius(self) -> float:
        return sphere_radius(self.d)

    @property
    def volume(self) -> float:
        return self.ell ** self.d

    def to_dict(self) -> dict:
        return {"d": self.d, "ell": self.ell, "lambda": self.lam}

    @classmethod
    def from_dict(cls, data) -> "HardSphereInstance":
        return cls(int(data["d"]), float(data["ell"]), float(data["lambda"]))

    @classmethod
    def load(cls, path: str | Path) -> "HardSphereInstance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- exact conflict threshold ------------------------------------------------------

def _threshold_sq(d: int, rho: Fraction):
    """``(2 rho r)^2`` as ``(floor, is_integer, approx)``.

    For ``d = 1`` the value ``rho^2`` is rational and handled exactly. For
    ``d >= 2`` it is a nonzero rational multiple of a power of ``pi`` and
    therefore never an integer; it is evaluated with enough digits that the
    floor is certain.
    """
    if d == 1:
        T = rho * rho
        return T.numerator // T.denominator, T.denominator == 1, float(T)
    digits = 40 + 2 * len(str(rho.numerator)) + len(str(rho.denominator))
    with mpmath.workdps(digits):
        nu = mpmath.pi ** (mpmath.mpf(d) / 2) / mpmath.gamma(mpmath.mpf(d) / 2 + 1)
        rho_mp = mpmath.mpf(rho.numerator) / rho.denominator
        T = 4 * rho_mp ** 2 * nu ** (mpmath.mpf(-2) / d)
        fl = int(mpmath.floor(T))
        frac = T - fl
        if frac < mpmath.mpf(10) ** (-(digits - 20)) or 1 - frac < mpmath.mpf(10) ** (-(digits - 20)):
            raise ArithmeticError("threshold too close to an integer to classify")
        return fl, False, float(T)


@dataclass(frozen=True)
class Discretization:
    """Grid representation of a hard-sphere instance at resolution ``rho``.

    Parameters
    ----------
    parent : HardSphereInstance
    rho : Fraction
        Resolution; ``rho * parent.ell`` must be a positive integer.
    strict : bool
        Conflict iff ``0 < dist < 2 rho r`` (default). With ``strict=False``
        points at distance exactly ``2 rho r`` also conflict.
    """

    parent: HardSphereInstance
    rho: Fraction
    strict: bool = True

    def __post_init__(self):
        rho = _as_fraction(self.rho)
        object.__setattr__(self, "rho", rho)
        side = rho * _as_fraction(self.parent.ell)
        if rho <= 0 or side.denominator != 1 or side <= 0:
            raise ValueError(f"rho * ell must be a positive integer (rho={rho}, ell={self.parent.ell})")

    @classmethod
    def at(cls, parent: HardSphereInstance, rho, strict: bool = True) -> "Discretization":
        return cls(parent, _as_fraction(rho), strict)

    @property
    def d(self) -> int:
        return self.parent.d

    @cached_property
    def grid_side(self) -> int:
        return int(self.rho * _as_fraction(self.parent.ell))

    @property
    def vertex_count(self) -> int:
        return self.grid_side ** self.d

    @cached_property
    def lam_rho(self) -> float:
        return self.parent.lam / float(self.rho) ** self.d

    @property
    def conflict_radius(self) -> float:
        return 2.0 * float(self.rho) * self.parent.radius

    @cached_property
    def _threshold(self):
        return _threshold_sq(self.d, self.rho)

    @cached_property
    def conflict_sq_max(self) -> int:
        """Largest squared integer distance at which two points still conflict."""
        fl, is_int, _ = self._threshold
        return fl - 1 if (self.strict and is_int) else fl

    @cached_property
    def reach(self) -> int:
        """Largest per-axis offset of a conflicting pair."""
        return math.isqrt(self.conflict_sq_max) if self.conflict_sq_max > 0 else 0

    def conflicts(self, x: Sequence[int], y: Sequence[int]) -> bool:
        dist = sum((a - b) * (a - b) for a, b in zip(x, y))
        return 0 < dist <= self.conflict_sq_max

    @cached_property
    def offsets(self) -> np.ndarray:
        """Nonzero conflicting offset vectors in lexicographic order."""
        R = self.reach
        rows = [o for o in itertools.product(range(-R, R + 1), repeat=self.d)
                if 0 < sum(c * c for c in o) <= self.conflict_sq_max]
        return np.array(rows, dtype=np.int64).reshape(-1, self.d)

    # grid indexing (row-major, last axis fastest)
    def index_of(self, x: Sequence[int]) -> int:
        idx = 0
        for c in x:
            idx = idx * self.grid_side + int(c)
        return idx

    def point_of(self, idx: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.d):
            idx, c = divmod(idx, self.grid_side)
            out.append(c)
        return tuple(reversed(out))

    def _check_point(self, x: Sequence[int]):
        if len(x) != self.d or any(not 0 <= c < self.grid_side for c in x):
            raise IndexError(f"grid point {tuple(x)} outside [0, {self.grid_side})^{self.d}")

    def report(self) -> dict:
        return {"rho": float(self.rho), "rho_exact": str(self.rho), "grid_side": self.grid_side,
                "lambda_rho": self.lam_rho, "conflict_radius": self.conflict_radius,
                "conflict_sq_max": self.conflict_sq_max, "strict": self.strict}


def neighbors(disc: Discretization, x: Sequence[int]) -> list[tuple[int, ...]]:
    """In-bounds grid points conflicting with ``x``, in lexicographic offset order."""
    disc._check_point(x)
    n = disc.grid_side
    out = []
    for o in disc.offsets:
        y = tuple(int(a + b) for a, b in zip(x, o))
        if all(0 <= c < n for c in y):
            out.append(y)
    return out


def grid_points(disc: Discretization) -> np.ndarray:
    """All grid points as rows, in index order."""
    axes = [np.arange(disc.grid_side, dtype=np.int64)] * disc.d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, disc.d)


def explicit_graph(disc: Discretization, cap: int = EXPLICIT_GRID_CAP) -> HardCoreInstance:
    """Materialize ``(G_rho, lam_rho)``; vertex ``k`` is grid point ``point_of(k)``."""
    N = disc.vertex_count
    if N > cap:
        raise CapExceededError(f"grid with {N} points exceeds the explicit cap of {cap}")
    pts = grid_points(disc)
    n = disc.grid_side
    weights_pow = n ** np.arange(disc.d - 1, -1, -1, dtype=np.int64)
    nbrs: list[list[int]] = [[] for _ in range(N)]
    for o in disc.offsets:
        y = pts + o
        ok = np.all((y >= 0) & (y < n), axis=1)
        src = np.flatnonzero(ok)
        dst = y[ok] @ weights_pow
        for s, t in zip(src.tolist(), dst.tolist()):
            nbrs[s].append(t)
    adjacency = tuple(tuple(sorted(a)) for a in nbrs)
    graph = Graph(N, adjacency, tuple(map(tuple, pts.tolist())))
    return HardCoreInstance.univariate(graph, disc.lam_rho)


def exact_max_degree(disc: Discretization, chunk: int = 512) -> int:
    """Maximum number of in-bounds conflicting points over the whole grid."""
    pts = grid_points(disc)
    n = disc.grid_side
    deg = np.zeros(len(pts), dtype=np.int64)
    offs = disc.offsets
    for k in range(0, len(offs), chunk):
        y = pts[:, None, :] + offs[None, k:k + chunk, :]
        deg += np.all((y >= 0) & (y < n), axis=2).sum(axis=1)
    return int(deg.max()) if len(deg) else 0


# -- integer points in balls ----------------------------------------------------------

def integer_sphere_count(d: int, s: float, limit: int = 10**7) -> int:
    """Number of integer points ``x`` with ``|x| <= s`` in ``d`` dimensions."""
    if s < 0:
        return 0
    R2 = s * s
    R = math.isqrt(int(math.floor(R2)))
    if (2 * R + 1) ** max(d - 1, 0) > limit:
        raise CapExceededError(f"radius {s} too large for exact enumeration in d={d}")
    R2_int = math.floor(R2)  # integer squared norms only

    def count(dim: int, rem: int) -> int:
        if dim == 1:
            return 2 * math.isqrt(rem) + 1
        top = math.isqrt(rem)
        return sum(count(dim - 1, rem - x * x) for x in range(-top, top + 1))

    return count(d, R2_int)


@dataclass(frozen=True)
class SphereBound:
    value: float
    rho_min: float
    precondition_met: bool


def integer_sphere_bound(d: int, s: float, rho: float, gamma: float) -> SphereBound:
    """``(1 + gamma) nu_d (rho s)^d``, valid once ``rho >= (2 sqrt d)^d / (gamma s)``."""
    rho_min = (2 * math.sqrt(d)) ** d / (gamma * s)
    value = (1 + gamma) * unit_ball_volume(d) * (rho * s) ** d
    return SphereBound(value, rho_min, rho >= rho_min)


def rho_gamma(d: int, gamma: float) -> float:
    """Resolution above which the degree bound ``(1+gamma)(2 rho)^d`` is guaranteed."""
    return (2 * math.sqrt(d)) ** d / (gamma * 2 * sphere_radius(d))


@dataclass(frozen=True)
class DegreeBound:
    bound: float
    rho_gamma: float
    precondition_met: bool


def max_degree_bound(disc: Discretization, gamma: float) -> DegreeBound:
    """``(1 + gamma)(2 rho)^d`` with the threshold ``rho_gamma`` and whether it is met."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    rg = rho_gamma(disc.d, gamma)
    return DegreeBound((1 + gamma) * (2 * float(disc.rho)) ** disc.d, rg, float(disc.rho) >= rg)


def fugacity_threshold(d: int, delta: float) -> float:
    return (1 - delta) * math.e / 2 ** d


def check_fugacity_regime(instance: HardSphereInstance, delta: float) -> bool:
    """True iff ``lam <= (1 - delta) e / 2^d``."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return instance.lam <= fugacity_threshold(instance.d, delta)


def discretized_weight_below_threshold(disc: Discretization, gamma: float,
                                       delta_prime: float | None = None) -> bool:
    """``lam_rho <= (1 - delta') lambda_c(floor((1+gamma)(2 rho)^d))``.

    ``delta'`` defaults to ``gamma`` (the end-to-end pipeline splits
    ``delta`` evenly). A degree bound below 3 admits no threshold and
    counts as below it.
    """
    delta_prime = gamma if delta_prime is None else delta_prime
    Delta = math.floor(max_degree_bound(disc, gamma).bound)
    if Delta < 3:
        return True
    return math.log(disc.lam_rho) <= math.log1p(-delta_prime) + log_tree_threshold(Delta)


# -- convergence constant and resolution choice ------------------------------------

def convergence_constant(instance: HardSphereInstance) -> float:
    """``C`` with ``|Z(V, lam) - Z(G_rho, lam_rho)| <= C / rho`` for ``rho >= 2 sqrt d``.

    ``C = 4 K^2 ell^(d(K-1)) sqrt(d) (2r + 1)^d e^lam`` with
    ``K = (ell sqrt(d) / (2r))^d``.
    """
    d, ell, lam = instance.d, instance.ell, instance.lam
    r = instance.radius
    K = (ell * math.sqrt(d) / (2 * r)) ** d
    log_c = (math.log(4) + 2 * math.log(K) + d * (K - 1) * math.log(ell)
             + 0.5 * math.log(d) + d * math.log(2 * r + 1) + lam)
    return math.exp(log_c)


def convergence_error_bound(instance: HardSphereInstance, rho) -> float:
    return convergence_constant(instance) / float(rho)


def choose_resolution(instance: HardSphereInstance, eps_prime: float, gamma: float,
                      strict: bool = True) -> Discretization:
    """Smallest admissible ``rho >= max(2 sqrt d, rho_gamma, C / eps')``."""
    if not (0 < eps_prime <= 1 and 0 < gamma <= 1):
        raise ValueError("eps' and gamma must lie in (0, 1]")
    target = max(2 * math.sqrt(instance.d), rho_gamma(instance.d, gamma),
                 convergence_constant(instance) / eps_prime)
    ell = _as_fraction(instance.ell)
    # smallest integer side n with n / ell >= target; float target is rounded up safely
    n = math.ceil(Fraction(target) * ell)
    rho = Fraction(n) / ell
    while float(rho) < target:
        n += 1
        rho = Fraction(n) / ell
    return Discretization(instance, rho, strict)


# -- cell clique cover ---------------------------------------------------------------

@dataclass(frozen=True)
class CellCover:
    """Partition of the grid into cubes of side ``a`` (boundary cells truncated).

    Cells are numbered row-major over their cell coordinates; each is a
    clique of the discretized graph.
    """

    disc: Discretization
    a: int

    @property
    def cells_per_axis(self) -> int:
        return -(-self.disc.grid_side // self.a)

    @property
    def m(self) -> int:
        return self.cells_per_axis ** self.disc.d

    def cell_coords(self, i: int) -> tuple[int, ...]:
        k = self.cells_per_axis
        out = []
        for _ in range(self.disc.d):
            i, c = divmod(i, k)
            out.append(c)
        return tuple(reversed(out))

    def extents(self, i: int) -> tuple[int, ...]:
        n = self.disc.grid_side
        return tuple(min(self.a, n - c * self.a) for c in self.cell_coords(i))

    @cached_property
    def cell_sizes(self) -> np.ndarray:
        k, n, a = self.cells_per_axis, self.disc.grid_side, self.a
        per_axis = np.array([min(a, n - c * a) for c in range(k)], dtype=np.int64)
        sizes = per_axis
        for _ in range(self.disc.d - 1):
            sizes = np.multiply.outer(sizes, per_axis).reshape(-1)
        return sizes.astype(np.int64)

    def cell_Z(self, i: int) -> float:
        return 1.0 + int(self.cell_sizes[i]) * self.disc.lam_rho

    @property
    def z_max(self) -> float:
        return 1.0 + int(self.cell_sizes.max()) * self.disc.lam_rho

    @cached_property
    def empty_probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + self.cell_sizes.astype(float) * self.disc.lam_rho)

    def cell_of(self, x: Sequence[int]) -> int:
        idx = 0
        for c in x:
            idx = idx * self.cells_per_axis + int(c) // self.a
        return idx

    def point_in_cell(self, i: int, k: int) -> tuple[int, ...]:
        """The ``k``-th grid point (row-major) of cell ``i``."""
        base = [c * self.a for c in self.cell_coords(i)]
        ext = self.extents(i)
        out = [0] * self.disc.d
        for ax in range(self.disc.d - 1, -1, -1):
            k, off = divmod(k, ext[ax])
            out[ax] = base[ax] + off
        return tuple(out)

    def cell_points(self, i: int) -> Iterator[tuple[int, ...]]:
        base = [c * self.a for c in self.cell_coords(i)]
        ranges = [range(b, b + e) for b, e in zip(base, self.extents(i))]
        return itertools.product(*ranges)

    @cached_property
    def neighbor_cell_offsets(self) -> np.ndarray:
        """Cell offsets that can hold a point conflicting with a point of the centre cell."""
        R = self.disc.reach
        reach = 0 if R == 0 else (R - 1) // self.a + 1
        rows = [o for o in itertools.product(range(-reach, reach + 1), repeat=self.disc.d) if any(o)]
        return np.array(rows, dtype=np.int64).reshape(-1, self.disc.d)

    def diameter_sq(self) -> int:
        return self.disc.d * (self.a - 1) ** 2

    def to_clique_cover(self, cap: int = EXPLICIT_GRID_CAP) -> CliqueCover:
        if self.disc.vertex_count > cap:
            raise CapExceededError("explicit cell cover needs an in-cap grid")
        return CliqueCover([self.disc.index_of(x) for x in self.cell_points(i)] for i in range(self.m))


def cell_side(disc: Discretization) -> int:
    """``floor(2 rho r / sqrt d)`` computed from the exact squared threshold.

    This is the largest ``a`` with ``d a^2 <= (2 rho r)^2``.
    """
    fl, is_int, _ = disc._threshold
    if disc.d == 1:
        T = disc.rho * disc.rho
        return math.isqrt(T.numerator // T.denominator)
    # floor(sqrt(T/d)) = isqrt(floor(T/d)) and floor(T/d) = floor(floor(T)/d)
    return math.isqrt(fl // disc.d)


def cell_clique_cover(disc: Discretization) -> CellCover:
    """Cube cover of side ``a = floor(2 rho r / sqrt d)``; each cell is a clique."""
    a = cell_side(disc)
    if a < 1:
        raise ValueError(f"cell side is 0 at rho={disc.rho}; increase the resolution")
    cover = CellCover(disc, a)
    if cover.diameter_sq() > disc.conflict_sq_max:
        raise AssertionError("cell diameter exceeds the conflict distance")
    return cover


# -- one-dimensional oracles ------------------------------------------------------------

def tonks_gas_Z(ell: float, lam: float) -> float:
    """Partition function of hard rods of length 1 on a segment of length ``ell``."""
    terms = [1.0]
    k = 1
    while ell - (k - 1) > 0:
        terms.append(lam ** k * (ell - (k - 1)) ** k / math.factorial(k))
        k += 1
    return math.fsum(terms)


def lattice_rods_Z(n: int, gap: int, weight: float) -> float:
    """Hard-core partition function of ``{0..n-1}`` where occupied points are at least ``gap`` apart.

    Uses the count ``C(n - (gap-1)(k-1), k)`` of ``k``-subsets with all
    spacings ``>= gap``.
    """
    terms = [1.0]
    k = 1
    while True:
        free = n - (gap - 1) * (k - 1)
        if free < k:
            break
        terms.append(math.comb(free, k) * weight ** k)
        k += 1
    return math.fsum(terms)


def discretized_Z_1d(disc: Discretization) -> float:
    """Exact ``Z(G_rho, lam_rho)`` for ``d = 1`` on any grid size."""
    if disc.d != 1:
        raise ValueError("closed form only for d = 1")
    return lattice_rods_Z(disc.grid_side, disc.reach + 1, disc.lam_rho)


def ordered_tuple_counts(disc: Discretization, k_max: int | None = None) -> list[int]:
    """``N_k`` = number of ordered ``k``-tuples of pairwise non-conflicting distinct points (d = 1).

    Counted by a transfer recursion over sorted positions, then multiplied by ``k!``.
    """
    if disc.d != 1:
        raise ValueError("tuple counts implemented for d = 1")
    n, g = disc.grid_side, disc.reach + 1
    # ways[k][p]: k-subsets with largest element p
    counts = [1]
    prev = np.ones(n, dtype=object)  # k = 1
    k = 1
    while prev.any():
        counts.append(int(sum(prev)) * math.factorial(k))
        if k_max is not None and k >= k_max:
            break
        nxt = np.zeros(n, dtype=object)
        acc = 0
        for p in range(n):
            if p - g >= 0:
                acc += prev[p - g]
            nxt[p] = acc
        prev = nxt
        k += 1
    return counts
