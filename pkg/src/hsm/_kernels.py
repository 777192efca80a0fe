"""Compiled inner loops for clique dynamics.

Both kernels consume exactly two uniforms per step from a
``numpy.random.Generator`` (numba shares the generator's bit stream), so a
compiled run and the pure-Python step functions produce identical
trajectories for the same seed.

Explicit graphs use CSR arrays:

* ``nbr_ptr``, ``nbr_idx``: adjacency.
* ``cl_ptr``, ``cl_idx``: clique members.
* ``cum``: for clique ``i`` the entries ``cum[cl_ptr[i] + i : cl_ptr[i+1] + i + 1]``
  hold the cumulative outcome probabilities (empty set first, last entry 1).

The implicit grid kernel keeps at most one occupied point per cell.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _explicit_step(u1, u2, nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum, lo, occupied):
    m = cl_ptr.size - 1
    i = lo + int(u1 * (m - lo))
    if i >= m:
        i = m - 1
    a = cl_ptr[i]
    b = cl_ptr[i + 1]
    c0 = a + i
    size = b - a
    j = 0
    while j < size and u2 >= cum[c0 + j]:
        j += 1
    if j == 0:
        for k in range(a, b):
            occupied[cl_idx[k]] = False
        return
    v = cl_idx[a + j - 1]
    for k in range(nbr_ptr[v], nbr_ptr[v + 1]):
        if occupied[nbr_idx[k]]:
            return
    occupied[v] = True


@njit(cache=True, nogil=True)
def run_explicit(rng, nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum, lo, steps, occupied, record):
    """Advance ``occupied`` in place by ``steps`` clique-dynamics steps.

    Cliques ``lo..m-1`` are the active ones. If ``record`` has rows, the
    state after step ``t`` is written to ``record[t]``.
    """
    keep = record.shape[0] > 0
    for t in range(steps):
        u1 = rng.random()
        u2 = rng.random()
        _explicit_step(u1, u2, nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum, lo, occupied)
        if keep:
            record[t, :] = occupied


@njit(cache=True, nogil=True)
def count_empty_explicit(rng, nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum, lo, steps, n_samples, occupied):
    """Number of fresh runs from the empty set that end with clique ``lo`` empty."""
    hits = 0
    a = cl_ptr[lo]
    b = cl_ptr[lo + 1]
    for s in range(n_samples):
        occupied[:] = False
        for t in range(steps):
            u1 = rng.random()
            u2 = rng.random()
            _explicit_step(u1, u2, nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum, lo, occupied)
        empty = True
        for k in range(a, b):
            if occupied[cl_idx[k]]:
                empty = False
                break
        if empty:
            hits += 1
    return hits


@njit(cache=True, nogil=True)
def state_counts_explicit(rng, nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum, steps, occupied, weights_of_bits):
    """Histogram of visited states (as bitmasks, n <= 62) over ``steps`` steps."""
    n = occupied.size
    counts = np.zeros(1 << n, dtype=np.int64)
    for t in range(steps):
        u1 = rng.random()
        u2 = rng.random()
        _explicit_step(u1, u2, nbr_ptr, nbr_idx, cl_ptr, cl_idx, cum, 0, occupied)
        mask = 0
        for v in range(n):
            if occupied[v]:
                mask += weights_of_bits[v]
        counts[mask] += 1
    return counts


@njit(cache=True, nogil=True)
def count_empty_bitmask(rng, nbr_mask, cl_ptr, cl_idx, cl_mask, cum, steps, n_samples, target_mask):
    """Same chain as :func:`count_empty_explicit` with states held in a 64-bit mask (n <= 63)."""
    m = cl_ptr.size - 1
    hits = 0
    for s in range(n_samples):
        occ = np.int64(0)
        for t in range(steps):
            u1 = rng.random()
            u2 = rng.random()
            i = int(u1 * m)
            if i >= m:
                i = m - 1
            a = cl_ptr[i]
            size = cl_ptr[i + 1] - a
            c0 = a + i
            j = 0
            while j < size and u2 >= cum[c0 + j]:
                j += 1
            if j == 0:
                occ &= ~cl_mask[i]
            else:
                v = cl_idx[a + j - 1]
                if (occ & nbr_mask[v]) == 0:
                    occ |= np.int64(1) << v
        if (occ & target_mask) == 0:
            hits += 1
    return hits


# -- implicit grid ---------------------------------------------------------------

@njit(cache=True, nogil=True)
def _cell_point(cell, k, cells_per_axis, a, side, d, out):
    """Coordinates of the ``k``-th point (row-major) of ``cell`` into ``out``."""
    # cell coordinates, last axis fastest
    c = cell
    for ax in range(d - 1, -1, -1):
        out[ax] = (c % cells_per_axis) * a
        c //= cells_per_axis
    # extents of this (possibly truncated) cell, then the offset of point k
    for ax in range(d - 1, -1, -1):
        ext = min(a, side - out[ax])
        out[ax] += k % ext
        k //= ext


@njit(cache=True, nogil=True)
def _grid_step(u1, u2, lo, m, cell_size, cell_pz, cells_per_axis, a, side, d,
               conflict_sq_max, nbr_cell_off, occ, coords, tmp, ci):
    i = lo + int(u1 * (m - lo))
    if i >= m:
        i = m - 1
    pz = cell_pz[i]
    if u2 < pz:
        occ[i] = False
        return
    if occ[i]:
        return
    size = cell_size[i]
    k = int((u2 - pz) / (1.0 - pz) * size)
    if k >= size:
        k = size - 1
    _cell_point(i, k, cells_per_axis, a, side, d, tmp)
    # cell coordinates of i
    c = i
    for ax in range(d - 1, -1, -1):
        ci[ax] = c % cells_per_axis
        c //= cells_per_axis
    for r in range(nbr_cell_off.shape[0]):
        j = 0
        inside = True
        for ax in range(d):
            cj = ci[ax] + nbr_cell_off[r, ax]
            if cj < 0 or cj >= cells_per_axis:
                inside = False
                break
            j = j * cells_per_axis + cj
        if not inside or j == i or not occ[j]:
            continue
        dist = 0
        for ax in range(d):
            diff = coords[j, ax] - tmp[ax]
            dist += diff * diff
        if dist <= conflict_sq_max:
            return
    occ[i] = True
    for ax in range(d):
        coords[i, ax] = tmp[ax]


@njit(cache=True, nogil=True)
def run_grid(rng, lo, cell_size, cell_pz, cells_per_axis, a, side, d, conflict_sq_max,
             nbr_cell_off, steps, occ, coords):
    m = cell_size.size
    tmp = np.empty(d, dtype=np.int64)
    ci = np.empty(d, dtype=np.int64)
    for t in range(steps):
        u1 = rng.random()
        u2 = rng.random()
        _grid_step(u1, u2, lo, m, cell_size, cell_pz, cells_per_axis, a, side, d,
                   conflict_sq_max, nbr_cell_off, occ, coords, tmp, ci)


@njit(cache=True, nogil=True)
def count_empty_grid(rng, lo, cell_size, cell_pz, cells_per_axis, a, side, d, conflict_sq_max,
                     nbr_cell_off, steps, n_samples, occ, coords):
    m = cell_size.size
    tmp = np.empty(d, dtype=np.int64)
    ci = np.empty(d, dtype=np.int64)
    hits = 0
    for s in range(n_samples):
        occ[:] = False
        for t in range(steps):
            u1 = rng.random()
            u2 = rng.random()
            _grid_step(u1, u2, lo, m, cell_size, cell_pz, cells_per_axis, a, side, d,
                       conflict_sq_max, nbr_cell_off, occ, coords, tmp, ci)
        if not occ[lo]:
            hits += 1
    return hits
