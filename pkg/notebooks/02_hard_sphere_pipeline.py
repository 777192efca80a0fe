"""
From hard spheres to a grid and back
====================================

The continuous hard-sphere gas in a box ``[0, ell)^d`` is replaced by a
hard-core model on the integer grid at resolution ``rho``. In one dimension
the continuous answer is known in closed form (the Tonks gas), which makes
the discretization error visible.

Run with ``python3 notebooks/02_hard_sphere_pipeline.py`` (about half a minute).
"""

# %%
from fractions import Fraction

import numpy as np

from hsm.estimator import EstimatorConfig, estimate_grid_partition_function, estimate_hard_sphere, hard_sphere_setup
from hsm.spheres import (Discretization, HardSphereInstance, cell_clique_cover, discretized_Z_1d, neighbors,
                         tonks_gas_Z)

rods = HardSphereInstance(d=1, ell=4, lam=1.0)
print("exact continuous Z:", tonks_gas_Z(rods.ell, rods.lam))

# %%
# At resolution rho the box becomes ``rho * ell`` grid points; two points
# conflict when their distance is below ``2 rho r``. Every point carries the
# weight ``lambda / rho^d``.
disc = Discretization(rods, Fraction(4))
print("grid side:", disc.grid_side, " lambda_rho:", disc.lam_rho)
print("neighbours of point 3:", [y[0] for y in neighbors(disc, (3,))])

# %%
# The discrete partition function converges to the continuous one at rate
# ``1 / rho``. In d = 1 it has a closed form, so large grids are cheap.
rhos = [4, 8, 16, 32, 64, 128]
errs = []
for rho in rhos:
    z = discretized_Z_1d(Discretization(rods, Fraction(rho)))
    errs.append(abs(z - 10.875) / 10.875)
    print(f"rho={rho:4d}  Z_rho={z:.6f}  rel err={errs[-1]:.5f}")
print("log-log slope:", np.polyfit(np.log(rhos), np.log(errs), 1)[0])

# %%
# The grid is covered by cubic cells small enough to be cliques. The
# telescoping estimator multiplies the probabilities that each cell is empty,
# using clique dynamics on the implicit grid (no graph is ever built).
cover = cell_clique_cover(Discretization(rods, Fraction(16)))
print("cell side:", cover.a, " cells:", cover.m, " Z_max:", cover.z_max)
rep = estimate_grid_partition_function(cover, EstimatorConfig(epsilon=0.05, master_seed=3))
print("grid estimate:", rep.estimate, " exact grid value:", discretized_Z_1d(cover.disc))

# %%
# The end-to-end pipeline picks the resolution from the error budget, checks
# the fugacity regime and reports every condition it relied on.
disc, cover, flags, summary = hard_sphere_setup(rods, epsilon=0.3, delta=0.2)
print("chosen rho:", summary["rho"], " cells:", summary["m"], " degree bound:", summary["degree_bound"])
for name, value in flags.items():
    print(f"  {name:40s} {value}")
rep = estimate_hard_sphere(rods, epsilon=0.3, delta=0.2, seed=1)
print("estimate:", rep.estimate, " (continuous value 10.875)")

# %%
# A two-dimensional toy: discs of unit area in a 2 x 2 box.
toy = estimate_hard_sphere(HardSphereInstance(2, 2, 0.3), epsilon=0.5, delta=0.2, seed=0)
print("d=2 estimate:", toy.estimate, " rho:", toy.discretization["rho"], " cells:", toy.m)
