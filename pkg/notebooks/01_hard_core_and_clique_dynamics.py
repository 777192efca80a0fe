"""
Hard-core model and clique dynamics
===================================

A walk through the discrete side of the library: exact partition functions,
clique covers, the clique dynamics chain and how its spectral gap depends on
the largest clique partition function ``Z_max``.

Run with ``python3 notebooks/01_hard_core_and_clique_dynamics.py``.
"""

# %%
# A hard-core instance is a graph with positive vertex weights. Small
# instances are solved exactly by enumerating independent sets.
import numpy as np

from hsm.dynamics import DynamicsKind, empirical_distribution, spectral_gap, transition_matrix_exact, tv_distance
from hsm.hardcore import (CliqueCover, HardCoreInstance, gibbs_exact, greedy_clique_cover, marginals,
                          partition_function_bruteforce, state_table, validate_clique_cover)

path = HardCoreInstance.from_edges(3, [(0, 1), (1, 2)], 1.0)
print("Z(P3, lambda=1) =", partition_function_bruteforce(path))
for s, p in gibbs_exact(path).items():
    print(f"  mu({set(s) or '{}'}) = {p:.3f}")
print("occupation probabilities:", marginals(path)[:, 0])

# %%
# A clique cover groups vertices into cliques. Each clique has its own small
# partition function ``1 + sum of weights``; the largest is ``Z_max``.
cover = CliqueCover([(0, 1), (2,)])
rep = validate_clique_cover(path, cover)
print("valid:", rep.valid, " disjoint:", rep.disjoint, " Z_max:", rep.z_max)

# %%
# Clique dynamics resamples one clique per step from its restricted Gibbs law.
# Its exact transition matrix is reversible with respect to the Gibbs measure.
kind = DynamicsKind.clique(cover)
P = transition_matrix_exact(path, kind)
pi = state_table(path).probabilities
print("stationarity residual:", np.abs(pi @ P.probabilities - pi).max())
print("second eigenvalue:", spectral_gap(P, pi).lambda2)

# %%
# A long simulated trajectory reproduces the Gibbs distribution.
emp = empirical_distribution(path, kind, 200_000, seed=1)
print("TV(empirical, exact) after 2e5 steps:", tv_distance(emp, pi))

# %%
# How does the gap scale? On random graphs the relaxation time
# ``1 / (1 - lambda_2)`` grows with ``m * Z_max``; rescaling the weights
# moves ``Z_max`` while the cover stays fixed.
rng = np.random.default_rng(0)
n = 8
edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.4]
print(f"{'lambda':>7} {'Z_max':>7} {'relaxation':>11} {'ratio to m Z_max':>17}")
for lam in (0.25, 0.5, 1.0, 2.0, 4.0):
    inst = HardCoreInstance.from_edges(n, edges, lam)
    cov = greedy_clique_cover(inst.graph)
    z_max = validate_clique_cover(inst, cov).z_max
    gap = spectral_gap(transition_matrix_exact(inst, DynamicsKind.clique(cov)), state_table(inst).probabilities)
    relax = 1 / (1 - gap.lambda2)
    print(f"{lam:7.2f} {z_max:7.2f} {relax:11.2f} {relax / (len(cov) * z_max):17.3f}")
