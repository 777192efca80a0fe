"""
Influence, SAW trees and the complex representation
===================================================

Numerical companions to the mixing analysis: pairwise influence and its
self-avoiding-walk tree representation, the simplicial-complex view of a
clique cover and the eigenvalue inequalities that connect them.

Run with ``python3 notebooks/03_spectral_diagnostics.py``.
"""

# %%
import numpy as np

from hsm.hardcore import CliqueCover, HardCoreInstance
from hsm.spectral.complex import (clique_influence_identities, complex_representation, local_expansion_profile,
                                  skeleton_walk_matrix, two_step_matches_block_dynamics, verify_spectral_bounds)
from hsm.spectral.influence import cdc_max_alpha, check_influence_condition, pairwise_influence
from hsm.spectral.saw import FREE, saw_tree, verify_saw_influence

# %%
# Pairwise influence ``Psi(v, w)``: how much pinning v occupied rather than
# empty changes the occupation probability of w. Along a path it alternates
# in sign and shrinks geometrically.
path = HardCoreInstance.from_edges(5, [(i, i + 1) for i in range(4)], 1.0)
print("Psi(0, w) on P5:", np.round(pairwise_influence(path).entries[0], 4))

# %%
# On graphs with cycles the influence from a root equals a sum over copies of
# each vertex in the tree of self-avoiding walks; cycle-closing copies are
# pinned occupied or empty according to a fixed vertex order.
c5 = HardCoreInstance.from_edges(5, [(i, (i + 1) % 5) for i in range(5)], 0.8)
tree = saw_tree(c5, 0)
print("SAW tree of C5: nodes", len(tree), " pinned", sum(s != FREE for s in tree.status))
rep = verify_saw_influence(c5, 0)
print("graph influence:", np.round(rep.graph_influence, 6))
print("tree influence: ", np.round(rep.tree_influence, 6))
print("max discrepancy:", rep.max_discrepancy)

# %%
# The influence bound condition with weights q and constant C; here q = 1.
alpha = cdc_max_alpha(c5, [1.0] * 5)
cert = check_influence_condition(c5, [1.0] * 5, 1 / alpha)
print(f"strict condition slack alpha = {alpha:.3f};  influence bound with C = 1/alpha holds: {cert.ok}")

# %%
# A disjoint clique cover turns the Gibbs measure into a weighted m-partite
# complex: one maximal face per independent set. Its two-step walk is exactly
# block dynamics, and the skeleton walk is controlled by clique influence.
inst = HardCoreInstance.from_edges(6, [(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (0, 5)], 1.0)
cover = CliqueCover([(0, 1), (2, 3), (4, 5)])
rep_c = complex_representation(inst, cover)
print("faces:", len(rep_c.weights), " ground set:", rep_c.ground_size)
print("two-step vs block dynamics:", two_step_matches_block_dynamics(inst, rep_c))
print("skeleton lambda_2:", skeleton_walk_matrix(rep_c).lambda2)
b = verify_spectral_bounds(inst, cover)
print(f"lambda_2 = {b.lambda2_skeleton:.4f} <= lambda_1(Psi^K)/(m-1) = {b.influence_bound:.4f}"
      f" and <= 1 - 1/(12 Z_max^2) = {b.canonical_path_bound:.4f}")

# %%
# Identities linking clique influence to pairwise influence. The third holds
# with a minus sign: clique-emptiness events push the other way.
for name, value in clique_influence_identities(inst, cover).items():
    print(f"  {name:32s} residual {value:.2e}")

# %%
# Local expansion of every link, and the two-step bound it implies.
prof = local_expansion_profile(rep_c)
print("alphas:", np.round(prof.alphas, 4), " two-step lambda_2:", round(prof.two_step_lambda2, 4),
      " implied bound:", round(prof.theorem_bound, 4))
