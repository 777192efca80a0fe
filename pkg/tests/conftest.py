import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from hsm.hardcore import Graph, HardCoreInstance

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_instance(rng, n, p=0.4, lam=(0.2, 2.0)):
    edges = [(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < p]
    return HardCoreInstance.from_edges(n, edges, rng.uniform(*lam, n))


@st.composite
def instances(draw, min_n=1, max_n=8, lam_min=0.2, lam_max=2.0):
    n = draw(st.integers(min_n, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [e for e, keep in zip(pairs, mask) if keep]
    lam = draw(st.lists(st.floats(lam_min, lam_max), min_size=n, max_size=n))
    return HardCoreInstance(Graph.from_edges(n, edges), tuple(lam))


@st.composite
def valid_covers(draw, instance):
    """A random valid (possibly overlapping) clique cover: greedy maximal cliques in a random order."""
    from hsm.hardcore import CliqueCover

    g = instance.graph
    order = draw(st.permutations(list(range(instance.n))))
    cliques = []
    covered = set()
    for v in order:
        if v in covered and draw(st.booleans()):
            continue
        clique = [v]
        for w in draw(st.permutations(list(range(instance.n)))):
            if w not in clique and all(g.has_edge(w, u) for u in clique):
                clique.append(w)
                if draw(st.booleans()):
                    break
        cliques.append(clique)
        covered.update(clique)
    return CliqueCover(cliques)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
