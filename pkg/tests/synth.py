"""Synthetic fixtures and independent reference implementations used by the tests."""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from lingdist.genetic import GenealogyGraph
from lingdist.geo import GeoDistribution, GeoPoint
from lingdist.typology import FeatureMatrix


def balanced_tree(branching: int, depth: int) -> GenealogyGraph:
    edges = []
    level = ["r"]
    for _ in range(depth):
        nxt = []
        for parent in level:
            for i in range(branching):
                child = f"{parent}.{i}"
                edges.append((parent, child))
                nxt.append(child)
        level = nxt
    return GenealogyGraph.from_edges(edges)


def random_distribution(rng, max_points=4) -> GeoDistribution:
    k = int(rng.integers(1, max_points + 1))
    lat = np.degrees(np.arcsin(rng.uniform(-1, 1, k)))
    lon = rng.uniform(-180, 180, k)
    w = rng.dirichlet(np.ones(k))
    return GeoDistribution.from_pairs((GeoPoint(a, b), c) for a, b, c in zip(lat, lon, w))


# ---------------------------------------------------------------- EMD oracle


@lru_cache(maxsize=None)
def _bases(m: int, n: int):
    """Every spanning tree of K_{m,n} as (cells, solver) for the transportation constraints.

    A basic feasible solution of the m x n transportation polytope is
    supported on the m+n-1 cells of a spanning tree; solving the equality
    constraints restricted to those cells gives the vertex.
    """
    cells = [(i, j) for i in range(m) for j in range(n)]
    out = []
    for subset in itertools.combinations(range(len(cells)), m + n - 1):
        chosen = [cells[c] for c in subset]
        parent = list(range(m + n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        tree = True
        for i, j in chosen:
            ri, rj = find(i), find(m + j)
            if ri == rj:
                tree = False
                break
            parent[ri] = rj
        if not tree:
            continue
        A = np.zeros((m + n, m + n - 1))
        for col, (i, j) in enumerate(chosen):
            A[i, col] = 1.0
            A[m + j, col] = 1.0
        # One constraint is redundant (both margins sum to one); drop the last.
        out.append((np.array(chosen), np.linalg.inv(A[:-1])))
    return out


def emd_by_vertex_enumeration(a: GeoDistribution, b: GeoDistribution, costs: np.ndarray) -> float:
    wa, wb = a.weight_array, b.weight_array
    rhs = np.concatenate([wa, wb])[:-1]
    best = np.inf
    for chosen, inv in _bases(len(wa), len(wb)):
        x = inv @ rhs
        if np.all(x >= -1e-12):
            best = min(best, float(np.sum(x * costs[chosen[:, 0], chosen[:, 1]])))
    return best


# ---------------------------------------------------------------- reconstruction oracle


def brute_force_mr_map(nodes, ancestors, dist):
    """MR and MAP straight from the definitions, with explicit loops.

    For node u with ancestor list A, every other node is ranked by distance.
    The rank of ancestor a is one plus the number of non-ancestors strictly
    closer than a. AP(u) averages, over a in A, the precision of the prefix
    of the ranked list that ends at a (ancestors at equal distance are
    ordered by their position in A).
    """
    ranks = []
    aps = []
    for u in nodes:
        anc = list(ancestors[u])
        if not anc:
            continue
        others = [v for v in nodes if v != u and v not in anc]
        precisions = []
        for k, a in enumerate(anc):
            da = dist(u, a)
            misses = sum(1 for v in others if dist(u, v) < da)
            ranks.append(1 + misses)
            hits = 1 + sum(1 for i, b in enumerate(anc) if (dist(u, b), i) < (da, k))
            precisions.append(hits / (hits + misses))
        aps.append(math.fsum(precisions) / len(precisions))
    return sum(ranks) / len(ranks), math.fsum(aps) / len(aps)


# ---------------------------------------------------------------- typology


def sample_lcm(n, theta, prior, rng):
    """Draw n rows from a two-state model with ``theta[j, k] = P(x_j = 1 | z = k)``."""
    theta = np.asarray(theta, dtype=float)
    z = (rng.random(n) < prior[1]).astype(int)
    p = theta[:, z].T
    return (rng.random(p.shape) < p).astype(np.int8), z


def block_features(sizes, n, flip, missing, rng):
    """Independent blocks, each a noisy copy of its own binary latent."""
    cols = []
    labels = []
    for b, size in enumerate(sizes):
        z = rng.integers(0, 2, n)
        for _ in range(size):
            cols.append(np.where(rng.random(n) < flip, 1 - z, z))
            labels.append(b)
    X = np.array(cols).T
    X = np.where(rng.random(X.shape) < missing, -1, X)
    m = FeatureMatrix([f"L{i}" for i in range(n)], [f"f{j}" for j in range(X.shape[1])], X)
    return m, labels


def adjusted_rand(a, b) -> float:
    """Adjusted Rand index from the pair-counting contingency table."""
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return float(np.sum(x * (x - 1) / 2))

    index = pairs(table)
    rows = pairs(table.sum(axis=1))
    cols = pairs(table.sum(axis=0))
    total = len(a) * (len(a) - 1) / 2
    expected = rows * cols / total
    best = (rows + cols) / 2
    if best == expected:
        return 1.0
    return (index - expected) / (best - expected)
