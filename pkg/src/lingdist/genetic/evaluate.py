"""Ancestor-retrieval reconstruction metrics for genealogy embeddings."""

from __future__ import annotations

import math

import numpy as np

from ..errors import NoAncestorPairs, UnknownNode
from .graph import ClosureIndex
from .train import EmbeddingTable


def ancestor_ranks(distances: np.ndarray, is_ancestor: np.ndarray, self_index: int):
    """Filtered ranks of the ancestors of one node.

    ``rank(a) = 1 + #{non-ancestors v != u with d(u, v) < d(u, a)}``; other
    ancestors never push a rank down, and ties favour the ancestor.

    Returns the ancestor distances in ascending order and their ranks.
    """
    mask = np.ones(len(distances), dtype=bool)
    mask[self_index] = False
    others = np.sort(distances[mask & ~is_ancestor])
    anc = np.sort(distances[is_ancestor])
    ranks = 1 + np.searchsorted(others, anc, side="left")
    return anc, ranks


def eval_reconstruction(table: EmbeddingTable, closure: ClosureIndex) -> tuple[float, float]:
    """Mean rank and mean average precision of ancestor retrieval.

    Every node ranks all other nodes by distance; its strict ancestors are the
    relevant items. MR averages the filtered rank over all
    (descendant, ancestor) pairs; MAP averages AP over nodes that have at
    least one ancestor.

    Raises:
        NoAncestorPairs: no node has an ancestor.
    """
    for node in closure.nodes:
        if node not in table:
            raise UnknownNode(node)
    order = np.array([table.index[n] for n in closure.nodes])
    coords = table.coords[order]
    space = table.space
    rank_sum = 0.0
    n_pairs = 0
    ap_terms = []
    pos = closure.index
    for i, node in enumerate(closure.nodes):
        anc = closure.ancestors[node]
        if not anc:
            continue
        is_anc = np.zeros(len(order), dtype=bool)
        is_anc[[pos[a] for a in anc]] = True
        d = space.dist(coords[i], coords)
        _, ranks = ancestor_ranks(d, is_anc, i)
        rank_sum += float(ranks.sum())
        n_pairs += len(ranks)
        # The j-th ancestor (1-based) sits at list position j + rank_j - 1.
        j = np.arange(1, len(ranks) + 1)
        ap_terms.append(math.fsum(j / (j + ranks - 1)) / len(ranks))
    if n_pairs == 0:
        raise NoAncestorPairs("no node has an ancestor")
    return rank_sum / n_pairs, math.fsum(ap_terms) / len(ap_terms)
