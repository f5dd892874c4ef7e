"""Genealogy DAG, its transitive closure, and negative sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable

import numpy as np

from ..errors import CycleDetected, EmptyGraph, NoEligibleNegatives, UnknownNode


@dataclass
class GenealogyGraph:
    """Directed parent -> child graph of linguistic entities.

    Node order is insertion order and is what every downstream array indexes by.
    """

    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)

    def __post_init__(self):
        seen = {}
        for n in self.nodes:
            seen.setdefault(n, None)
        for parent, child in self.edges:
            seen.setdefault(parent, None)
            seen.setdefault(child, None)
        self.nodes = list(seen)
        self.edges = list(dict.fromkeys((p, c) for p, c in self.edges))

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[Hashable, Hashable]], nodes=()):
        return cls(list(nodes), list(edges))

    def children(self) -> dict:
        out = {n: [] for n in self.nodes}
        for p, c in self.edges:
            out[p].append(c)
        return out

    def parents(self) -> dict:
        out = {n: [] for n in self.nodes}
        for p, c in self.edges:
            out[c].append(p)
        return out

    def roots(self) -> list:
        has_parent = {c for _, c in self.edges}
        return [n for n in self.nodes if n not in has_parent]

    def topological_order(self) -> list:
        """Parents before children. Raises :class:`CycleDetected` with a witness."""
        children = self.children()
        state = dict.fromkeys(self.nodes, 0)  # 0 new, 1 on stack, 2 done
        order = []
        for start in self.nodes:
            if state[start]:
                continue
            stack = [(start, iter(children[start]))]
            path = [start]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    path.pop()
                    state[node] = 2
                    order.append(node)
                elif state[nxt] == 1:
                    i = path.index(nxt)
                    raise CycleDetected(path[i:] + [nxt])
                elif state[nxt] == 0:
                    state[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(children[nxt])))
        order.reverse()
        return order

    def validate(self):
        if not self.nodes:
            raise EmptyGraph("genealogy graph has no nodes")
        self.topological_order()
        return self


class ClosureIndex:
    """Strict ancestor and descendant sets for every node of a DAG."""

    def __init__(self, nodes, ancestors: dict, descendants: dict):
        self.nodes = list(nodes)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        self.ancestors = ancestors
        self.descendants = descendants

    def positives(self) -> list[tuple]:
        """All (ancestor, descendant) pairs, in node order."""
        return [(u, v) for u in self.nodes for v in self.descendants[u]]

    def eligible_negatives(self, u) -> list:
        if u not in self.index:
            raise UnknownNode(u)
        excluded = self.descendants[u]
        return [w for w in self.nodes if w != u and w not in excluded]

    def reversed(self) -> "ClosureIndex":
        """Closure of the graph with every edge flipped."""
        return ClosureIndex(self.nodes, self.descendants, self.ancestors)


def build_closure(g: GenealogyGraph) -> ClosureIndex:
    """Transitive closure of the parent -> child edges.

    Raises:
        CycleDetected: the graph has a cycle.
    """
    order = g.topological_order()
    parents = g.parents()
    children = g.children()
    ancestors: dict = {}
    for node in order:
        acc = set()
        for p in parents[node]:
            acc.add(p)
            acc |= ancestors[p]
        ancestors[node] = acc
    descendants: dict = {}
    for node in reversed(order):
        acc = set()
        for c in children[node]:
            acc.add(c)
            acc |= descendants[c]
        descendants[node] = acc
    # Sets are ordered by node position so iteration is reproducible.
    pos = {n: i for i, n in enumerate(g.nodes)}
    ancestors = {n: dict.fromkeys(sorted(s, key=pos.__getitem__)) for n, s in ancestors.items()}
    descendants = {n: dict.fromkeys(sorted(s, key=pos.__getitem__)) for n, s in descendants.items()}
    return ClosureIndex(g.nodes, ancestors, descendants)


def sample_negatives(u, k: int, closure: ClosureIndex, rng: np.random.Generator) -> list:
    """Draw ``k`` nodes uniformly with replacement among non-descendants of ``u``.

    ``u`` itself is never eligible.
    """
    eligible = closure.eligible_negatives(u)
    if not eligible:
        raise NoEligibleNegatives(f"every other node is a descendant of {u!r}")
    picks = rng.integers(0, len(eligible), size=k)
    return [eligible[i] for i in picks]
