"""Contrastive training of genealogy embeddings and the normalized genetic distance."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DegenerateTable, EmptyGraph, TooFewNodes, UnknownNode
from .graph import ClosureIndex, GenealogyGraph, build_closure
from .manifolds import DEFAULT_EPS, make_geometry

logger = logging.getLogger(__name__)

DEFAULT_LR = {"poincare": 0.3, "hyperboloid": 0.1, "euclidean": 0.1}
LOSS_FORMS = ("softmax", "ratio")
NEGATIVE_SIDES = ("ancestor", "descendant", "both")


@dataclass
class TrainConfig:
    """Hyperparameters for :func:`train_embeddings`.

    ``learning_rate=None`` picks the per-geometry default. ``loss_form`` selects
    the softmax that includes the positive pair in its denominator
    (``"softmax"``) or the bare ratio over negatives only (``"ratio"``).
    ``negative_side`` controls which end of a positive pair anchors the
    contrastive term: the ancestor (negatives are its non-descendants), the
    descendant (negatives are its non-ancestors), or both.
    """

    geometry: str = "hyperboloid"
    dim: int = 10
    epochs: int = 300
    learning_rate: float | None = None
    burn_in_epochs: int = 20
    burn_in_factor: float = 0.1
    negatives_K: int = 10
    epsilon: float = DEFAULT_EPS
    grad_clip: float = 1.0
    spatial_clip: float = 1e6
    rng_seed: int = 0
    loss_form: str = "softmax"
    negative_side: str = "descendant"

    def __post_init__(self):
        if self.geometry not in DEFAULT_LR:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.loss_form not in LOSS_FORMS:
            raise ValueError(f"loss_form must be one of {LOSS_FORMS}")
        if self.negative_side not in NEGATIVE_SIDES:
            raise ValueError(f"negative_side must be one of {NEGATIVE_SIDES}")
        for name in ("dim", "epochs", "negatives_K"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.burn_in_epochs < 0:
            raise ValueError("burn_in_epochs must be nonnegative")
        if not 0 < self.burn_in_factor <= 1:
            raise ValueError("burn_in_factor must lie in (0, 1]")
        for name in ("epsilon", "grad_clip", "spatial_clip"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.epsilon >= 1e-2:
            raise ValueError("epsilon must be much smaller than 1")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    @property
    def lr(self) -> float:
        return self.learning_rate if self.learning_rate is not None else DEFAULT_LR[self.geometry]

    def to_dict(self):
        return asdict(self)


@dataclass
class EmbeddingTable:
    """Per-node coordinates in one geometry.

    ``coords`` has one row per entry of ``nodes``; hyperboloid rows carry the
    time-like coordinate first, so their length is ``dim + 1``.
    """

    geometry: str
    dim: int
    nodes: list
    coords: np.ndarray
    d_max: float | None = None
    losses: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        self.space = make_geometry(self.geometry)

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, node):
        return node in self.index

    def vector(self, node) -> np.ndarray:
        try:
            return self.coords[self.index[node]]
        except KeyError:
            raise UnknownNode(node) from None

    def distance(self, a, b) -> float:
        """Raw geometric distance between two embedded nodes."""
        return float(self.space.dist(self.vector(a), self.vector(b)))

    def distances_from(self, i: int) -> np.ndarray:
        return self.space.dist(self.coords[i], self.coords)


def contrastive_loss_grad(space, u, v, negatives, loss_form="softmax"):
    """Loss of one positive pair and its Euclidean gradients.

    Args:
        space: geometry object (see :mod:`.manifolds`).
        u, v: anchor and positive vectors.
        negatives: ``(K, n)`` array of negative vectors.

    Returns:
        ``(loss, grad_u, grad_v, grad_negatives)``.
    """
    negatives = np.atleast_2d(negatives)
    others = np.vstack([v[None, :], negatives])
    d, g_u, g_other = space.dist_grad(u, others)
    logits = -d
    if loss_form == "softmax":
        shift = logits.max()
        e = np.exp(logits - shift)
        p = e / e.sum()
        loss = d[0] + shift + np.log(e.sum())
        coef = -p
        coef[0] += 1.0
    else:
        neg = logits[1:]
        shift = neg.max()
        e = np.exp(neg - shift)
        q = e / e.sum()
        loss = d[0] + shift + np.log(e.sum())
        coef = np.concatenate([[1.0], -q])
    grad_u = coef @ g_u
    grads = coef[:, None] * g_other
    return float(loss), grad_u, grads[0], grads[1:]


def contrastive_loss(u, v, negatives, table: EmbeddingTable, loss_form="softmax") -> float:
    """Negative log softmax probability of the positive ``v`` among ``{v} + negatives``, anchored at ``u``."""
    if not negatives:
        raise ValueError("at least one negative is required")
    negs = np.array([table.vector(w) for w in negatives])
    loss, *_ = contrastive_loss_grad(table.space, table.vector(u), table.vector(v), negs, loss_form)
    return loss


def _eligible_arrays(closure: ClosureIndex, side: str):
    idx = closure.index
    n = len(closure.nodes)
    out = []
    for node in closure.nodes:
        blocked = closure.descendants[node] if side == "ancestor" else closure.ancestors[node]
        mask = np.ones(n, dtype=bool)
        mask[idx[node]] = False
        for b in blocked:
            mask[idx[b]] = False
        out.append(np.flatnonzero(mask))
    return out


def train_embeddings(g: GenealogyGraph, cfg: TrainConfig, progress=None) -> EmbeddingTable:
    """Fit embeddings of every node of ``g`` with Riemannian SGD.

    Each epoch visits the transitive-closure pairs in a fresh random order,
    draws new negatives per visit, and updates every vector that took part in
    the pair's loss with the geometry's RSGD step. The result is fully
    determined by ``cfg`` (including ``rng_seed``).

    Raises:
        EmptyGraph: ``g`` has no nodes.
        CycleDetected: ``g`` has a cycle.
    """
    if not g.nodes:
        raise EmptyGraph("cannot train on an empty graph")
    closure = build_closure(g)
    rng = np.random.default_rng(cfg.rng_seed)
    space = make_geometry(cfg.geometry, cfg.epsilon, cfg.grad_clip, cfg.spatial_clip)
    n = len(g.nodes)
    X = space.init(n, cfg.dim, rng)

    idx = closure.index
    pairs = np.array([(idx[u], idx[v]) for u, v in closure.positives()], dtype=np.int64).reshape(-1, 2)
    sides = []
    if cfg.negative_side in ("ancestor", "both"):
        sides.append((0, _eligible_arrays(closure, "ancestor")))
    if cfg.negative_side in ("descendant", "both"):
        sides.append((1, _eligible_arrays(closure, "descendant")))

    K = cfg.negatives_K
    losses = []
    for epoch in range(cfg.epochs):
        lr = cfg.lr * (cfg.burn_in_factor if epoch < cfg.burn_in_epochs else 1.0)
        total = 0.0
        terms = 0
        for p in rng.permutation(len(pairs)):
            pair = pairs[p]
            touched = []
            grads = []
            for anchor_pos, eligible in sides:
                a = pair[anchor_pos]
                b = pair[1 - anchor_pos]
                pool = eligible[a]
                if len(pool) == 0:
                    continue
                negs = pool[rng.integers(0, len(pool), size=K)]
                loss, g_a, g_b, g_n = contrastive_loss_grad(space, X[a], X[b], X[negs], cfg.loss_form)
                total += loss
                terms += 1
                touched.append(np.concatenate([[a, b], negs]))
                grads.append(np.vstack([g_a[None], g_b[None], g_n]))
            if not touched:
                continue
            touched = np.concatenate(touched)
            grads = np.vstack(grads)
            nodes, inverse = np.unique(touched, return_inverse=True)
            acc = np.zeros((len(nodes), X.shape[1]))
            np.add.at(acc, inverse, grads)
            X[nodes] = space.step(X[nodes], acc, lr)
        losses.append(total / terms if terms else 0.0)
        if progress is not None:
            progress(epoch, losses[-1])
        logger.debug("epoch %d loss %.6f", epoch, losses[-1])

    table = EmbeddingTable(cfg.geometry, cfg.dim, list(g.nodes), X, losses=losses)
    if n >= 2:
        try:
            compute_dmax(table)
        except DegenerateTable:
            logger.warning("all embedded points coincide; d_max left unset")
    return table


def compute_dmax(table: EmbeddingTable) -> float:
    """Exact maximum pairwise distance over all embedded nodes; cached on the table.

    Raises:
        TooFewNodes: fewer than two nodes.
        DegenerateTable: all points coincide.
    """
    n = len(table)
    if n < 2:
        raise TooFewNodes("d_max needs at least two nodes")
    X = table.coords
    block = max(1, 4_000_000 // (n * X.shape[1]))
    best = -np.inf
    for start in range(0, n, block):
        chunk = X[start:start + block]
        d = table.space.dist(chunk[:, None, :], X[None, :, :])
        best = max(best, float(d.max()))
    floor = float(table.space.dist(X[0], X[0]))
    if not best > floor:
        raise DegenerateTable("all embedded points coincide")
    table.d_max = best
    return best


def genetic_distance(a, b, table: EmbeddingTable) -> float:
    """Geometric distance divided by the table's cached ``d_max``, in [0, 1]."""
    va = table.vector(a)
    vb = table.vector(b)
    if a == b:
        return 0.0
    if table.d_max is None:
        compute_dmax(table)
    d = float(table.space.dist(va, vb)) / table.d_max
    return min(d, 1.0)
