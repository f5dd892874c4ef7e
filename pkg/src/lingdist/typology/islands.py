"""Greedy construction of latent feature islands and the posterior representation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, ZeroVector
from .lcm import FeatureMatrix, LatentClassModel, em_fit_lcm, modified_bic, mutual_information_matrix

logger = logging.getLogger(__name__)

MAX_ACTIVE = 12
MAX_REFINE_PASSES = 50


@dataclass
class IslandModel:
    """Ordered islands partitioning the feature set."""

    islands: list

    @property
    def assignment(self) -> dict:
        """Feature id -> island index."""
        return {f: i for i, isl in enumerate(self.islands) for f in isl.feature_ids}

    def __len__(self):
        return len(self.islands)

    def swapped(self, which=None) -> "IslandModel":
        """Copy with latent labels exchanged on the given islands (default: all)."""
        which = range(len(self.islands)) if which is None else which
        which = set(which)
        return IslandModel([isl.swapped() if i in which else isl for i, isl in enumerate(self.islands)])

    def to_json(self) -> str:
        data = {
            "islands": [
                {
                    "feature_ids": isl.feature_ids,
                    "prior": isl.prior.tolist(),
                    "theta": isl.theta.tolist(),
                    "loglik": isl.loglik,
                    "n_samples": isl.n_samples,
                }
                for isl in self.islands
            ]
        }
        return json.dumps(data, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "IslandModel":
        data = json.loads(text)
        return cls([
            LatentClassModel(d["feature_ids"], d["prior"], d["theta"], d["loglik"], d["n_samples"])
            for d in data["islands"]
        ])


class _Fitter:
    """Caches LCM fits by feature subset.

    Each subset is fitted with a generator seeded from the root entropy and the
    subset's column indices, so a fit does not depend on evaluation order.
    """

    def __init__(self, m: FeatureMatrix, entropy: int, restarts: int):
        self.m = m
        self.entropy = entropy
        self.restarts = restarts
        self.cache: dict[tuple, tuple[LatentClassModel, float]] = {}

    def fit(self, cols) -> tuple[LatentClassModel, float]:
        key = tuple(sorted(cols))
        if key not in self.cache:
            rng = np.random.default_rng([self.entropy, *key])
            feats = [self.m.features[c] for c in key]
            model = em_fit_lcm(self.m, feats, self.restarts, rng)
            self.cache[key] = (model, modified_bic(model))
        return self.cache[key]


def _propose_split(fitter: _Fitter, active: list, whole: LatentClassModel, mi: np.ndarray):
    contrast = whole.theta[:, 1] - whole.theta[:, 0]
    by_feature = dict(zip(whole.feature_ids, contrast))
    g1 = [c for c in active if by_feature[fitter.m.features[c]] > 0]
    g2 = [c for c in active if by_feature[fitter.m.features[c]] <= 0]
    if g1 and g2:
        return g1, g2
    # Degenerate sign pattern: seed the two groups with the least dependent
    # pair and attach every other feature to the seed it shares more MI with.
    sub = mi[np.ix_(active, active)].copy()
    np.fill_diagonal(sub, np.inf)
    a, b = np.unravel_index(np.argmin(sub), sub.shape)
    s1, s2 = active[a], active[b]
    g1, g2 = [s1], [s2]
    for c in active:
        if c in (s1, s2):
            continue
        (g1 if mi[c, s1] >= mi[c, s2] else g2).append(c)
    return g1, g2


def _split(fitter: _Fitter, active: list, mi: np.ndarray):
    """Try to split ``active`` (column indices); return ``(g1, g2)`` or ``None``."""
    if len(active) < 2:
        raise ValueError("split needs at least two features")
    whole, whole_bic = fitter.fit(active)
    g1, g2 = _propose_split(fitter, active, whole, mi)
    score = fitter.fit(g1)[1] + fitter.fit(g2)[1]
    if not score < whole_bic:
        return None
    for _ in range(MAX_REFINE_PASSES):
        improved = False
        for c in list(active):
            src, dst = (g1, g2) if c in g1 else (g2, g1)
            if len(src) == 1:
                continue
            new_src = [x for x in src if x != c]
            new_dst = sorted(dst + [c], key=active.index)
            new_score = fitter.fit(new_src)[1] + fitter.fit(new_dst)[1]
            if new_score < score:
                score = new_score
                if src is g1:
                    g1, g2 = new_src, new_dst
                else:
                    g2, g1 = new_src, new_dst
                improved = True
        if not improved:
            break
    return g1, g2


def split_active_set(m: FeatureMatrix, active, rng: np.random.Generator, restarts: int = 5):
    """Propose and BIC-test a bipartition of the feature ids in ``active``.

    The candidate split puts features whose conditional rises with the latent
    state on one side and the rest on the other. It is accepted when the two
    parts' summed modified BIC beats the whole set's, then refined by single
    feature moves while the summed BIC strictly drops.

    Returns:
        ``(group1, group2)`` as lists of feature ids, or ``None`` for no split.
    """
    active = list(active)
    if len(active) < 2:
        raise ValueError("active set needs at least two features")
    cols = m.feature_columns(active)
    fitter = _Fitter(m, int(rng.integers(2**63)), restarts)
    result = _split(fitter, cols, mutual_information_matrix(m))
    if result is None:
        return None
    g1, g2 = result
    return [m.features[c] for c in g1], [m.features[c] for c in g2]


def greedy_island_build(m: FeatureMatrix, rng: np.random.Generator, restarts: int = 5,
                        max_active: int = MAX_ACTIVE) -> IslandModel:
    """Partition all features into latent islands.

    Repeatedly seeds an active set with the unassigned pair of highest mutual
    information, grows it one feature at a time (highest mean MI with the
    current members) and tries a BIC split after seeding and after every
    growth step. On an accepted split the larger group becomes an island and
    the rest return to the pool; an active set that can no longer grow
    becomes an island whole. Leftover single features become singleton
    islands.
    """
    m.validate()
    fitter = _Fitter(m, int(rng.integers(2**63)), restarts)
    mi = mutual_information_matrix(m)
    pool = list(range(len(m.features)))
    islands: list[list[int]] = []

    while len(pool) >= 2:
        sub = mi[np.ix_(pool, pool)].copy()
        np.fill_diagonal(sub, -np.inf)
        a, b = np.unravel_index(np.argmax(sub), sub.shape)
        active = [pool[min(a, b)], pool[max(a, b)]]
        first = active[0]
        island = None
        while True:
            split = _split(fitter, active, mi)
            if split is not None:
                g1, g2 = split
                if len(g1) != len(g2):
                    island = g1 if len(g1) > len(g2) else g2
                else:
                    island = g1 if first in g1 else g2
                break
            rest = [c for c in pool if c not in active]
            if not rest or len(active) >= max_active:
                island = active
                break
            scores = mi[np.ix_(rest, active)].mean(axis=1)
            active = active + [rest[int(np.argmax(scores))]]
        logger.debug("island %s", [m.features[c] for c in island])
        islands.append(sorted(island))
        taken = set(island)
        pool = [c for c in pool if c not in taken]

    islands.extend([c] for c in pool)
    return IslandModel([fitter.fit(cols)[0] for cols in islands])


def posterior_vector(lang, model: IslandModel, m: FeatureMatrix) -> np.ndarray:
    """Concatenated per-island posteriors ``(P(z_i=0|w), P(z_i=1|w))`` for one language."""
    return posterior_from_row(m.row(lang), model, m)


def posterior_from_row(row: np.ndarray, model: IslandModel, m: FeatureMatrix) -> np.ndarray:
    out = []
    for isl in model.islands:
        cols = m.feature_columns(isl.feature_ids)
        logp = isl.log_posterior(row[cols])[0]
        p = np.exp(logp)
        out.extend(p / p.sum())
    return np.asarray(out)


def angular_distance(u, v) -> float:
    """Angle between two nonnegative vectors, scaled by 2/pi into [0, 1]."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"shapes {u.shape} and {v.shape} differ")
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("angular distance is defined here for nonnegative vectors only")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("angular distance of a zero vector")
    a = u / nu
    b = v / nv
    # 2*atan2(|a-b|, |a+b|) equals arccos(a.b) but stays accurate near 0.
    angle = 2.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b))
    return float(min(angle, np.pi / 2) * 2.0 / np.pi)


def typology_distance(a, b, model: IslandModel, m: FeatureMatrix) -> float:
    """Angular distance between the two languages' posterior vectors."""
    return angular_distance(posterior_vector(a, model, m), posterior_vector(b, model, m))

