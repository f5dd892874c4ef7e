"""Weighted aggregation of the per-modality distances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidWeights, MissingModality, RankDeficient, TooFewRows

MODALITIES = ("geo", "gen", "typ")


@dataclass(frozen=True)
class ModalityWeights:
    """Nonnegative weights summing to one, keyed by modality name."""

    values: tuple[tuple[str, float], ...]

    def __post_init__(self):
        for name, w in self.values:
            if not math.isfinite(w) or w < 0:
                raise InvalidWeights(f"weight for {name!r} must be a nonnegative number, got {w!r}")
        total = math.fsum(w for _, w in self.values)
        if abs(total - 1.0) > 1e-9:
            raise InvalidWeights(f"weights sum to {total!r}, expected 1")

    @classmethod
    def of(cls, geo: float, gen: float, typ: float) -> "ModalityWeights":
        return cls((("geo", float(geo)), ("gen", float(gen)), ("typ", float(typ))))

    @classmethod
    def from_mapping(cls, weights: Mapping[str, float]) -> "ModalityWeights":
        return cls(tuple((k, float(v)) for k, v in weights.items()))

    def as_dict(self) -> dict[str, float]:
        return dict(self.values)

    def __getitem__(self, name):
        return self.as_dict()[name]

    def __iter__(self):
        return iter(self.values)


def uniform_weights(modalities: Sequence[str] = MODALITIES) -> ModalityWeights:
    n = len(modalities)
    return ModalityWeights(tuple((m, 1.0 / n) for m in modalities))


def composite_distance(distances: Mapping[str, float | None], weights: ModalityWeights) -> float:
    """``sum_m w_m d_m`` over modalities; ``None`` marks an unavailable distance.

    Raises:
        MissingModality: a modality with positive weight has no distance.
    """
    total = 0.0
    for name, w in weights:
        d = distances.get(name)
        if d is None or (isinstance(d, float) and math.isnan(d)):
            if w > 0:
                raise MissingModality(f"no {name} distance but its weight is {w}")
            continue
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"{name} distance {d} outside [0, 1]")
        total += w * d
    return min(max(total, 0.0), 1.0)


def ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients of ``y`` on ``[1, X]``; intercept first."""
    A = np.column_stack([np.ones(len(X)), X])
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise RankDeficient("design matrix (intercept + distances) is rank deficient")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def fit_weights(rows, transform: str = "logistic", modalities: Sequence[str] = MODALITIES) -> ModalityWeights:
    """Task-specific weights from a regression of performance loss on distances.

    Args:
        rows: iterable of ``(distances, loss)`` where ``distances`` is a mapping
            or a sequence ordered like ``modalities``.
        transform: ``"logistic"`` or ``"relu"``, applied to each slope before
            normalizing to sum one. The intercept is discarded. ReLU falls back
            to uniform weights when no slope is positive.
    """
    rows = list(rows)
    if len(rows) < len(modalities) + 1:
        raise TooFewRows(f"need at least {len(modalities) + 1} rows, got {len(rows)}")
    X = np.array([
        [d[m] for m in modalities] if isinstance(d, Mapping) else list(d) for d, _ in rows
    ], dtype=float)
    y = np.array([loss for _, loss in rows], dtype=float)
    slopes = ols(X, y)[1:]
    if transform == "logistic":
        t = 1.0 / (1.0 + np.exp(-slopes))
    elif transform == "relu":
        t = np.maximum(slopes, 0.0)
        if not np.any(t > 0):
            return uniform_weights(modalities)
    else:
        raise ValueError(f"unknown transform {transform!r}")
    w = t / t.sum()
    return ModalityWeights(tuple(zip(modalities, map(float, w))))
