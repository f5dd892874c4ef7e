"""Transfer-language selection by distance and performance-loss scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MissingScore, NoCandidates, NonPositiveMax, UnknownLanguage


@dataclass
class ScoreMatrix:
    """Task scores ``s[i, j]`` for transferring to target ``i`` from source ``j``; NaN is missing."""

    targets: list
    sources: list
    scores: np.ndarray

    def __post_init__(self):
        self.targets = list(self.targets)
        self.sources = list(self.sources)
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.shape != (len(self.targets), len(self.sources)):
            raise ValueError("score matrix shape does not match its labels")

    def row(self, target) -> dict:
        try:
            i = self.targets.index(target)
        except ValueError:
            raise UnknownLanguage(target) from None
        return {s: float(v) for s, v in zip(self.sources, self.scores[i]) if not math.isnan(v)}


@dataclass
class SelectionReport:
    rows: list = field(default_factory=list)  # (target, chosen, loss)
    skipped: list = field(default_factory=list)  # (target, reason)

    @property
    def mean_loss(self) -> float:
        return float(np.mean([r[2] for r in self.rows])) if self.rows else float("nan")

    @property
    def mean_loss_pct(self) -> float:
        return 100.0 * self.mean_loss

    def to_text(self) -> str:
        lines = ["target\tchosen\tloss\tloss_pct"]
        for target, chosen, loss in self.rows:
            lines.append(f"{target}\t{chosen}\t{loss:.17g}\t{100 * loss:.6f}")
        for target, reason in self.skipped:
            lines.append(f"{target}\tSKIPPED\t{reason}")
        lines.append(f"evaluated={len(self.rows)} skipped={len(self.skipped)}")
        lines.append(f"mean_loss_pct={self.mean_loss_pct:.6f}")
        return "\n".join(lines) + "\n"


def select_top1(target, candidates, dist: Callable) -> object:
    """Candidate nearest to ``target``; ties go to the smallest id (string order)."""
    candidates = [c for c in candidates if c != target]
    if not candidates:
        raise NoCandidates(f"no candidate sources for {target!r}")
    return min(candidates, key=lambda c: (dist(target, c), str(c)))


def performance_loss(row: dict, chosen) -> float:
    """``(max_j s_j - s_chosen) / max_j s_j`` over the non-missing scores in ``row``."""
    if chosen not in row or row[chosen] is None or math.isnan(row[chosen]):
        raise MissingScore(f"no score for source {chosen!r}")
    best = max(v for v in row.values() if not math.isnan(v))
    if not best > 0:
        raise NonPositiveMax(f"best score {best} is not positive")
    return (best - row[chosen]) / best


def harness_run(matrix: ScoreMatrix, dist: Callable) -> SelectionReport:
    """Leave-one-target-out top-1 selection over every target of ``matrix``."""
    report = SelectionReport()
    for target in matrix.targets:
        row = {s: v for s, v in matrix.row(target).items() if s != target}
        if not row:
            report.skipped.append((target, "no scored sources"))
            continue
        if not max(row.values()) > 0:
            report.skipped.append((target, "best score not positive"))
            continue
        chosen = select_top1(target, sorted(row, key=str), dist)
        report.rows.append((target, chosen, performance_loss(row, chosen)))
    return report
