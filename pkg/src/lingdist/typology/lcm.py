"""Binary feature matrices, two-state latent class models and their EM fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientData, ParseError, UnknownFeature, UnknownLanguage

MISSING = -1
THETA_MIN = 1e-6
THETA_MAX = 1.0 - 1e-6
N_STATES = 2


@dataclass
class FeatureMatrix:
    """Languages x binary features, with ``-1`` marking a missing value."""

    languages: list
    features: list
    values: np.ndarray

    def __post_init__(self):
        self.languages = list(self.languages)
        self.features = list(self.features)
        self.values = np.asarray(self.values, dtype=np.int8)
        if self.values.shape != (len(self.languages), len(self.features)):
            raise ParseError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.languages)} languages x {len(self.features)} features"
            )
        if not np.isin(self.values, (0, 1, MISSING)).all():
            raise ParseError("feature values must be 0, 1 or missing")
        if len(set(self.languages)) != len(self.languages):
            raise ParseError("duplicate language ids")
        if len(set(self.features)) != len(self.features):
            raise ParseError("duplicate feature ids")
        self.language_index = {l: i for i, l in enumerate(self.languages)}
        self.feature_index = {f: j for j, f in enumerate(self.features)}

    def validate(self):
        if len(self.languages) < 2 or len(self.features) < 2:
            raise InsufficientData("need at least 2 languages and 2 features")
        empty = ~self.observed.any(axis=0)
        if empty.any():
            names = [self.features[j] for j in np.flatnonzero(empty)]
            raise InsufficientData(f"features with no observed value: {names}")
        return self

    @property
    def observed(self) -> np.ndarray:
        return self.values != MISSING

    @property
    def missing_rate(self) -> float:
        return float(np.mean(~self.observed)) if self.values.size else 0.0

    def feature_columns(self, feature_ids) -> list[int]:
        try:
            return [self.feature_index[f] for f in feature_ids]
        except KeyError as exc:
            raise UnknownFeature(exc.args[0]) from None

    def row(self, lang) -> np.ndarray:
        try:
            return self.values[self.language_index[lang]]
        except KeyError:
            raise UnknownLanguage(lang) from None


@dataclass
class LatentClassModel:
    """One latent variable with two states over a group of binary features.

    ``theta[j, k]`` is P(feature j = 1 | Z = k).
    """

    feature_ids: list
    prior: np.ndarray
    theta: np.ndarray
    loglik: float
    n_samples: int
    trace: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.feature_ids = list(self.feature_ids)
        self.prior = np.asarray(self.prior, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float).reshape(len(self.feature_ids), N_STATES)

    @property
    def n_params(self) -> int:
        return N_STATES * len(self.feature_ids) + (N_STATES - 1)

    def swapped(self) -> "LatentClassModel":
        """Same model with the latent state labels exchanged."""
        return LatentClassModel(
            self.feature_ids, self.prior[::-1].copy(), self.theta[:, ::-1].copy(),
            self.loglik, self.n_samples,
        )

    def log_posterior(self, x: np.ndarray) -> np.ndarray:
        """Log P(Z | observed entries of ``x``) for rows of ``x`` (missing = -1)."""
        x = np.atleast_2d(x)
        logp = _state_logliks(x, self.theta) + np.log(np.maximum(self.prior, 1e-300))
        return logp - _logsumexp(logp)[:, None]


def _logsumexp(a):
    m = a.max(axis=1)
    return m + np.log(np.exp(a - m[:, None]).sum(axis=1))


def _state_logliks(x, theta):
    # Sum over observed entries only; missing values are marginalized out.
    ones = (x == 1).astype(float)
    zeros = (x == 0).astype(float)
    return ones @ np.log(theta) + zeros @ np.log1p(-theta)


def em_single(x: np.ndarray, theta0: np.ndarray, tol=1e-6, max_iter=200):
    """Run EM from ``theta0`` with a uniform prior.

    Returns ``(prior, theta, loglik, trace)`` where ``trace`` holds the
    log-likelihood after every E-step, starting at the initial parameters.
    """
    ones = (x == 1).astype(float)
    obs = (x != MISSING).astype(float)
    theta = np.clip(theta0, THETA_MIN, THETA_MAX)
    prior = np.full(N_STATES, 1.0 / N_STATES)

    def e_step(prior, theta):
        logp = _state_logliks(x, theta) + np.log(np.maximum(prior, 1e-300))
        norm = _logsumexp(logp)
        return np.exp(logp - norm[:, None]), float(norm.sum())

    resp, ll = e_step(prior, theta)
    trace = [ll]
    for _ in range(max_iter):
        prior = resp.mean(axis=0)
        num = ones.T @ resp
        den = obs.T @ resp
        theta = np.where(den > 0, num / np.where(den > 0, den, 1.0), theta)
        theta = np.clip(theta, THETA_MIN, THETA_MAX)
        resp, new_ll = e_step(prior, theta)
        trace.append(new_ll)
        improved = new_ll - ll
        ll = new_ll
        if improved < tol:
            break
    return prior, theta, ll, trace


def em_fit_lcm(m: FeatureMatrix, feature_subset, restarts: int = 5,
               rng: np.random.Generator | None = None, tol=1e-6, max_iter=200) -> LatentClassModel:
    """Fit a two-state latent class model on ``feature_subset`` by EM.

    Languages with no observed value in the subset are left out. Each restart
    draws conditionals uniformly from [0.2, 0.8] and a uniform prior; the
    restart with the highest final log-likelihood wins.

    Raises:
        InsufficientData: fewer than two languages observe any subset feature.
    """
    feature_subset = list(feature_subset)
    if not feature_subset:
        raise InsufficientData("empty feature subset")
    cols = m.feature_columns(feature_subset)
    x = m.values[:, cols]
    x = x[(x != MISSING).any(axis=1)]
    if x.shape[0] < 2:
        raise InsufficientData(f"fewer than 2 languages observe {feature_subset}")
    if rng is None:
        rng = np.random.default_rng()
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for child in rng.spawn(restarts):
        theta0 = child.uniform(0.2, 0.8, size=(len(cols), N_STATES))
        prior, theta, ll, trace = em_single(x, theta0, tol, max_iter)
        if best is None or ll > best[2]:
            best = (prior, theta, ll, trace)
    prior, theta, ll, trace = best
    return LatentClassModel(feature_subset, prior, theta, ll, int(x.shape[0]), trace)


def bic_score(k: int, n: int, loglik: float) -> float:
    """``2 k^2 ln(n) - 2 loglik``."""
    return 2.0 * k * k * math.log(n) - 2.0 * loglik


def modified_bic(model: LatentClassModel) -> float:
    """Quadratically penalized BIC of a fitted model; lower is better.

    The parameter count is ``2 * |features| + 1`` (the conditional matrix plus
    one free prior probability).
    """
    return bic_score(model.n_params, model.n_samples, model.loglik)


def mutual_information_matrix(m: FeatureMatrix, smoothing=0.5) -> np.ndarray:
    """Pairwise MI (nats) between all features over pairwise-complete languages.

    Each 2x2 contingency cell gets ``smoothing`` pseudo-counts. Pairs observed
    together in fewer than two languages get 0.
    """
    obs = m.observed
    a1 = ((m.values == 1) & obs).astype(float)
    a0 = ((m.values == 0) & obs).astype(float)
    counts = np.stack([
        np.stack([a0.T @ a0, a0.T @ a1], axis=-1),
        np.stack([a1.T @ a0, a1.T @ a1], axis=-1),
    ], axis=-2)  # (f, f, 2, 2), axes: value of fi, value of fj
    n_pair = counts.sum(axis=(-1, -2))
    c = counts + smoothing
    total = c.sum(axis=(-1, -2), keepdims=True)
    p = c / total
    pi = p.sum(axis=-1, keepdims=True)
    pj = p.sum(axis=-2, keepdims=True)
    mi = np.sum(p * np.log(p / (pi * pj)), axis=(-1, -2))
    mi = np.where(n_pair < 2, 0.0, np.maximum(mi, 0.0))
    return mi


def mutual_information(fi, fj, m: FeatureMatrix, smoothing=0.5) -> float:
    """Empirical MI (nats) between two features over languages observing both."""
    i, j = m.feature_columns([fi, fj])
    xi = m.values[:, i]
    xj = m.values[:, j]
    both = (xi != MISSING) & (xj != MISSING)
    if both.sum() < 2:
        return 0.0
    xi = xi[both]
    xj = xj[both]
    c = np.array([[np.sum((xi == a) & (xj == b)) for b in (0, 1)] for a in (0, 1)], dtype=float)
    p = (c + smoothing) / (c.sum() + 4 * smoothing)
    pi = p.sum(axis=1, keepdims=True)
    pj = p.sum(axis=0, keepdims=True)
    return max(float(np.sum(p * np.log(p / (pi * pj)))), 0.0)
