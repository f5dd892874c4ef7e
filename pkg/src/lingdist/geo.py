"""Geographic modality: speaker distributions compared by Earth Mover's distance.

A language is a discrete distribution of its L1 speakers over locations on the
sphere. Two languages are compared by the exact optimal-transport cost under
the great-circle ground metric, normalized by the pole-to-pole distance so the
result lies in [0, 1].
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# Only the numpy backend of POT is used; skip probing the deep-learning ones.
for _backend in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

from .errors import AllZeroCounts, EmptyInput, InvalidDistribution

EARTH_RADIUS_KM = 6371.0088
D_MAX_KM = math.pi * EARTH_RADIUS_KM

WEIGHT_TOLERANCE = 1e-6
_EMD_MAX_ITER = 10_000_000


@dataclass(frozen=True, order=True)
class GeoPoint:
    """A location in degrees.

    Longitude is wrapped into [-180, 180) and set to 0 at the poles, so two
    points compare equal exactly when they are the same place on the sphere.
    """

    lat: float
    lon: float

    def __post_init__(self):
        lat = float(self.lat)
        lon = float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise InvalidDistribution(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= lat <= 90.0:
            raise InvalidDistribution(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon < 180.0:
            lon = (lon + 180.0) % 360.0 - 180.0
        if abs(lat) == 90.0:
            lon = 0.0
        if lon == 0.0:
            lon = 0.0  # drop the sign of -0.0
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class GeoDistribution:
    """Speaker shares over distinct locations.

    Build instances with :meth:`from_pairs` (or :func:`normalize_speaker_counts`),
    which drops zero weights, merges duplicate points and checks normalization.
    """

    points: tuple[GeoPoint, ...]
    weights: tuple[float, ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[GeoPoint, float]]) -> "GeoDistribution":
        merged: dict[GeoPoint, float] = {}
        for point, weight in pairs:
            if not isinstance(point, GeoPoint):
                point = GeoPoint(*point)
            weight = float(weight)
            if not math.isfinite(weight) or weight < 0:
                raise InvalidDistribution(f"invalid weight {weight} at {point}")
            if weight == 0.0:
                continue
            merged[point] = merged.get(point, 0.0) + weight
        if not merged:
            raise EmptyInput("distribution has no positive weight")
        total = math.fsum(merged.values())
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise InvalidDistribution(f"weights sum to {total!r}, expected 1")
        points = tuple(merged)
        weights = tuple(w / total for w in merged.values())
        return cls(points, weights)

    def __len__(self):
        return len(self.points)

    @property
    def coords(self) -> np.ndarray:
        """(n, 2) array of (lat, lon) in degrees."""
        return np.array([(p.lat, p.lon) for p in self.points], dtype=float).reshape(-1, 2)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def as_dict(self) -> dict[GeoPoint, float]:
        return dict(zip(self.points, self.weights))


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between the supports of two distributions."""

    entries: tuple[tuple[int, int, float], ...]
    shape: tuple[int, int]

    def to_dense(self) -> np.ndarray:
        plan = np.zeros(self.shape)
        for i, j, mass in self.entries:
            plan[i, j] = mass
        return plan

    def transpose(self) -> "TransportPlan":
        return TransportPlan(
            tuple((j, i, m) for i, j, m in self.entries), (self.shape[1], self.shape[0])
        )

    @classmethod
    def from_dense(cls, plan: np.ndarray) -> "TransportPlan":
        rows, cols = np.nonzero(plan > 0)
        return cls(
            tuple((int(i), int(j), float(plan[i, j])) for i, j in zip(rows, cols)),
            plan.shape,
        )


def _central_angle(lat1, lon1, lat2, lon2):
    # Spherical special case of Vincenty's formula; well conditioned for
    # coincident and antipodal points. Pairs are put in a canonical order
    # first so the result is bitwise symmetric.
    lat1, lon1, lat2, lon2 = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (lat1, lon1, lat2, lon2))
    )
    swap = (lat1 > lat2) | ((lat1 == lat2) & (lon1 > lon2))
    lat1, lat2 = np.where(swap, lat2, lat1), np.where(swap, lat1, lat2)
    lon1, lon2 = np.where(swap, lon2, lon1), np.where(swap, lon1, lon2)
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dlon = np.radians(lon2 - lon1)
    sin1, cos1 = np.sin(phi1), np.cos(phi1)
    sin2, cos2 = np.sin(phi2), np.cos(phi2)
    cos_dlon = np.cos(dlon)
    num = np.hypot(cos2 * np.sin(dlon), cos1 * sin2 - sin1 * cos2 * cos_dlon)
    den = sin1 * sin2 + cos1 * cos2 * cos_dlon
    return np.arctan2(num, den)


def geodesic_distance(p: GeoPoint, q: GeoPoint) -> float:
    """Great-circle distance in km on a sphere of radius :data:`EARTH_RADIUS_KM`."""
    if p == q:
        return 0.0
    return float(EARTH_RADIUS_KM * _central_angle(p.lat, p.lon, q.lat, q.lon))


def cost_matrix(a: GeoDistribution, b: GeoDistribution) -> np.ndarray:
    """Pairwise great-circle distances (km) between the two supports."""
    ca, cb = a.coords, b.coords
    angles = _central_angle(ca[:, 0, None], ca[:, 1, None], cb[None, :, 0], cb[None, :, 1])
    return EARTH_RADIUS_KM * angles


def normalize_speaker_counts(rows: Sequence[tuple[GeoPoint, int]]) -> GeoDistribution:
    """Turn per-location L1 speaker counts into a distribution of speaker shares.

    Zero-count rows are dropped and rows at the same location are merged.

    Raises:
        EmptyInput: no rows were given.
        AllZeroCounts: every count is zero.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInput("no speaker rows")
    counts: dict[GeoPoint, int] = {}
    for point, count in rows:
        if isinstance(count, float) and count.is_integer():
            count = int(count)
        if not isinstance(count, (int, np.integer)) or isinstance(count, bool) or count < 0:
            raise InvalidDistribution(f"speaker count must be a nonnegative integer, got {count!r}")
        if not isinstance(point, GeoPoint):
            point = GeoPoint(*point)
        counts[point] = counts.get(point, 0) + int(count)
    total = sum(counts.values())
    if total == 0:
        raise AllZeroCounts("all speaker counts are zero")
    return GeoDistribution.from_pairs((p, c / total) for p, c in counts.items() if c > 0)


def _order_key(d: GeoDistribution):
    return tuple(zip(d.points, d.weights))


def emd(a: GeoDistribution, b: GeoDistribution) -> tuple[float, TransportPlan]:
    """Exact Earth Mover's distance (km) and an optimal transport plan.

    Single-point distributions use the closed form; otherwise the balanced
    transportation problem is solved exactly with the network simplex.
    """
    if _order_key(b) < _order_key(a):
        cost, plan = emd(b, a)
        return cost, plan.transpose()

    wa, wb = a.weight_array, b.weight_array
    if len(a) == 1 or len(b) == 1:
        costs = cost_matrix(a, b)
        plan = wa[:, None] * wb[None, :]
        return float(np.sum(plan * costs)), TransportPlan.from_dense(plan)
    if a == b:
        plan = np.diag(wa)
        return 0.0, TransportPlan.from_dense(plan)

    costs = cost_matrix(a, b)
    wa = wa / wa.sum()
    wb = wb / wb.sum()
    plan = ot.emd(wa, wb, costs, numItermax=_EMD_MAX_ITER)
    cost = float(np.sum(plan * costs))
    return max(cost, 0.0), TransportPlan.from_dense(plan)


def product_plan_cost(a: GeoDistribution, b: GeoDistribution) -> float:
    """Cost (km) of the independent coupling ``w_i * v_j``; an upper bound on the EMD."""
    plan = a.weight_array[:, None] * b.weight_array[None, :]
    return float(np.sum(plan * cost_matrix(a, b)))


def geo_distance(a: GeoDistribution, b: GeoDistribution) -> float:
    """EMD normalized by the antipodal distance, in [0, 1]."""
    cost, _ = emd(a, b)
    return min(cost / D_MAX_KM, 1.0)
