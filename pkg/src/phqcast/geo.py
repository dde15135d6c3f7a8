"""GPS cleaning, significant-place clustering and the daily GPS features."""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import MS_PER_HOUR, GpsFix, Timestamp, local_day_index

EARTH_RADIUS_M = 6_371_000.0
STATIONARY_MAX_SPEED = 1.4  # m/s
ACCURACY_PERCENTILE = 80.0

# default settings for the three algorithms
TIME_DISTANCE_M = 40.0
TIME_DURATION_S = 900.0
KMEANS_RADIUS_M = 500.0
DBSCAN_EPS_M = 30.0
DBSCAN_MIN_SAMPLES = 3
KMEANS_MAX_ITER = 100

ALGORITHMS = ("time_based", "kmeans", "dbscan")
HOME_WINDOW_H = (0.0, 6.0)


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"coordinates out of range: ({self.lat}, {self.lon})")


def haversine(a, b) -> float:
    """Great-circle distance in metres between two objects with ``lat``/``lon``."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def haversine_np(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Broadcasting haversine over arrays of degrees."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def derive_speeds(fixes: Sequence[GpsFix]) -> list[GpsFix]:
    """Fill NaN speeds from displacement over time to the neighbouring fix.

    Fallback for logs without a device speed column; fixes that carry a speed
    are returned untouched.
    """
    if not any(math.isnan(f.speed) for f in fixes):
        return list(fixes)
    out = []
    for i, f in enumerate(fixes):
        if not math.isnan(f.speed):
            out.append(f)
            continue
        if len(fixes) == 1:
            speed = 0.0
        else:
            other = fixes[i - 1] if i > 0 else fixes[i + 1]
            dt = abs(f.t.instant_ms - other.t.instant_ms) / 1000.0
            speed = haversine(f, other) / dt if dt > 0 else 0.0
        out.append(GpsFix(f.t, f.lat, f.lon, f.accuracy, speed))
    return out


def cohort_accuracy_cutoff(fixes: Iterable[GpsFix] | np.ndarray) -> float:
    """80th percentile (linear interpolation) of accuracy over every fix in the cohort."""
    if isinstance(fixes, np.ndarray):
        acc = fixes.astype(float)
    else:
        acc = np.fromiter((f.accuracy for f in fixes), dtype=float)
    if acc.size == 0:
        raise ValueError("cannot compute an accuracy cutoff from zero fixes")
    return float(np.percentile(acc, ACCURACY_PERCENTILE, method="linear"))


def preprocess(fixes: Sequence[GpsFix], accuracy_cutoff: float) -> tuple[list[GpsFix], list[GpsFix]]:
    """Return ``(stationary, all_valid)``; order of the input is preserved."""
    all_valid = [f for f in fixes if f.accuracy <= accuracy_cutoff and f.speed >= 0]
    stationary = [f for f in all_valid if f.speed <= STATIONARY_MAX_SPEED]
    return stationary, all_valid


# -- clusters ---------------------------------------------------------------


@dataclass(frozen=True)
class PlaceCluster:
    id: int
    centroid: GeoPoint
    member_fixes: tuple[GpsFix, ...]
    dwell: float = 0.0

    def __post_init__(self) -> None:
        if not self.member_fixes:
            raise ValueError("a place needs at least one member fix")


@dataclass(frozen=True)
class SignificantPlaces:
    places: tuple[PlaceCluster, ...]
    algorithm: str
    params: dict = field(default_factory=dict)

    @property
    def radius(self) -> float:
        """Membership radius used for dwell attribution."""
        return float(self.params["radius"])

    def __len__(self) -> int:
        return len(self.places)

    def centroids(self) -> np.ndarray:
        return np.array([[p.centroid.lat, p.centroid.lon] for p in self.places], dtype=float).reshape(-1, 2)


def _centroid(fixes: Sequence[GpsFix]) -> GeoPoint:
    n = len(fixes)
    return GeoPoint(sum(f.lat for f in fixes) / n, sum(f.lon for f in fixes) / n)


def _finish(groups: list[list[GpsFix]], stationary: Sequence[GpsFix], algorithm: str, params: dict) -> SignificantPlaces:
    draft = SignificantPlaces(
        tuple(PlaceCluster(i, _centroid(g), tuple(g)) for i, g in enumerate(groups)), algorithm, params
    )
    dwell = dwell_attribution(stationary, draft)
    places = tuple(PlaceCluster(p.id, p.centroid, p.member_fixes, dwell.get(p.id, 0.0)) for p in draft.places)
    return SignificantPlaces(places, algorithm, params)


def cluster_time_based(
    fixes: Sequence[GpsFix], distance_m: float = TIME_DISTANCE_M, duration_s: float = TIME_DURATION_S
) -> SignificantPlaces:
    """Incremental clustering along the time axis.

    A fix joins the running cluster when it lies within ``distance_m`` of the
    running centroid. When a fix does not, the running cluster closes and
    counts as significant if it spans at least ``duration_s``; a significant
    cluster whose centroid is within ``distance_m / 3`` of an existing place is
    merged into it.
    """
    params = {"distance_m": distance_m, "duration_s": duration_s, "radius": distance_m}
    merge_m = distance_m / 3.0
    places: list[list[GpsFix]] = []
    sums: list[list[float]] = []  # [sum_lat, sum_lon] per place

    def close(run: list[GpsFix]) -> None:
        if not run or (run[-1].t.instant_ms - run[0].t.instant_ms) / 1000.0 < duration_s:
            return
        c = _centroid(run)
        best, best_d = None, math.inf
        for i, s in enumerate(sums):
            n = len(places[i])
            d = haversine(c, GeoPoint(s[0] / n, s[1] / n))
            if d < best_d:
                best, best_d = i, d
        if best is not None and best_d < merge_m:
            places[best].extend(run)
            sums[best][0] += c.lat * len(run)
            sums[best][1] += c.lon * len(run)
        else:
            places.append(list(run))
            sums.append([sum(f.lat for f in run), sum(f.lon for f in run)])

    run: list[GpsFix] = []
    lat_sum = lon_sum = 0.0
    for f in fixes:
        if run and haversine(GeoPoint(lat_sum / len(run), lon_sum / len(run)), f) <= distance_m:
            run.append(f)
            lat_sum += f.lat
            lon_sum += f.lon
        else:
            close(run)
            run, lat_sum, lon_sum = [f], f.lat, f.lon
    close(run)
    return _finish(places, fixes, "time_based", params)


def _unique_points(fixes: Sequence[GpsFix]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct coordinates in first-occurrence order, their counts, and the inverse map."""
    coords = np.array([[f.lat, f.lon] for f in fixes], dtype=float).reshape(-1, 2)
    uniq, first, inverse, counts = np.unique(coords, axis=0, return_index=True, return_inverse=True, return_counts=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return uniq[order], counts[order], rank[inverse.reshape(-1)]


def _lloyd(pts: np.ndarray, w: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray]:
    best = None
    labels = None
    for _ in range(max_iter):
        d = haversine_np(pts[:, None, 0], pts[:, None, 1], centers[None, :, 0], centers[None, :, 1])
        new = np.argmin(d, axis=1)
        sse = float(np.sum(w * d[np.arange(len(pts)), new] ** 2))
        if best is None or sse < best[0]:
            best = (sse, new.copy(), centers.copy())
        if labels is not None and np.array_equal(new, labels):
            return new, centers
        labels = new
        centers = centers.copy()
        for j in range(len(centers)):
            m = labels == j
            if m.any():
                centers[j] = np.average(pts[m], axis=0, weights=w[m])
    # no convergence: fall back to the lowest-SSE assignment seen
    _, labels, centers = best
    for j in range(len(centers)):
        m = labels == j
        if m.any():
            centers[j] = np.average(pts[m], axis=0, weights=w[m])
    return labels, centers


def cluster_kmeans_adaptive(
    fixes: Sequence[GpsFix], radius_m: float = KMEANS_RADIUS_M, seed: int = 0, max_iter: int = KMEANS_MAX_ITER
) -> SignificantPlaces:
    """Smallest k for which every fix lies strictly within ``radius_m`` of its centroid.

    Seeding is farthest-point from a seeded random starting fix; distances are
    haversine while means are taken in raw lat/lon.
    """
    params = {"radius_m": radius_m, "seed": seed, "radius": radius_m}
    if not fixes:
        return SignificantPlaces((), "kmeans", params)
    pts, w, inverse = _unique_points(fixes)
    n = len(pts)
    rng = np.random.default_rng(seed)
    seeds = [int(rng.integers(n))]
    mind = haversine_np(pts[:, 0], pts[:, 1], pts[seeds[0], 0], pts[seeds[0], 1])
    for k in range(1, n + 1):
        if k > len(seeds):
            nxt = int(np.argmax(mind))
            seeds.append(nxt)
            mind = np.minimum(mind, haversine_np(pts[:, 0], pts[:, 1], pts[nxt, 0], pts[nxt, 1]))
        labels, centers = _lloyd(pts, w, pts[seeds].copy(), max_iter)
        dist = haversine_np(pts[:, 0], pts[:, 1], centers[labels, 0], centers[labels, 1])
        if np.all(dist < radius_m):
            break
    used = sorted(set(labels.tolist()))
    relabel = {old: new for new, old in enumerate(used)}
    groups: list[list[GpsFix]] = [[] for _ in used]
    for f, u in zip(fixes, inverse):
        groups[relabel[int(labels[u])]].append(f)
    return _finish(groups, fixes, "kmeans", params)


def dbscan_labels(fixes: Sequence[GpsFix], eps_m: float = DBSCAN_EPS_M, min_samples: int = DBSCAN_MIN_SAMPLES) -> np.ndarray:
    """Classic DBSCAN labels (-1 is noise) with the haversine metric.

    Equivalent to a sequential pass over ``fixes`` in input order: clusters are
    numbered by their earliest core fix and a border fix belongs to the first
    cluster that reaches it.
    """
    if not fixes:
        return np.empty(0, dtype=int)
    pts, counts, inverse = _unique_points(fixes)
    n = len(pts)
    neighbours: list[np.ndarray] = []
    chunk = max(1, 4_000_000 // max(n, 1))
    for lo in range(0, n, chunk):
        d = haversine_np(pts[lo : lo + chunk, None, 0], pts[lo : lo + chunk, None, 1], pts[None, :, 0], pts[None, :, 1])
        neighbours.extend(np.flatnonzero(row <= eps_m) for row in d)
    core = np.array([counts[nb].sum() >= min_samples for nb in neighbours])
    labels = np.full(n, -1, dtype=int)
    visited = np.zeros(n, dtype=bool)
    cluster = -1
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        cluster += 1
        visited[i] = True
        labels[i] = cluster
        queue = list(neighbours[i])
        while queue:
            j = queue.pop()
            if labels[j] == -1:
                labels[j] = cluster
            if visited[j] or not core[j]:
                continue
            visited[j] = True
            queue.extend(neighbours[j])
    return labels[inverse]


def cluster_dbscan(
    fixes: Sequence[GpsFix], eps_m: float = DBSCAN_EPS_M, min_samples: int = DBSCAN_MIN_SAMPLES
) -> SignificantPlaces:
    """Density clusters become places; noise fixes belong to no place."""
    params = {"eps_m": eps_m, "min_samples": min_samples, "radius": eps_m}
    labels = dbscan_labels(fixes, eps_m, min_samples)
    n_clusters = int(labels.max()) + 1 if len(labels) else 0
    groups: list[list[GpsFix]] = [[] for _ in range(n_clusters)]
    for f, lab in zip(fixes, labels):
        if lab >= 0:
            groups[lab].append(f)
    return _finish(groups, fixes, "dbscan", params)


def cluster(fixes: Sequence[GpsFix], algorithm: str, **params) -> SignificantPlaces:
    if algorithm == "time_based":
        return cluster_time_based(fixes, **params)
    if algorithm == "kmeans":
        return cluster_kmeans_adaptive(fixes, **params)
    if algorithm == "dbscan":
        return cluster_dbscan(fixes, **params)
    raise ValueError(f"unknown clustering algorithm {algorithm!r}; expected one of {ALGORITHMS}")


# -- dwell and features -------------------------------------------------------


def assign_places(fixes: Sequence[GpsFix], places: SignificantPlaces) -> np.ndarray:
    """Nearest place id per fix when within the algorithm radius, else -1."""
    if not fixes or not places.places:
        return np.full(len(fixes), -1, dtype=int)
    c = places.centroids()
    lat = np.array([f.lat for f in fixes])
    lon = np.array([f.lon for f in fixes])
    d = haversine_np(lat[:, None], lon[:, None], c[None, :, 0], c[None, :, 1])
    nearest = np.argmin(d, axis=1)
    ok = d[np.arange(len(fixes)), nearest] <= places.radius
    ids = np.array([p.id for p in places.places])
    return np.where(ok, ids[nearest], -1)


def dwell_attribution(
    fixes: Sequence[GpsFix],
    places: SignificantPlaces,
    window_h: tuple[float, float] | None = None,
) -> dict[int, float]:
    """Seconds per place; an inter-fix interval counts iff both ends sit in the same place.

    With ``window_h`` only the part of each interval inside that local
    hour-of-day window is counted (intervals are assumed not to wrap midnight).
    """
    labels = assign_places(fixes, places)
    out: dict[int, float] = defaultdict(float)
    for i in range(1, len(fixes)):
        if labels[i] < 0 or labels[i] != labels[i - 1]:
            continue
        a, b = fixes[i - 1].t, fixes[i].t
        if window_h is None:
            out[int(labels[i])] += (b.instant_ms - a.instant_ms) / 1000.0
            continue
        start = a.local_ms_of_day
        end = start + (b.instant_ms - a.instant_ms)
        lo, hi = window_h[0] * MS_PER_HOUR, window_h[1] * MS_PER_HOUR
        overlap = min(end, hi) - max(start, lo)
        if overlap > 0:
            out[int(labels[i])] += overlap / 1000.0
    return dict(out)


def home_place(days: dict[int, Sequence[GpsFix]], places: SignificantPlaces) -> int | None:
    """Place that most often holds the largest share of a night's 0-6 am dwell."""
    winners: Counter[int] = Counter()
    night_total: Counter[int] = Counter()
    for fixes in days.values():
        dwell = dwell_attribution(fixes, places, HOME_WINDOW_H)
        dwell = {k: v for k, v in dwell.items() if v > 0}
        if not dwell:
            continue
        winners[max(dwell, key=lambda k: (dwell[k], -k))] += 1
        night_total.update(dwell)
    if not winners:
        return None
    return max(winners, key=lambda k: (winners[k], night_total[k], -k))


@dataclass(frozen=True)
class GpsFeatures:
    location_variance: float | None  # None: fewer than 2 fixes or no spread
    location_entropy: float
    normalized_location_entropy: float
    time_at_home: float
    total_distance: float

    def as_tuple(self) -> tuple[float | None, ...]:
        return (
            self.location_variance,
            self.location_entropy,
            self.normalized_location_entropy,
            self.time_at_home,
            self.total_distance,
        )


def entropy(weights: Iterable[float]) -> tuple[float, float]:
    """Shannon entropy (nats) of positive weights and its value normalised by ln(N)."""
    w = [x for x in weights if x > 0]
    total = sum(w)
    if not w or total <= 0:
        return 0.0, 0.0
    p = [x / total for x in w]
    h = -sum(q * math.log(q) for q in p if q > 0)  # q can underflow to 0
    h = max(h, 0.0)
    if len(w) <= 1:
        return h, 0.0
    return h, min(1.0, h / math.log(len(w)))


def gps_features(day_fixes: Sequence[GpsFix], places: SignificantPlaces, home: int | None = None) -> GpsFeatures:
    """Daily GPS features from that day's valid fixes and study-wide places."""
    lat = np.array([f.lat for f in day_fixes], dtype=float)
    lon = np.array([f.lon for f in day_fixes], dtype=float)
    variance = None
    if len(day_fixes) >= 2:
        spread = float(np.var(lat) + np.var(lon))
        if spread > 0:
            variance = math.log(spread)
    dwell = dwell_attribution(day_fixes, places)
    h, h_norm = entropy(dwell.values())
    total = sum(dwell.values())
    at_home = dwell.get(home, 0.0) / total if (home is not None and total > 0) else 0.0
    distance = 0.0
    if len(day_fixes) >= 2:
        distance = float(np.sum(haversine_np(lat[:-1], lon[:-1], lat[1:], lon[1:])))
    return GpsFeatures(variance, h, h_norm, at_home, distance)


def split_by_day(fixes: Sequence[GpsFix], study_start: Timestamp) -> dict[int, list[GpsFix]]:
    days: dict[int, list[GpsFix]] = defaultdict(list)
    for f in fixes:
        days[local_day_index(f.t, study_start)].append(f)
    return dict(days)


def subject_gps(
    fixes: Sequence[GpsFix], study_start: Timestamp, accuracy_cutoff: float, algorithm: str, **params
) -> tuple[SignificantPlaces, dict[int, GpsFeatures]]:
    """Cluster one subject's whole study, then compute features day by day.

    Days without any valid fix are absent from the returned mapping.
    """
    stationary, valid = preprocess(fixes, accuracy_cutoff)
    places = cluster(stationary, algorithm, **params)
    days = split_by_day(valid, study_start)
    home = home_place(days, places)
    return places, {d: gps_features(day, places, home) for d, day in sorted(days.items())}


def write_places(path: Path | str, places: SignificantPlaces) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["place_id", "lat", "lon", "dwell_s", "algorithm"])
        for p in places.places:
            writer.writerow([p.id, repr(p.centroid.lat), repr(p.centroid.lon), repr(p.dwell), places.algorithm])
