import itertools
import math
import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phqcast import geo
from phqcast.core import GpsFix
from phqcast.geo import GeoPoint, SignificantPlaces, PlaceCluster

from .conftest import BASE_LAT, BASE_LON, at, fix, moved, start

R = 6_371_000.0


def hav(a, b):
    """Reference haversine on (lat, lon) tuples."""
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    h = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(math.radians(b[1] - a[1]) / 2) ** 2
    return 2 * R * math.asin(min(1.0, math.sqrt(h)))


def stay(t0_s, minutes, east_m=0.0, north_m=0.0, jitter_m=0.0, step_s=60, rng=None):
    rng = rng or random.Random(0)
    n = int(minutes * 60 // step_s) + 1
    return [
        fix(t0_s + i * step_s, east_m + rng.uniform(-jitter_m, jitter_m), north_m + rng.uniform(-jitter_m, jitter_m))
        for i in range(n)
    ]


def places_of(centroids, radius=40.0):
    return SignificantPlaces(
        tuple(PlaceCluster(i, GeoPoint(*c), (fix(0),)) for i, c in enumerate(centroids)), "time_based", {"radius": radius}
    )


def planted_stays(seed):
    """A day of stays of random length at separated sites; returns fixes and the sites expected as places."""
    rng = random.Random(seed)
    sites = [(rng.uniform(-3000, 3000), rng.uniform(-3000, 3000)) for _ in range(6)]
    sites = [s for i, s in enumerate(sites) if all(math.dist(s, o) > 300 for o in sites[:i])]
    t = 0
    expected, fixes = [], []
    prev = None
    for _ in range(12):
        site = rng.choice([i for i in range(len(sites)) if i != prev])
        prev = site
        minutes = rng.choice([5, 10, 14, 15, 16, 30, 60])
        fixes += stay(t, minutes, *sites[site], jitter_m=2.0, rng=rng)
        t += minutes * 60 + 600
        if minutes >= 15 and sites[site] not in expected:
            expected.append(sites[site])
    return fixes, expected


def kmeans_instance(seed):
    """At most 30 fixes around a few centres, one of them a duplicate coordinate."""
    rng = random.Random(seed)
    n = rng.randint(1, 29)
    span = rng.choice([400, 1500, 4000, 10_000])
    centres = [(rng.uniform(0, span), rng.uniform(0, span)) for _ in range(rng.randint(1, 5))]
    fixes = []
    for i in range(n):
        cx, cy = rng.choice(centres)
        spread = rng.choice([0, 30, 300])
        fixes.append(fix(i, cx + rng.uniform(-spread, spread), cy + rng.uniform(-spread, spread)))
    if n > 3:
        fixes.append(fixes[1])
    return fixes


def separated_sites(seed):
    """Fixes within 150 m of sites more than 2.5 km apart; returns fixes and the site count."""
    rng = random.Random(100 + seed)
    n_sites = rng.randint(1, 6)
    sites = []
    while len(sites) < n_sites:
        s = (rng.uniform(0, 20_000), rng.uniform(0, 20_000))
        if all(math.dist(s, o) > 2500 for o in sites):
            sites.append(s)
    fixes = []
    for i in range(rng.randint(n_sites, 30)):
        cx, cy = sites[i % n_sites]
        fixes.append(fix(i, cx + rng.uniform(-150, 150), cy + rng.uniform(-150, 150)))
    return fixes, n_sites


def far_clique(points, radius=500.0):
    """Largest set of points pairwise >= 2 * radius apart.

    No two of them fit in one cluster of that radius, so this is a lower bound on any admissible k.
    """
    far = nx.Graph()
    far.add_nodes_from(range(len(points)))
    far.add_edges_from(
        (i, j) for i, j in itertools.combinations(range(len(points)), 2) if hav(points[i], points[j]) >= 2 * radius
    )
    return max(len(c) for c in nx.find_cliques(far))


def dbscan_instance(seed):
    """At most 50 fixes in a few blobs with repeated coordinates; returns fixes, eps and min_samples."""
    rng = random.Random(seed)
    n = rng.randint(1, 50)
    centres = [(rng.uniform(0, 300), rng.uniform(0, 300)) for _ in range(rng.randint(1, 4))]
    fixes = []
    for i in range(n):
        if fixes and rng.random() < 0.1:
            fixes.append(fixes[rng.randrange(len(fixes))])
            continue
        cx, cy = rng.choice(centres)
        spread = rng.choice([5, 25, 60])
        fixes.append(fix(i, cx + rng.uniform(-spread, spread), cy + rng.uniform(-spread, spread)))
    eps, min_samples = rng.choice([(30.0, 3), (20.0, 2), (30.0, 5)])
    return fixes, eps, min_samples


def reference_k(points, radius=500.0, seed=0, max_iter=100):
    """Plain-python search over k: first k whose Lloyd clustering meets the radius condition."""
    uniq, weight = [], []
    for p in points:
        if p in uniq:
            weight[uniq.index(p)] += 1
        else:
            uniq.append(p)
            weight.append(1)
    n = len(uniq)
    order = [int(np.random.default_rng(seed).integers(n))]
    while len(order) < n:
        order.append(max(range(n), key=lambda i: (min(hav(uniq[i], uniq[j]) for j in order), -i)))
    for k in range(1, n + 1):
        centers = [uniq[i] for i in order[:k]]
        labels = None
        history = []
        for _ in range(max_iter):
            new = [min(range(k), key=lambda j: (hav(p, centers[j]), j)) for p in uniq]
            history.append((sum(w * hav(p, centers[c]) ** 2 for p, w, c in zip(uniq, weight, new)), new))
            if new == labels:
                break
            labels = new
            for j in range(k):
                members = [(p, w) for p, w, c in zip(uniq, weight, labels) if c == j]
                if members:
                    tw = sum(w for _, w in members)
                    centers[j] = (sum(p[0] * w for p, w in members) / tw, sum(p[1] * w for p, w in members) / tw)
        else:
            labels = min(history, key=lambda h: h[0])[1]
            for j in range(k):
                members = [(p, w) for p, w, c in zip(uniq, weight, labels) if c == j]
                if members:
                    tw = sum(w for _, w in members)
                    centers[j] = (sum(p[0] * w for p, w in members) / tw, sum(p[1] * w for p, w in members) / tw)
        if all(hav(p, centers[c]) < radius for p, c in zip(uniq, labels)):
            return len(set(labels))
    return n



latitudes = st.floats(-89.0, 89.0)
longitudes = st.floats(-179.0, 179.0)


class TestHaversine:
    def test_identity(self):
        p = GeoPoint(49.5, 11.0)
        assert geo.haversine(p, p) == 0.0

    def test_one_degree_on_equator(self):
        assert geo.haversine(GeoPoint(0, 0), GeoPoint(0, 1)) == pytest.approx(111_194.9, abs=0.1)
        assert geo.haversine(GeoPoint(0, 0), GeoPoint(0, 1)) == pytest.approx(math.pi * R / 180, abs=1e-6)

    def test_half_circumference(self):
        assert geo.haversine(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(20_015_086.8, abs=1.0)

    @given(latitudes, longitudes, latitudes, longitudes)
    def test_symmetric_and_non_negative(self, la1, lo1, la2, lo2):
        a, b = GeoPoint(la1, lo1), GeoPoint(la2, lo2)
        d = geo.haversine(a, b)
        assert d >= 0.0
        assert d == pytest.approx(geo.haversine(b, a), abs=1e-6)
        assert d == pytest.approx(hav((la1, lo1), (la2, lo2)), abs=1e-6)

    @given(latitudes, longitudes, latitudes, longitudes, latitudes, longitudes)
    def test_triangle_inequality(self, a1, a2, b1, b2, c1, c2):
        a, b, c = GeoPoint(a1, a2), GeoPoint(b1, b2), GeoPoint(c1, c2)
        assert geo.haversine(a, c) <= geo.haversine(a, b) + geo.haversine(b, c) + 1e-6

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(0)
        lat = rng.uniform(-80, 80, (50, 2))
        lon = rng.uniform(-170, 170, (50, 2))
        d = geo.haversine_np(lat[:, 0], lon[:, 0], lat[:, 1], lon[:, 1])
        ref = [hav((lat[i, 0], lon[i, 0]), (lat[i, 1], lon[i, 1])) for i in range(50)]
        np.testing.assert_allclose(d, ref, rtol=1e-12)


class TestAccuracyCutoff:
    @staticmethod
    def oracle(values, q=0.8):
        v = sorted(values)
        pos = q * (len(v) - 1)
        lo = math.floor(pos)
        hi = min(lo + 1, len(v) - 1)
        return v[lo] + (v[hi] - v[lo]) * (pos - lo)

    def test_constant(self):
        assert geo.cohort_accuracy_cutoff([fix(i, accuracy=10.0) for i in range(7)]) == 10.0

    def test_one_to_hundred(self):
        assert geo.cohort_accuracy_cutoff(np.arange(1, 101, dtype=float)) == pytest.approx(80.2, abs=1e-12)

    def test_two_values(self):
        assert geo.cohort_accuracy_cutoff(np.array([5.0, 15.0])) == pytest.approx(13.0, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            geo.cohort_accuracy_cutoff([])

    @given(st.lists(st.floats(0.0, 1e4), min_size=1, max_size=60))
    def test_matches_oracle(self, values):
        assert geo.cohort_accuracy_cutoff(np.array(values)) == pytest.approx(self.oracle(values), rel=1e-12, abs=1e-9)


class TestPreprocess:
    def test_negative_speed_excluded(self):
        stationary, valid = geo.preprocess([fix(0, speed=-1.0)], 10.0)
        assert stationary == [] and valid == []

    def test_speed_boundary(self):
        stationary, valid = geo.preprocess([fix(0, speed=1.4), fix(1, speed=1.4000001)], 10.0)
        assert [f.speed for f in stationary] == [1.4]
        assert len(valid) == 2

    def test_ten_fix_fixture(self):
        fixes = [fix(i, accuracy=5.0) for i in range(5)]  # stationary
        fixes += [fix(10, speed=3.0), fix(11, speed=8.0)]  # moving
        fixes += [fix(20 + i, accuracy=50.0) for i in range(3)]  # above cutoff
        stationary, valid = geo.preprocess(fixes, 12.0)
        assert len(valid) == 7
        assert len(stationary) == 5

    def test_order_preserved(self):
        fixes = [fix(t, speed=s) for t, s in [(5, 0.1), (1, 2.0), (3, 0.0)]]
        stationary, valid = geo.preprocess(fixes, 10.0)
        assert [f.t for f in valid] == [f.t for f in fixes]
        assert [f.t for f in stationary] == [fixes[0].t, fixes[2].t]

    def test_empty(self):
        assert geo.preprocess([], 10.0) == ([], [])


class TestTimeBased:
    def test_single_twenty_minute_stay(self):
        places = geo.cluster_time_based(stay(0, 20, jitter_m=10.0))
        assert len(places) == 1

    def test_ten_minute_stay_is_not_significant(self):
        assert len(geo.cluster_time_based(stay(0, 10, jitter_m=5.0))) == 0

    def test_exactly_fifteen_minutes_counts(self):
        assert len(geo.cluster_time_based(stay(0, 15))) == 1

    def test_near_duplicates_merge(self):
        fixes = stay(0, 20) + stay(3000, 20, east_m=500) + stay(6000, 20, east_m=8.0)
        places = geo.cluster_time_based(fixes)
        assert len(places) == 2
        assert len(places.places[0].member_fixes) == 42

    def test_revisit_beyond_merge_distance_is_new_place(self):
        fixes = stay(0, 20) + stay(3000, 20, east_m=500) + stay(6000, 20, east_m=20.0)
        assert len(geo.cluster_time_based(fixes)) == 3

    def test_empty(self):
        assert len(geo.cluster_time_based([])) == 0

    @pytest.mark.parametrize("seed", range(30))
    def test_finds_planted_stays(self, seed):
        fixes, expected = planted_stays(seed)
        places = geo.cluster_time_based(fixes)
        assert len(places) == len(expected)
        for p, (east, north) in zip(places.places, expected):
            assert hav((p.centroid.lat, p.centroid.lon), moved(BASE_LAT, BASE_LON, east, north)) < 5.0


class TestKMeans:
    def test_compact_fixes_give_one_place(self):
        rng = random.Random(1)
        fixes = [fix(i, rng.uniform(-50, 50), rng.uniform(-50, 50)) for i in range(40)]
        assert len(geo.cluster_kmeans_adaptive(fixes)) == 1

    def test_two_sites_five_km_apart(self):
        fixes = stay(0, 10, jitter_m=5) + stay(3600, 10, east_m=5000, jitter_m=5)
        places = geo.cluster_kmeans_adaptive(fixes)
        assert len(places) == 2
        # brute force: a single centroid violates the radius
        lat = np.mean([f.lat for f in fixes])
        lon = np.mean([f.lon for f in fixes])
        assert max(hav((lat, lon), (f.lat, f.lon)) for f in fixes) >= 500

    def test_single_fix(self):
        f = fix(0)
        (p,) = geo.cluster_kmeans_adaptive([f]).places
        assert (p.centroid.lat, p.centroid.lon) == (f.lat, f.lon)

    def test_empty(self):
        assert len(geo.cluster_kmeans_adaptive([])) == 0

    def test_deterministic(self):
        rng = random.Random(4)
        fixes = [fix(i, rng.uniform(-3000, 3000), rng.uniform(-3000, 3000)) for i in range(30)]
        a = geo.cluster_kmeans_adaptive(fixes)
        b = geo.cluster_kmeans_adaptive(list(fixes))
        np.testing.assert_array_equal(a.centroids(), b.centroids())

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_search_over_k(self, seed):
        fixes = kmeans_instance(seed)
        places = geo.cluster_kmeans_adaptive(fixes)
        assert len(places) == reference_k([(f.lat, f.lon) for f in fixes])
        for p in places.places:
            for f in p.member_fixes:
                assert geo.haversine(p.centroid, f) < 500.0

    @pytest.mark.parametrize("seed", range(20))
    def test_minimal_on_separated_sites(self, seed):
        fixes, n_sites = separated_sites(seed)
        assert len(geo.cluster_kmeans_adaptive(fixes)) == far_clique([(f.lat, f.lon) for f in fixes]) == n_sites


def reference_dbscan(points, eps, min_samples):
    """Labels from density-reachability: components of the core graph, borders to the lowest cluster."""
    n = len(points)
    near = [[j for j in range(n) if hav(points[i], points[j]) <= eps] for i in range(n)]
    core = [len(near[i]) >= min_samples for i in range(n)]
    g = nx.Graph()
    g.add_nodes_from(i for i in range(n) if core[i])
    g.add_edges_from((i, j) for i in range(n) if core[i] for j in near[i] if core[j])
    comps = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: c[0])
    labels = [-1] * n
    for cid, comp in enumerate(comps):
        for i in comp:
            labels[i] = cid
    for i in range(n):
        if not core[i]:
            reach = [labels[j] for j in near[i] if core[j]]
            labels[i] = min(reach) if reach else -1
    return labels


class TestDbscan:
    def test_coincident_fixes(self):
        labels = geo.dbscan_labels([fix(i) for i in range(5)])
        assert labels.tolist() == [0] * 5

    def test_isolated_fixes_are_noise(self):
        places = geo.cluster_dbscan([fix(0), fix(1, east_m=1000)])
        assert len(places) == 0
        assert geo.dbscan_labels([fix(0), fix(1, east_m=1000)]).tolist() == [-1, -1]

    def test_two_blobs_and_scatter(self):
        rng = random.Random(7)
        fixes = []
        for cx in (0.0, 500.0):
            for i in range(10):
                r, a = rng.uniform(0, 10), rng.uniform(0, 2 * math.pi)
                fixes.append(fix(len(fixes), cx + r * math.cos(a), r * math.sin(a)))
        fixes += [fix(100 + i, e, n) for i, (e, n) in enumerate([(250, 200), (-300, 0), (800, -400), (250, -250)])]
        labels = geo.dbscan_labels(fixes)
        assert len(set(labels.tolist()) - {-1}) == 2
        assert int(np.sum(labels == -1)) == 4
        assert len(geo.cluster_dbscan(fixes)) == 2

    def test_border_goes_to_earliest_cluster(self):
        # two chains of cores 50 m apart; the fix between them reaches one core of each
        # but has only 3 neighbours itself, so it is a border fix
        fixes = [fix(i, -10.0 * i) for i in range(4)] + [fix(10 + i, 50.0 + 10.0 * i) for i in range(4)] + [fix(20, 25.0)]
        labels = geo.dbscan_labels(fixes, 30.0, 4).tolist()
        assert labels == [0, 0, 0, 0, 1, 1, 1, 1, 0]
        assert labels == reference_dbscan([(f.lat, f.lon) for f in fixes], 30.0, 4)

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_density_reachability(self, seed):
        fixes, eps, min_samples = dbscan_instance(seed)
        got = geo.dbscan_labels(fixes, eps, min_samples).tolist()
        assert got == reference_dbscan([(f.lat, f.lon) for f in fixes], eps, min_samples)


class TestDwell:
    def test_three_fixes_in_one_place(self):
        fixes = [fix(0), fix(300), fix(600)]
        assert geo.dwell_attribution(fixes, places_of([(fixes[0].lat, fixes[0].lon)])) == {0: 600.0}

    def test_endpoints_in_different_places(self):
        a, b = fix(0), fix(300, east_m=1000)
        places = places_of([(a.lat, a.lon), (b.lat, b.lon)])
        assert geo.dwell_attribution([a, b], places) == {}

    def test_transition_mid_day(self):
        fixes = [fix(t) for t in range(0, 3601, 600)] + [fix(4000, east_m=2000)]
        fixes += [fix(t, east_m=2000) for t in range(4600, 9001, 600)]
        places = places_of([(fixes[0].lat, fixes[0].lon), (fixes[-1].lat, fixes[-1].lon)])
        # A: 0..3600; the 3600 -> 4000 leg crosses; B: 4000..8800
        assert geo.dwell_attribution(fixes, places) == {0: 3600.0, 1: 4800.0}

    def test_fix_outside_radius_breaks_dwell(self):
        fixes = [fix(0), fix(300, east_m=45.0), fix(600)]
        assert geo.dwell_attribution(fixes, places_of([(fixes[0].lat, fixes[0].lon)])) == {}

    def test_night_window(self):
        fixes = [GpsFix(at(h), BASE_LAT, BASE_LON, 5.0, 0.0) for h in (5.0, 7.0)]
        assert geo.dwell_attribution(fixes, places_of([(BASE_LAT, BASE_LON)]), (0.0, 6.0)) == {0: 3600.0}


class TestGpsFeatures:
    def two_places(self):
        a = (BASE_LAT, BASE_LON)
        b = moved(BASE_LAT, BASE_LON, east_m=3000)
        return a, b, places_of([a, b])

    def test_one_place_all_day(self):
        fixes = [fix(t) for t in range(0, 7200, 300)]
        feats = geo.gps_features(fixes, places_of([(BASE_LAT, BASE_LON)]), home=0)
        assert feats.location_entropy == 0.0
        assert feats.normalized_location_entropy == 0.0
        assert feats.time_at_home == 1.0
        assert feats.total_distance == 0.0
        assert feats.location_variance is None  # no spread

    def test_equal_dwell_in_two_places(self):
        fixes = [fix(t) for t in range(0, 3601, 600)] + [fix(t, east_m=3000) for t in range(7200, 10801, 600)]
        feats = geo.gps_features(fixes, self.two_places()[2], home=1)
        assert feats.location_entropy == pytest.approx(math.log(2), abs=1e-12)
        assert feats.normalized_location_entropy == pytest.approx(1.0, abs=1e-12)
        assert feats.time_at_home == pytest.approx(0.5)

    def test_three_places(self):
        sites = [(0, 0), (3000, 0), (0, 3000)]
        fixes, t = [], 0
        for (e, n), minutes in zip(sites, (30, 60, 90)):
            fixes += [fix(t + s, e, n) for s in range(0, minutes * 60 + 1, 300)]
            t += minutes * 60 + 1200
        places = places_of([moved(BASE_LAT, BASE_LON, e, n) for e, n in sites])
        feats = geo.gps_features(fixes, places)
        p = np.array([1, 2, 3]) / 6
        assert feats.location_entropy == pytest.approx(float(-(p * np.log(p)).sum()), abs=1e-12)
        assert feats.location_entropy == pytest.approx(1.0114, abs=1e-4)
        assert feats.time_at_home == 0.0

    def test_variance_and_distance(self):
        rng = random.Random(2)
        fixes = [fix(i * 60, rng.uniform(-500, 500), rng.uniform(-500, 500)) for i in range(20)]
        feats = geo.gps_features(fixes, places_of([]))
        lat = [f.lat for f in fixes]
        lon = [f.lon for f in fixes]
        var = sum((x - sum(lat) / 20) ** 2 for x in lat) / 20 + sum((x - sum(lon) / 20) ** 2 for x in lon) / 20
        assert feats.location_variance == pytest.approx(math.log(var), rel=1e-9)
        ref = sum(hav((a.lat, a.lon), (b.lat, b.lon)) for a, b in zip(fixes, fixes[1:]))
        assert feats.total_distance == pytest.approx(ref, rel=1e-12)

    def test_single_fix_has_no_variance(self):
        assert geo.gps_features([fix(0)], places_of([])).location_variance is None

    def test_distance_invariant_to_stationary_padding(self):
        rng = random.Random(5)
        fixes = [fix(i * 60, rng.uniform(-500, 500), rng.uniform(-500, 500)) for i in range(10)]
        last = fixes[-1]
        padded = fixes + [GpsFix(last.t.shifted(k * 1000), last.lat, last.lon, 5.0, 0.0) for k in range(1, 6)]
        assert geo.gps_features(padded, places_of([])).total_distance == geo.gps_features(fixes, places_of([])).total_distance


class TestEntropy:
    @given(st.lists(st.floats(0.0, 1e6), max_size=30))
    def test_bounds(self, weights):
        h, hn = geo.entropy(weights)
        n = sum(1 for w in weights if w > 0)
        assert h >= 0.0
        assert 0.0 <= hn <= 1.0
        if n >= 1:
            assert h <= math.log(n) + 1e-12

    @given(st.integers(2, 50), st.floats(1e-3, 1e6))
    def test_uniform_is_one(self, n, w):
        h, hn = geo.entropy([w] * n)
        assert h == pytest.approx(math.log(n), abs=1e-12)
        assert hn == pytest.approx(1.0, abs=1e-12)

    def test_degenerate(self):
        assert geo.entropy([]) == (0.0, 0.0)
        assert geo.entropy([5.0]) == (0.0, 0.0)
        assert geo.entropy([0.0, 0.0]) == (0.0, 0.0)


class TestHome:
    def test_most_frequent_night_winner(self):
        a = (BASE_LAT, BASE_LON)
        b = moved(BASE_LAT, BASE_LON, east_m=3000)
        places = places_of([a, b])

        def night(day, site):
            return [GpsFix(at(h, day), *site, 5.0, 0.0) for h in (0.5, 2.0, 5.5)]

        days = {1: night(1, a), 2: night(2, b), 3: night(3, a)}
        assert geo.home_place(days, places) == 0
        assert geo.home_place({2: night(2, b)}, places) == 1
        assert geo.home_place({}, places) is None


class TestSubjectGps:
    def test_days_without_fixes_absent(self):
        fixes = [fix(t, day=1) for t in range(0, 3600, 300)] + [fix(t, day=3) for t in range(0, 3600, 300)]
        places, days = geo.subject_gps(fixes, start(), 10.0, "dbscan")
        assert sorted(days) == [1, 3]
        assert len(places) == 1

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError, match="unknown clustering"):
            geo.cluster([fix(0)], "optics")

    @settings(max_examples=20, deadline=None)
    @given(st.sampled_from(geo.ALGORITHMS), st.integers(0, 2**16))
    def test_clustering_is_deterministic(self, algorithm, seed):
        rng = random.Random(seed)
        fixes = []
        for k in range(4):
            e, n = rng.uniform(-2000, 2000), rng.uniform(-2000, 2000)
            fixes += stay(k * 5000, 20, e, n, jitter_m=3.0, rng=rng)
        a = geo.cluster(fixes, algorithm)
        b = geo.cluster(fixes, algorithm)
        np.testing.assert_array_equal(a.centroids(), b.centroids())
        assert [p.dwell for p in a.places] == [p.dwell for p in b.places]


def test_write_places(tmp_path):
    places = geo.cluster_time_based(stay(0, 20))
    geo.write_places(tmp_path / "p.csv", places)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "place_id,lat,lon,dwell_s,algorithm"
    assert lines[1].startswith("0,") and lines[1].endswith(",1200.0,time_based")

