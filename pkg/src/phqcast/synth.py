"""Synthetic cohorts with exact ground truth.

Each subject gets a weekly latent depression level (a bounded random walk)
that drives the generated behaviour: later and longer sleep, fewer distinct
apps and more night-time app use, fewer places visited, fewer calls. Raw
streams are written in the ingestion schemas; the expected daily features
are computed here from the generator's own plan, by code that shares nothing
with the feature extractor, so :func:`verify_pipeline` is a real oracle.

The trajectory layout is chosen so that all three clustering algorithms with
their default parameters recover the planned places exactly: places are at
least 2 km apart, stays last at least 30 minutes, stay fixes sit on a 2 m
lattice around the place centre and each trip is a single fast-moving fix at
the midpoint of the two places.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import SubjectId
from .features import FEATURE_NAMES, DailyFeatures, read_features, write_features

DAY_S = 86_400
R_EARTH = 6_371_000.0
M_PER_DEG = math.pi * R_EARTH / 180.0
STREAM_FILES = ("calls", "usage", "apps", "locks", "gps", "phq")
OFFSETS_MIN = (60, 120, 0, -300, 330, 540)
GOOD_ACCURACY = ((4.0, 0.2), (6.0, 0.2), (8.0, 0.2), (10.0, 0.3), (12.0, 0.1))
COUNT_FEATURES = frozenset(
    {"call_freq", "nonwork_call_freq", "missed_calls", "n_contacts", "usage_freq", "n_apps", "n_midnight_apps"}
)


@dataclass
class SynthConfig:
    n_subjects: int = 48
    n_weeks: int = 8
    seed: int = 7
    noise: float = 1.0
    effects: dict[str, float] = field(
        default_factory=lambda: {"activity": 1.0, "gps": 0.7, "usage": 0.35, "calls": 0.4}
    )
    walk_sd: float = 0.5
    gps_interval_s: int = 300
    pattern: str = "default"  # or "home_work": home at night plus one 3 h work stay per day
    start_date: str = "2021-03-01"

    def __post_init__(self) -> None:
        if self.n_subjects < 10:
            raise ValueError("need at least 10 subjects for 10-fold cross-validation")
        if self.n_weeks < 1:
            raise ValueError("need at least one week")
        if not all(math.isfinite(v) for v in self.effects.values()):
            raise ValueError("effect sizes must be finite")
        if self.pattern not in ("default", "home_work"):
            raise ValueError(f"unknown pattern {self.pattern!r}")

    def effect(self, group: str) -> float:
        return float(self.effects.get(group, 0.0))


class _Draw:
    """Random draws scaled by the noise level; with noise 0 every draw is its expectation."""

    def __init__(self, rng: np.random.Generator, noise: float):
        self.rng = rng
        self.noise = noise

    def normal(self, mean: float, sd: float) -> float:
        return mean + (self.noise * sd * self.rng.normal() if self.noise else 0.0)

    def uniform(self, lo: float, hi: float) -> float:
        return self.rng.uniform(lo, hi) if self.noise else (lo + hi) / 2

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi)."""
        return int(self.rng.integers(lo, hi)) if self.noise else lo

    def poisson(self, lam: float) -> int:
        lam = max(lam, 0.0)
        return int(self.rng.poisson(lam)) if self.noise else int(round(lam))

    def chance(self, p: float) -> bool:
        return bool(self.rng.random() < p) if self.noise else p >= 0.5

    def rare(self, p: float) -> bool:
        """Corruption events; these vanish entirely without noise."""
        return bool(self.noise and self.rng.random() < p * min(self.noise, 1.0))

    def pick(self, options):
        return options[int(self.rng.integers(len(options)))] if self.noise else options[0]


def _token(kind: str, subject: str, i: int) -> str:
    return hashlib.sha1(f"{kind}:{subject}:{i}".encode()).hexdigest()[:12]


def _dist(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    # written independently of geo.haversine on purpose
    p1, p2 = math.radians(lat1), math.radians(lat2)
    a = math.sin((p2 - p1) / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2
    return 2 * R_EARTH * math.asin(min(1.0, math.sqrt(a)))


def _offset(lat: float, lon: float, east_m: float, north_m: float) -> tuple[float, float]:
    return lat + north_m / M_PER_DEG, lon + east_m / (M_PER_DEG * math.cos(lat * math.pi / 180))


@dataclass
class SubjectPlan:
    sid: str
    offset_min: int
    places: list[tuple[float, float]]
    latent: list[float]  # per week
    scores: list[int]  # emitted PHQ per week
    calls: list[tuple[int, str, int, str]] = field(default_factory=list)  # (t_s, direction, dur_s, contact)
    usage: list[tuple[int, int]] = field(default_factory=list)
    apps: list[tuple[int, str]] = field(default_factory=list)
    locks: list[tuple[int, int]] = field(default_factory=list)
    gps: list[tuple[int, float, float, float, float, int]] = field(default_factory=list)  # (t_s, lat, lon, acc, speed, label)


@dataclass
class GroundTruth:
    features: list[DailyFeatures]
    phq: list[tuple[str, int, int, float, int]]  # (subject, week, day_index, latent, score)
    counts: dict[str, dict[str, int]]
    accuracy_cutoff: float


def _layout(draw: _Draw, n_places: int) -> list[tuple[float, float]]:
    """Places >= 2 km apart whose pairwise midpoints are >= 800 m from every place."""
    home = (49.59 + draw.uniform(-0.05, 0.05), 11.0 + draw.uniform(-0.08, 0.08))
    if not draw.noise:
        return [_offset(*home, 3000.0 * math.cos(k), 3000.0 * math.sin(k) + 2500.0 * k) for k in range(n_places)]
    while True:
        places = [home]
        while len(places) < n_places:
            cand = _offset(*home, draw.uniform(-9000, 9000), draw.uniform(-9000, 9000))
            if all(_dist(*cand, *p) >= 2000.0 for p in places):
                places.append(cand)
        mids = [((a[0] + b[0]) / 2, (a[1] + b[1]) / 2) for i, a in enumerate(places) for b in places[i + 1 :]]
        if all(_dist(*m, *p) >= 800.0 for m in mids for p in places):
            return places


def _plan_subject(cfg: SynthConfig, idx: int, rng: np.random.Generator) -> SubjectPlan:
    draw = _Draw(rng, cfg.noise)
    sid = f"S{idx + 1:02d}"
    layout_draw = draw if cfg.noise else _Draw(np.random.default_rng(cfg.seed), 0.0)
    places = _layout(layout_draw, 5)
    offset = OFFSETS_MIN[idx % len(OFFSETS_MIN)]

    level = float(rng.uniform(1.0, 25.0))
    latent = []
    for _ in range(cfg.n_weeks + 1):
        latent.append(level)
        level = min(27.0, max(0.0, level + float(rng.normal(0.0, cfg.walk_sd))))
    latent = latent[: cfg.n_weeks]
    scores = [int(min(27, max(0, round(v)))) for v in latent]
    plan = SubjectPlan(sid, offset, places, latent, scores)

    apps = [_token("app", sid, j) for j in range(30)]
    contacts = [_token("contact", sid, j) for j in range(8)]
    e_act, e_gps, e_use, e_call = (cfg.effect(g) for g in ("activity", "gps", "usage", "calls"))
    n_days = 7 * cfg.n_weeks
    end_s = n_days * DAY_S
    z = [(v - 13.5) / 7.0 for v in latent]

    # bedtime of the night before each day, hours from that day's midnight (negative: evening before)
    bed = [0.0] * (n_days + 2)
    for d in range(1, n_days + 2):
        zd = z[(min(d, n_days) - 1) // 7]
        bed[d] = min(1.9, max(-3.5, draw.normal(-1.0 + 1.1 * e_act * zd, 0.5)))
    phase = draw.integer(0, cfg.gps_interval_s)

    for d in range(1, n_days + 1):
        zd = z[(d - 1) // 7]
        base = (d - 1) * DAY_S
        weekday = (d - 1) % 7 < 5

        # -- apps: bedtime use, wake-up use, day use, night use
        if d > 1 or bed[d] >= 0:
            plan.apps.append((base + int(bed[d] * 3600), draw.pick(apps)))
        wake_h = min(11.5, max(5.2, draw.normal(7.0 + 1.2 * e_act * zd, 0.5)))
        wake = base + int(wake_h * 3600)
        plan.apps.append((wake, draw.pick(apps)))
        day_end = base + DAY_S + int(min(bed[d + 1], 0.0) * 3600) - 600
        n_distinct = int(min(25, max(2, round(draw.normal(12.0 - 3.5 * e_act * zd, 1.5)))))
        subset = [apps[(j + draw.integer(0, 30)) % 30] for j in range(n_distinct)]
        subset = list(dict.fromkeys(subset))
        n_uses = max(len(subset), draw.poisson(25))
        for j in range(n_uses):
            app = subset[j] if j < len(subset) else draw.pick(subset)
            plan.apps.append((draw.integer(wake + 600, max(wake + 601, day_end)), app))
        for _ in range(draw.poisson(0.4 + 1.6 * e_act * zd)):
            plan.apps.append((base + draw.integer(int(2.05 * 3600), int(4.95 * 3600)), draw.pick(apps)))

        # -- locks: a few daytime locks, sometimes one overnight lock into the next day
        for _ in range(draw.poisson(4)):
            start = draw.integer(wake, base + DAY_S - 3600)
            length = int(max(60.0, draw.uniform(5, 60) * 60 * (1.0 + 0.4 * e_act * zd)))
            plan.locks.append((start, min(start + length, base + DAY_S)))
        if d < n_days and draw.chance(0.5):
            night_start = base + DAY_S + int(bed[d + 1] * 3600) + 300
            plan.locks.append((night_start, max(night_start, d * DAY_S + int(6.0 * 3600))))

        # -- usage sessions, the late ones may run past midnight
        for _ in range(draw.poisson(30.0 + 8.0 * e_use * zd)):
            start = draw.integer(wake, base + DAY_S - 60)
            length = int(5 + draw.uniform(0, 180) * (1.0 + 0.3 * e_use * zd))
            plan.usage.append((start, min(start + max(length, 0), end_s)))

        # -- calls
        for _ in range(draw.poisson(2.5 - 1.0 * e_call * zd)):
            t = base + draw.integer(7 * 3600, 23 * 3600)
            plan.calls.append((t, draw.pick(("incoming", "outgoing")), int(draw.uniform(0, 400)), draw.pick(contacts)))
        for _ in range(draw.poisson(0.4 + 0.4 * e_call * zd)):
            plan.calls.append((base + draw.integer(7 * 3600, 23 * 3600), "missed", 0, draw.pick(contacts)))

        # -- gps schedule as (place, n_slots), one midpoint slot per trip
        slot = cfg.gps_interval_s
        n_slots = (DAY_S - phase - 1) // slot + 1
        stays: list[tuple[int, int]] = []
        if cfg.pattern == "home_work":
            stays = [(0, 10 * 3600 // slot), (1, 3 * 3600 // slot)]
        else:
            leave = int(draw.normal(8.0 + 0.5 * e_gps * zd, 0.5) * 3600 // slot)
            stays = [(0, max(leave, 1))]
            if weekday and draw.chance(0.85 - 0.35 * e_gps * zd):
                stays.append((1, int(draw.uniform(5, 9) * 3600 // slot)))
            for _ in range(draw.poisson(1.5 - 1.0 * e_gps * zd)):
                choices = [p for p in (2, 3, 4) if p != stays[-1][0]]
                stays.append((draw.pick(choices), int(draw.uniform(0.75, 2.5) * 3600 // slot)))
        # late stays that would not end by ~23:00 are dropped whole, never cut short
        while len(stays) > 1 and sum(n for _, n in stays) + len(stays) > n_slots - 12:
            stays.pop()
        labels: list[int] = []
        for k, (place, length) in enumerate(stays):
            if k > 0:
                labels.append(-1 - stays[k - 1][0] * 10 - place * 100)  # trip marker
            labels.extend([place] * length)
        if stays[-1][0] != 0:
            labels.append(-1 - stays[-1][0] * 10)
        labels.extend([0] * (n_slots - len(labels)))
        gap = None
        if draw.rare(0.15):
            g0 = draw.integer(int(3600 // slot), int(3 * 3600 // slot))
            gap = (g0, g0 + draw.integer(6, 24))
        for s, lab in enumerate(labels):
            if gap and gap[0] <= s < gap[1] and lab == 0:
                continue
            t = base + phase + s * slot
            east, north = 2.0 * draw.integer(-1, 2), 2.0 * draw.integer(-1, 2)
            if lab >= 0:
                lat, lon = _offset(*places[lab], east, north)
                speed, label = round(draw.uniform(0.0, 0.8), 1), lab
            else:
                frm, to = (-lab - 1) // 10 % 10, (-lab - 1) // 100
                a, b = places[frm], places[to]
                lat, lon = _offset((a[0] + b[0]) / 2, (a[1] + b[1]) / 2, east, north)
                speed, label = round(draw.uniform(4.0, 12.0), 1), -1
            acc = 8.0
            if draw.noise:
                r, cum = rng.random(), 0.0
                for value, p in GOOD_ACCURACY:
                    cum += p
                    if r < cum:
                        acc = value
                        break
            if draw.rare(0.03):
                angle = draw.uniform(0, 2 * math.pi)
                dist = draw.uniform(300, 1500)
                lat, lon = _offset(lat, lon, dist * math.cos(angle), dist * math.sin(angle))
                acc, label = float(draw.integer(60, 400)), -2
            elif draw.rare(0.01):
                speed, label = -1.0, -3
            plan.gps.append((t, lat, lon, acc, speed, label))

    plan.apps.sort()
    plan.calls.sort()
    plan.usage.sort()
    plan.locks.sort()
    plan.gps.sort()
    return plan


# -- ground truth from the plan --------------------------------------------------


def _percentile80(values: list[float]) -> float:
    v = sorted(values)
    pos = 0.8 * (len(v) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


def _day_of(t_s: int) -> int:
    return t_s // DAY_S + 1


def _split_days(intervals: list[tuple[int, int]]) -> dict[int, list[int]]:
    """Day -> list of piece lengths (s) for intervals cut at midnight."""
    out: dict[int, list[int]] = {}
    for a, b in intervals:
        while True:
            d = _day_of(a)
            cut = d * DAY_S
            piece_end = min(b, cut)
            out.setdefault(d, []).append(piece_end - a)
            if b <= cut:
                break
            a = cut
    return out


def _entropy(weights: list[float]) -> tuple[float, float]:
    pos = [w for w in weights if w > 0]
    if not pos:
        return 0.0, 0.0
    total = float(sum(pos))
    h = 0.0
    for w in pos:
        h -= (w / total) * math.log(w / total)
    h = max(h, 0.0)
    return h, (min(1.0, h / math.log(len(pos))) if len(pos) > 1 else 0.0)


def _truth_rows(plan: SubjectPlan, n_days: int, cutoff: float) -> list[DailyFeatures]:
    rows = []
    usage = _split_days(plan.usage)
    locks = _split_days(plan.locks)
    apps_by_day: dict[int, list[tuple[int, str]]] = {}
    for t, app in plan.apps:
        apps_by_day.setdefault(_day_of(t), []).append((t, app))
    valid_by_day: dict[int, list[tuple]] = {}
    for fix in plan.gps:
        if fix[3] <= cutoff and fix[4] >= 0:
            valid_by_day.setdefault(_day_of(fix[0]), []).append(fix)
    for d in range(1, n_days + 1):
        lo, hi = (d - 1) * DAY_S, d * DAY_S
        answered = [c for c in plan.calls if lo <= c[0] < hi and c[1] != "missed"]
        off_hours = [c for c in answered if not (8 * 3600 <= c[0] - lo < 18 * 3600)]
        per_contact: dict[str, int] = {}
        for c in answered:
            per_contact[c[3]] = per_contact.get(c[3], 0) + c[2]
        c_h, c_hn = _entropy(list(per_contact.values()))
        calls = [
            len(answered),
            sum(c[2] for c in answered) / 60.0,
            len(off_hours),
            sum(c[2] for c in off_hours) / 60.0,
            sum(1 for c in plan.calls if lo <= c[0] < hi and c[1] == "missed"),
            len(per_contact),
            c_h,
            c_hn,
        ]
        pieces = usage.get(d, [])
        today = apps_by_day.get(d, [])
        wake = [t for t, _ in today if t - lo >= 5 * 3600]
        early = [t for t, _ in today if t - lo < 2 * 3600]
        anchor = early or [t for t, _ in apps_by_day.get(d - 1, [])]
        sleep = (min(wake) - max(anchor)) / 3600.0 if (wake and anchor) else math.nan
        activity = [
            float(sum(locks.get(d, []))),
            len({a for _, a in today}),
            len({a for t, a in today if t - lo < 5 * 3600}),
            sleep,
        ]
        fixes = valid_by_day.get(d, [])
        if fixes:
            n = len(fixes)
            mlat = sum(f[1] for f in fixes) / n
            mlon = sum(f[2] for f in fixes) / n
            spread = sum((f[1] - mlat) ** 2 for f in fixes) / n + sum((f[2] - mlon) ** 2 for f in fixes) / n
            variance = math.log(spread) if (n >= 2 and spread > 0) else math.nan
            dwell: dict[int, float] = {}
            distance = 0.0
            for a, b in zip(fixes, fixes[1:]):
                distance += _dist(a[1], a[2], b[1], b[2])
                if a[5] >= 0 and a[5] == b[5]:
                    dwell[a[5]] = dwell.get(a[5], 0.0) + (b[0] - a[0])
            l_h, l_hn = _entropy(list(dwell.values()))
            total = sum(dwell.values())
            gps = [variance, l_h, l_hn, dwell.get(0, 0.0) / total if total > 0 else 0.0, distance]
        else:
            gps = [math.nan] * 5
        values = tuple(float(v) for v in calls + [len(pieces), float(sum(pieces))] + activity + gps)
        rows.append(DailyFeatures(SubjectId(plan.sid), d, values, tuple(math.isnan(v) for v in values)))
    return rows


# -- generation and emission -------------------------------------------------------


def _day1_midnight_s(cfg: SynthConfig) -> int:
    start = datetime.strptime(cfg.start_date, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    return int(start.timestamp())


def plan_cohort(cfg: SynthConfig) -> tuple[list[SubjectPlan], GroundTruth]:
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.n_subjects)]
    plans = [_plan_subject(cfg, i, rngs[i]) for i in range(cfg.n_subjects)]
    cutoff = _percentile80([g[3] for p in plans for g in p.gps])
    n_days = 7 * cfg.n_weeks
    features: list[DailyFeatures] = []
    phq = []
    counts = {}
    for p in plans:
        features.extend(_truth_rows(p, n_days, cutoff))
        for w, (lat, score) in enumerate(zip(p.latent, p.scores), start=1):
            phq.append((p.sid, w, 7 * w, lat, score))
        counts[p.sid] = {
            "calls": len(p.calls),
            "usage": len(p.usage),
            "apps": len(p.apps),
            "locks": len(p.locks),
            "gps": len(p.gps),
            "phq": len(p.scores),
        }
    return plans, GroundTruth(features, phq, counts, cutoff)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def generate(cfg: SynthConfig, out_dir: Path | str) -> GroundTruth:
    """Write a cohort (manifest, per-subject streams, truth files) and return the truth."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plans, truth = plan_cohort(cfg)
    origin = _day1_midnight_s(cfg)
    manifest = {"subjects": []}
    for p in plans:
        sub = out / p.sid
        sub.mkdir(exist_ok=True)

        def ms(t_s: int) -> str:
            return str((origin + t_s) * 1000 - p.offset_min * 60_000)

        off = str(p.offset_min)
        _write_csv(
            sub / "calls.csv",
            ["t_ms", "offset_min", "direction", "duration_s", "contact_hash"],
            ([ms(t), off, d, repr(float(dur)), c] for t, d, dur, c in p.calls),
        )
        _write_csv(sub / "usage.csv", ["start_ms", "end_ms", "offset_min"], ([ms(a), ms(b), off] for a, b in p.usage))
        _write_csv(sub / "apps.csv", ["t_ms", "offset_min", "app_hash"], ([ms(t), off, a] for t, a in p.apps))
        _write_csv(sub / "locks.csv", ["start_ms", "end_ms", "offset_min"], ([ms(a), ms(b), off] for a, b in p.locks))
        _write_csv(
            sub / "gps.csv",
            ["t_ms", "offset_min", "lat", "lon", "accuracy_m", "speed_mps"],
            ([ms(t), off, repr(lat), repr(lon), repr(acc), repr(sp)] for t, lat, lon, acc, sp, _ in p.gps),
        )
        _write_csv(sub / "phq.csv", ["subject", "day_index", "score"], ([p.sid, 7 * w, s] for w, s in enumerate(p.scores, 1)))
        manifest["subjects"].append(
            {
                "subject": p.sid,
                "study_start_ms": origin * 1000 - p.offset_min * 60_000,
                "study_start_offset_min": p.offset_min,
                "streams": {k: f"{p.sid}/{k}.csv" for k in STREAM_FILES},
            }
        )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    write_features(out / "truth_features.csv", truth.features)
    _write_csv(
        out / "truth_phq.csv",
        ["subject", "week", "day_index", "latent", "score"],
        ([s, w, d, repr(lat), sc] for s, w, d, lat, sc in truth.phq),
    )
    (out / "synth_config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return truth


# -- verification -------------------------------------------------------------------------


@dataclass(frozen=True)
class Discrepancy:
    subject: str
    day: int
    feature: str
    expected: float
    actual: float


def compare_features(expected: list[DailyFeatures], actual: list[DailyFeatures], tol: float = 1e-9) -> list[Discrepancy]:
    """Counts must match exactly, other features within ``tol`` (relative or absolute)."""
    got = {(r.subject.id, r.day_index): r for r in actual}
    diffs = []
    for row in expected:
        key = (row.subject.id, row.day_index)
        other = got.pop(key, None)
        if other is None:
            diffs.append(Discrepancy(key[0], key[1], "<row>", 1.0, math.nan))
            continue
        for name, e, a in zip(FEATURE_NAMES, row.values, other.values):
            if math.isnan(e) or math.isnan(a):
                same = math.isnan(e) and math.isnan(a)
            elif name in COUNT_FEATURES:
                same = e == a
            else:
                same = math.isclose(e, a, rel_tol=tol, abs_tol=tol)
            if not same:
                diffs.append(Discrepancy(key[0], key[1], name, e, a))
    for key in sorted(got):
        diffs.append(Discrepancy(key[0], key[1], "<row>", math.nan, 1.0))
    return diffs


def verify_pipeline(cohort_dir: Path | str, algorithm: str = "kmeans", **cluster_params) -> list[Discrepancy]:
    """Run ingestion and feature extraction on a generated cohort and diff against its truth."""
    from .features import extract_cohort
    from .ingestion import load_cohort, read_manifest

    cohort_dir = Path(cohort_dir)
    cfg = json.loads((cohort_dir / "synth_config.json").read_text(encoding="utf-8"))
    cohort = load_cohort(read_manifest(cohort_dir / "manifest.json"))
    rows, _, _ = extract_cohort(cohort.logs, algorithm, n_days=7 * cfg["n_weeks"], **cluster_params)
    diffs = compare_features(read_features(cohort_dir / "truth_features.csv"), rows)
    truth_phq = {}
    with (cohort_dir / "truth_phq.csv").open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            truth_phq[(rec["subject"], int(rec["day_index"]))] = int(rec["score"])
    seen = {(o.subject.id, o.day_index): o.score for o in cohort.phq}
    for key in sorted(set(truth_phq) | set(seen)):
        if truth_phq.get(key) != seen.get(key):
            diffs.append(Discrepancy(key[0], key[1], "phq", truth_phq.get(key, math.nan), seen.get(key, math.nan)))
    return diffs


def write_discrepancies(path: Path | str, diffs: list[Discrepancy]) -> None:
    _write_csv(
        Path(path),
        ["subject", "day", "feature", "expected", "actual"],
        ([d.subject, d.day, d.feature, repr(d.expected), repr(d.actual)] for d in diffs),
    )

