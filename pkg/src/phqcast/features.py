"""Daily behavioural features: calls, phone usage, user activity and GPS.

Count features with no events are true zeros; sleep time and the GPS block
are marked missing instead, and imputed later from training-fold statistics.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import geo
from .core import (
    MS_PER_DAY,
    MS_PER_HOUR,
    AppEvent,
    CallEvent,
    LockEvent,
    SensorLog,
    SubjectId,
    Timestamp,
    UsageSession,
    local_day_index,
)

FEATURE_NAMES: tuple[str, ...] = (
    "call_freq",
    "call_dur_min",
    "nonwork_call_freq",
    "nonwork_call_dur_min",
    "missed_calls",
    "n_contacts",
    "call_entropy",
    "norm_call_entropy",
    "usage_freq",
    "usage_dur_s",
    "lock_dur_s",
    "n_apps",
    "n_midnight_apps",
    "sleep_time_h",
    "loc_variance",
    "loc_entropy",
    "norm_loc_entropy",
    "time_at_home",
    "total_distance_m",
)
N_FEATURES = len(FEATURE_NAMES)

FEATURE_GROUPS: dict[str, tuple[int, ...]] = {
    "calls": tuple(range(0, 8)),
    "usage": (8, 9),
    "activity": (10, 11, 12, 13),
    "gps": tuple(range(14, 19)),
}
FEATURE_GROUPS["all"] = tuple(range(N_FEATURES))

WORK_HOURS = (8.0, 18.0)
MIDNIGHT_HOURS = (0.0, 5.0)
SLEEP_ANCHOR_BEFORE_H = 2.0
WAKE_AFTER_H = 5.0


@dataclass(frozen=True)
class DailyFeatures:
    subject: SubjectId
    day_index: int
    values: tuple[float, ...]  # NaN where masked
    missing_mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.values) != N_FEATURES or len(self.missing_mask) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} values and mask bits")
        for v, m in zip(self.values, self.missing_mask):
            if m != math.isnan(v):
                raise ValueError("mask must flag exactly the NaN entries")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))


def call_features(events: Sequence[CallEvent]) -> tuple[float, ...]:
    answered = [e for e in events if e.answered_or_made]
    nonwork = [e for e in answered if not WORK_HOURS[0] <= e.t.local_hour < WORK_HOURS[1]]
    per_contact: dict[str, float] = defaultdict(float)
    for e in answered:
        per_contact[e.contact] += e.duration
    h, h_norm = geo.entropy(per_contact.values())
    return (
        float(len(answered)),
        sum(e.duration for e in answered) / 60.0,
        float(len(nonwork)),
        sum(e.duration for e in nonwork) / 60.0,
        float(sum(1 for e in events if not e.answered_or_made)),
        float(len(per_contact)),
        h,
        h_norm,
    )


def usage_features(sessions: Sequence[UsageSession]) -> tuple[float, float]:
    """Session count and total seconds; callers pass sessions already clipped to the day."""
    return float(len(sessions)), sum((s.end.instant_ms - s.start.instant_ms) / 1000.0 for s in sessions)


def sleep_hours(apps: Sequence[AppEvent], prev_day_apps: Sequence[AppEvent]) -> float | None:
    wake = [a.t for a in apps if a.t.local_hour >= WAKE_AFTER_H]
    if not wake:
        return None
    early = [a.t for a in apps if a.t.local_hour < SLEEP_ANCHOR_BEFORE_H]
    anchors = early or [a.t for a in prev_day_apps]
    if not anchors:
        return None
    first = min(wake, key=lambda t: t.instant_ms)
    last = max(anchors, key=lambda t: t.instant_ms)
    return (first.instant_ms - last.instant_ms) / MS_PER_HOUR


def activity_features(
    apps: Sequence[AppEvent], locks: Sequence[LockEvent], prev_day_apps: Sequence[AppEvent] = ()
) -> tuple[float, float, float, float | None]:
    """Lock seconds, distinct apps, distinct 0-5 am apps, and sleep hours (None if undefined)."""
    lock_s = sum((lk.end.instant_ms - lk.start.instant_ms) / 1000.0 for lk in locks)
    n_apps = len({a.app for a in apps})
    midnight = len({a.app for a in apps if MIDNIGHT_HOURS[0] <= a.t.local_hour < MIDNIGHT_HOURS[1]})
    return lock_s, float(n_apps), float(midnight), sleep_hours(apps, prev_day_apps)


def assemble_daily(
    subject: SubjectId,
    day_index: int,
    calls: Sequence[float],
    usage: Sequence[float],
    activity: Sequence[float | None],
    gps: geo.GpsFeatures | None,
) -> DailyFeatures:
    raw: list[float | None] = [*calls, *usage, *activity]
    raw.extend(gps.as_tuple() if gps is not None else (None,) * 5)
    values = tuple(math.nan if v is None else float(v) for v in raw)
    return DailyFeatures(subject, day_index, values, tuple(math.isnan(v) for v in values))


# -- per-day splitting ---------------------------------------------------------


def split_intervals(intervals: Iterable[UsageSession | LockEvent], study_start: Timestamp) -> dict[int, list]:
    """Cut each interval at local midnights so every piece sits inside one study day."""
    out: dict[int, list] = defaultdict(list)
    for iv in intervals:
        cls = type(iv)
        offset = iv.start.offset_min
        start, end = iv.start.instant_ms, iv.end.instant_ms
        while True:
            t = Timestamp(start, offset)
            day = local_day_index(t, study_start)
            boundary = start + (MS_PER_DAY - t.local_ms_of_day)
            if end <= boundary:
                out[day].append(cls(t, Timestamp(end, offset)))
                break
            out[day].append(cls(t, Timestamp(boundary, offset)))
            start = boundary
    return out


def _by_day(events, study_start: Timestamp) -> dict[int, list]:
    out: dict[int, list] = defaultdict(list)
    for ev in events:
        out[local_day_index(ev.t, study_start)].append(ev)
    return out


def last_day(log: SensorLog) -> int:
    times = [e.t for e in log.calls] + [e.t for e in log.apps] + [f.t for f in log.gps]
    times += [s.end for s in log.usage] + [lk.end for lk in log.locks]
    if not times:
        return 0
    return max(local_day_index(t, log.study_start) for t in times)


def extract_subject(
    log: SensorLog,
    accuracy_cutoff: float,
    algorithm: str = "kmeans",
    n_days: int | None = None,
    **cluster_params,
) -> tuple[list[DailyFeatures], geo.SignificantPlaces]:
    """Feature rows for study days 1..n_days (default: the last day with any event)."""
    n_days = last_day(log) if n_days is None else n_days
    start = log.study_start
    calls = _by_day(log.calls, start)
    apps = _by_day(log.apps, start)
    usage = split_intervals(log.usage, start)
    locks = split_intervals(log.locks, start)
    places, gps_days = geo.subject_gps(log.gps, start, accuracy_cutoff, algorithm, **cluster_params)
    rows = []
    for day in range(1, n_days + 1):
        rows.append(
            assemble_daily(
                log.subject,
                day,
                call_features(calls.get(day, [])),
                usage_features(usage.get(day, [])),
                activity_features(apps.get(day, []), locks.get(day, []), apps.get(day - 1, [])),
                gps_days.get(day),
            )
        )
    return rows, places


def extract_cohort(
    logs: dict[SubjectId, SensorLog],
    algorithm: str = "kmeans",
    n_days: int | None = None,
    **cluster_params,
) -> tuple[list[DailyFeatures], dict[SubjectId, geo.SignificantPlaces], float]:
    """Features for every subject; the accuracy cutoff is shared across the cohort."""
    acc = np.fromiter((f.accuracy for lg in logs.values() for f in lg.gps), dtype=float)
    cutoff = geo.cohort_accuracy_cutoff(acc) if acc.size else math.inf
    rows: list[DailyFeatures] = []
    places: dict[SubjectId, geo.SignificantPlaces] = {}
    for sid in sorted(logs, key=lambda s: s.id):
        sub_rows, places[sid] = extract_subject(logs[sid], cutoff, algorithm, n_days, **cluster_params)
        rows.extend(sub_rows)
    return rows, places, cutoff


# -- feature matrix I/O ----------------------------------------------------------

MASK_NAMES = tuple(f"{n}_missing" for n in FEATURE_NAMES)


def write_features(path: Path | str, rows: Iterable[DailyFeatures]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject", "day", *FEATURE_NAMES, *MASK_NAMES])
        for r in rows:
            writer.writerow([r.subject.id, r.day_index, *map(repr, r.values), *(int(m) for m in r.missing_mask)])


def read_features(path: Path | str) -> list[DailyFeatures]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["subject", "day", *FEATURE_NAMES, *MASK_NAMES]:
            raise ValueError(f"{path}: not a feature matrix (unexpected header)")
        for rec in reader:
            values = tuple(float(x) for x in rec[2 : 2 + N_FEATURES])
            mask = tuple(x == "1" for x in rec[2 + N_FEATURES :])
            rows.append(DailyFeatures(SubjectId(rec[0]), int(rec[1]), values, mask))
    return rows
