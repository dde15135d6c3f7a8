"""Reading and writing the raw per-subject sensor streams.

One CSV file per stream per subject (JSON Lines with the same field names is
accepted too). Rows that fail validation are quarantined in a
:class:`RejectionReport` instead of aborting the load.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import (
    AppEvent,
    CallEvent,
    Direction,
    GpsFix,
    LockEvent,
    PhqObservation,
    SensorLog,
    SubjectId,
    Timestamp,
    UsageSession,
    local_day_index,
)
from .geo import derive_speeds

log = logging.getLogger(__name__)

HEADERS: dict[str, list[str]] = {
    "calls": ["t_ms", "offset_min", "direction", "duration_s", "contact_hash"],
    "usage": ["start_ms", "end_ms", "offset_min"],
    "apps": ["t_ms", "offset_min", "app_hash"],
    "locks": ["start_ms", "end_ms", "offset_min"],
    "gps": ["t_ms", "offset_min", "lat", "lon", "accuracy_m", "speed_mps"],
    "phq": ["subject", "day_index", "score"],
}
STREAMS = ("calls", "usage", "apps", "locks", "gps")
KINDS = STREAMS + ("phq",)


class IngestionError(ValueError):
    """Raised for file-level problems (bad header, unknown kind, bad manifest)."""


@dataclass(frozen=True)
class Rejection:
    path: str
    line: int
    reason: str
    row: dict[str, Any]


@dataclass
class RejectionReport:
    rejections: list[Rejection] = field(default_factory=list)

    def add(self, path: Path | str, line: int, reason: str, row: dict[str, Any]) -> None:
        self.rejections.append(Rejection(str(path), line, reason, dict(row)))

    def extend(self, other: RejectionReport) -> None:
        self.rejections.extend(other.rejections)

    def __len__(self) -> int:
        return len(self.rejections)

    def __iter__(self) -> Iterator[Rejection]:
        return iter(self.rejections)


def _int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(value, int):
        return value
    return int(str(value).strip())


def _float(value: Any) -> float:
    return float(str(value).strip()) if not isinstance(value, (int, float)) else float(value)


def _blank(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def _build(kind: str, row: dict[str, Any]):
    if kind == "calls":
        return CallEvent(
            Timestamp(_int(row["t_ms"]), _int(row["offset_min"])),
            Direction(str(row["direction"]).strip()),
            _float(row["duration_s"]),
            str(row["contact_hash"]).strip(),
        )
    if kind in ("usage", "locks"):
        offset = _int(row["offset_min"])
        cls = UsageSession if kind == "usage" else LockEvent
        return cls(Timestamp(_int(row["start_ms"]), offset), Timestamp(_int(row["end_ms"]), offset))
    if kind == "apps":
        return AppEvent(Timestamp(_int(row["t_ms"]), _int(row["offset_min"])), str(row["app_hash"]).strip())
    if kind == "gps":
        speed = row.get("speed_mps")
        return GpsFix(
            Timestamp(_int(row["t_ms"]), _int(row["offset_min"])),
            _float(row["lat"]),
            _float(row["lon"]),
            _float(row["accuracy_m"]),
            float("nan") if _blank(speed) else _float(speed),
        )
    if kind == "phq":
        return PhqObservation(SubjectId(str(row["subject"]).strip()), _int(row["day_index"]), _int(row["score"]))
    raise IngestionError(f"unknown stream kind {kind!r}")


def _sort_key(kind: str, ev) -> tuple:
    if kind == "calls":
        return (ev.t.instant_ms, ev.t.offset_min, ev.direction.value, ev.duration, ev.contact)
    if kind in ("usage", "locks"):
        return (ev.start.instant_ms, ev.end.instant_ms, ev.start.offset_min)
    if kind == "apps":
        return (ev.t.instant_ms, ev.t.offset_min, ev.app)
    if kind == "gps":
        return (ev.t.instant_ms, ev.t.offset_min, ev.lat, ev.lon, ev.accuracy, repr(ev.speed))
    return (ev.subject.id, ev.day_index, ev.score)


def _rows(path: Path, kind: str) -> Iterator[tuple[int, dict[str, Any]]]:
    expected = HEADERS[kind]
    if path.suffix in (".jsonl", ".ndjson"):
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    yield lineno, {"_error": f"invalid json: {exc.msg}", "_raw": line.rstrip("\n")}
                    continue
                if not isinstance(obj, dict):
                    yield lineno, {"_error": "json row is not an object", "_raw": line.rstrip("\n")}
                    continue
                missing = [name for name in expected if name not in obj and name != "speed_mps"]
                if missing:
                    yield lineno, {"_error": f"missing fields {missing}", **obj}
                    continue
                yield lineno, obj
        return
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestionError(f"{path}: empty file, expected header {','.join(expected)}")
        header = [h.strip() for h in header]
        if header != expected:
            raise IngestionError(f"{path}: header mismatch: expected {expected}, got {header}")
        for lineno, values in enumerate(reader, start=2):
            if not values:
                continue
            if len(values) != len(expected):
                yield lineno, {"_error": f"expected {len(expected)} fields, got {len(values)}", "_raw": ",".join(values)}
                continue
            yield lineno, dict(zip(expected, values))


def parse_stream(path: Path | str, kind: str) -> tuple[list, RejectionReport]:
    """Parse one stream file into time-sorted core events plus quarantined rows."""
    if kind not in HEADERS:
        raise IngestionError(f"unknown stream kind {kind!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing stream file: {path}")
    report = RejectionReport()
    events = []
    for lineno, row in _rows(path, kind):
        if "_error" in row:
            report.add(path, lineno, row["_error"], row)
            continue
        try:
            events.append(_build(kind, row))
        except (ValueError, KeyError, TypeError) as exc:
            report.add(path, lineno, str(exc), row)
    events.sort(key=lambda ev: _sort_key(kind, ev))
    if kind == "gps":
        events = derive_speeds(events)
    return events, report


def _fmt(x: float) -> str:
    return repr(float(x))


def _event_row(kind: str, ev) -> list[str]:
    if kind == "calls":
        return [str(ev.t.instant_ms), str(ev.t.offset_min), ev.direction.value, _fmt(ev.duration), ev.contact]
    if kind in ("usage", "locks"):
        return [str(ev.start.instant_ms), str(ev.end.instant_ms), str(ev.start.offset_min)]
    if kind == "apps":
        return [str(ev.t.instant_ms), str(ev.t.offset_min), ev.app]
    if kind == "gps":
        return [str(ev.t.instant_ms), str(ev.t.offset_min), _fmt(ev.lat), _fmt(ev.lon), _fmt(ev.accuracy), _fmt(ev.speed)]
    return [ev.subject.id, str(ev.day_index), str(ev.score)]


def write_stream(path: Path | str, kind: str, events: Iterable) -> None:
    """Write events in the schema :func:`parse_stream` reads. Floats round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADERS[kind])
        for ev in events:
            writer.writerow(_event_row(kind, ev))


# -- manifest -------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    subject: SubjectId
    study_start: Timestamp
    paths: dict[str, Path]


@dataclass
class CohortManifest:
    subjects: list[ManifestEntry]
    root: Path = Path(".")

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for entry in self.subjects:
            if entry.subject.id in seen:
                raise IngestionError(f"duplicate subject id {entry.subject.id!r} in manifest")
            seen.add(entry.subject.id)
            missing = [k for k in KINDS if k not in entry.paths]
            if missing:
                raise IngestionError(f"subject {entry.subject.id}: no path for streams {missing}")
        for kind in KINDS:
            paths = [self.resolve(e.paths[kind]) for e in self.subjects]
            # a cohort-level phq file may legitimately be shared
            if kind != "phq" and len(set(paths)) != len(paths):
                raise IngestionError(f"stream {kind!r}: the same file is listed for several subjects")

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.root / path


def read_manifest(path: Path | str) -> CohortManifest:
    """Read a JSON manifest; relative stream paths resolve against its directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing manifest: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        entries = [
            ManifestEntry(
                SubjectId(rec["subject"]),
                Timestamp(int(rec["study_start_ms"]), int(rec.get("study_start_offset_min", 0))),
                {k: Path(v) for k, v in rec["streams"].items()},
            )
            for rec in doc["subjects"]
        ]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, IngestionError):
            raise
        raise IngestionError(f"{path}: malformed manifest: {exc}") from exc
    return CohortManifest(entries, root=path.parent)


def write_manifest(path: Path | str, manifest: CohortManifest) -> None:
    """Write ``manifest`` as JSON; stream paths are stored relative to the new file."""
    here = Path(path).parent.resolve()

    def rel(p: Path) -> str:
        return Path(os.path.relpath(manifest.resolve(p).resolve(), here)).as_posix()

    doc = {
        "subjects": [
            {
                "subject": e.subject.id,
                "study_start_ms": e.study_start.instant_ms,
                "study_start_offset_min": e.study_start.offset_min,
                "streams": {k: rel(e.paths[k]) for k in KINDS},
            }
            for e in manifest.subjects
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# -- cohort loading -------------------------------------------------------


@dataclass(frozen=True)
class SubjectSummary:
    subject: SubjectId
    counts: dict[str, int]
    days_covered: dict[str, int]
    rejected: int

    @property
    def flagged(self) -> bool:
        """True when at least one stream covers zero days."""
        return any(n == 0 for n in self.days_covered.values())


@dataclass
class Cohort:
    logs: dict[SubjectId, SensorLog]
    phq: list[PhqObservation]
    summaries: list[SubjectSummary]
    rejections: RejectionReport


def _event_time(ev) -> Timestamp:
    return ev.t if hasattr(ev, "t") else ev.start


def load_subject(manifest: CohortManifest, entry: ManifestEntry) -> tuple[SensorLog, list[PhqObservation], SubjectSummary, RejectionReport]:
    report = RejectionReport()
    log_ = SensorLog(entry.subject, entry.study_start)
    days: dict[str, int] = {}
    for kind in STREAMS:
        path = manifest.resolve(entry.paths[kind])
        events, rej = parse_stream(path, kind)
        report.extend(rej)
        kept = []
        for ev in events:
            if _event_time(ev).local_ms < entry.study_start.local_ms:
                report.add(path, 0, "before study start", {"t_ms": _event_time(ev).instant_ms})
            else:
                kept.append(ev)
        setattr(log_, kind, kept)
        days[kind] = len({local_day_index(_event_time(ev), entry.study_start) for ev in kept})
    phq_path = manifest.resolve(entry.paths["phq"])
    phq, rej = parse_stream(phq_path, "phq")
    report.extend(rej)
    kept_phq, seen_days = [], set()
    for obs in phq:
        if obs.subject != entry.subject:
            continue
        if obs.day_index in seen_days:
            report.add(phq_path, 0, "duplicate PHQ observation for subject-day", {"day_index": obs.day_index, "score": obs.score})
            continue
        seen_days.add(obs.day_index)
        kept_phq.append(obs)
    phq = kept_phq
    summary = SubjectSummary(entry.subject, log_.counts() | {"phq": len(phq)}, days, len(report))
    if summary.flagged:
        empty = [k for k, n in days.items() if n == 0]
        log.warning("subject %s has no data in streams %s", entry.subject, empty)
    return log_, phq, summary, report


def load_cohort(manifest: CohortManifest) -> Cohort:
    """Load every subject in the manifest.

    PHQ rows for subjects outside the manifest are ignored; a second
    observation for the same subject-day is quarantined.
    """
    logs: dict[SubjectId, SensorLog] = {}
    phq: list[PhqObservation] = []
    summaries: list[SubjectSummary] = []
    report = RejectionReport()
    for entry in manifest.subjects:
        log_, obs, summary, rej = load_subject(manifest, entry)
        logs[entry.subject] = log_
        phq.extend(obs)
        summaries.append(summary)
        report.extend(rej)
    return Cohort(logs, phq, summaries, report)


def write_rejections(path: Path | str, report: RejectionReport) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "line", "reason", "row"])
        for r in report:
            writer.writerow([r.path, r.line, r.reason, json.dumps(r.row, sort_keys=True)])
