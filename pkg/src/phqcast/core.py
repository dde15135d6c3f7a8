"""Shared domain types.

Every event type validates itself at construction, so anything that reaches
the feature or model code is already well formed. Day-boundary logic always
works in the subject's local time (``instant_ms + offset``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

MS_PER_DAY = 86_400_000
MS_PER_HOUR = 3_600_000
MAX_OFFSET_MIN = 840


@dataclass(frozen=True, slots=True, order=True)
class Timestamp:
    instant_ms: int
    offset_min: int = 0

    def __post_init__(self) -> None:
        if not -MAX_OFFSET_MIN <= self.offset_min <= MAX_OFFSET_MIN:
            raise ValueError(f"offset {self.offset_min} min outside [-840, 840]")

    @property
    def local_ms(self) -> int:
        return self.instant_ms + self.offset_min * 60_000

    @property
    def local_day(self) -> int:
        """Local calendar day as days since 1970-01-01."""
        return self.local_ms // MS_PER_DAY

    @property
    def local_ms_of_day(self) -> int:
        return self.local_ms % MS_PER_DAY

    @property
    def local_hour(self) -> float:
        return self.local_ms_of_day / MS_PER_HOUR

    def shifted(self, ms: int) -> Timestamp:
        return Timestamp(self.instant_ms + ms, self.offset_min)


def local_day_index(t: Timestamp, study_start: Timestamp) -> int:
    """1-based local calendar day of ``t`` counted from the day of ``study_start``."""
    if t.local_ms < study_start.local_ms:
        raise ValueError("before study start")
    return t.local_day - study_start.local_day + 1


def day_start_ms(study_start: Timestamp, day_index: int) -> int:
    """Local-clock millisecond at which study day ``day_index`` begins."""
    return (study_start.local_day + day_index - 1) * MS_PER_DAY


@dataclass(frozen=True, slots=True)
class SubjectId:
    id: str

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("subject id must be a non-empty string")

    def __str__(self) -> str:
        return self.id


class Direction(str, enum.Enum):
    INCOMING = "incoming"
    OUTGOING = "outgoing"
    MISSED = "missed"


@dataclass(frozen=True, slots=True)
class GpsFix:
    t: Timestamp
    lat: float
    lon: float
    accuracy: float
    speed: float  # m/s; negative means the device flagged it invalid

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError("lat out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError("lon out of range")
        if not math.isfinite(self.accuracy) or self.accuracy < 0:
            raise ValueError("accuracy must be finite and >= 0")
        if math.isinf(self.speed):
            raise ValueError("speed must not be infinite")


@dataclass(frozen=True, slots=True)
class CallEvent:
    t: Timestamp
    direction: Direction
    duration: float
    contact: str

    def __post_init__(self) -> None:
        if not isinstance(self.direction, Direction):
            object.__setattr__(self, "direction", Direction(self.direction))
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ValueError("duration must be finite and >= 0")
        if self.direction is Direction.MISSED and self.duration != 0:
            raise ValueError("missed call with nonzero duration")

    @property
    def answered_or_made(self) -> bool:
        return self.direction is not Direction.MISSED


@dataclass(frozen=True, slots=True)
class UsageSession:
    start: Timestamp
    end: Timestamp

    def __post_init__(self) -> None:
        if self.end.instant_ms < self.start.instant_ms:
            raise ValueError("end before start")


@dataclass(frozen=True, slots=True)
class AppEvent:
    t: Timestamp
    app: str

    def __post_init__(self) -> None:
        if not self.app:
            raise ValueError("app identifier must be non-empty")


@dataclass(frozen=True, slots=True)
class LockEvent:
    start: Timestamp
    end: Timestamp

    def __post_init__(self) -> None:
        if self.end.instant_ms < self.start.instant_ms:
            raise ValueError("end before start")


@dataclass(frozen=True, slots=True)
class PhqObservation:
    subject: SubjectId
    day_index: int
    score: int

    def __post_init__(self) -> None:
        if self.day_index < 1:
            raise ValueError("day_index must be >= 1")
        if not 0 <= self.score <= 27:
            raise ValueError("score out of range [0, 27]")


@dataclass
class SensorLog:
    """All raw streams of one subject, each sorted by time."""

    subject: SubjectId
    study_start: Timestamp
    calls: list[CallEvent] = field(default_factory=list)
    usage: list[UsageSession] = field(default_factory=list)
    apps: list[AppEvent] = field(default_factory=list)
    locks: list[LockEvent] = field(default_factory=list)
    gps: list[GpsFix] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        return {
            "calls": len(self.calls),
            "usage": len(self.usage),
            "apps": len(self.apps),
            "locks": len(self.locks),
            "gps": len(self.gps),
        }
