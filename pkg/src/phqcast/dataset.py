"""Weekly samples with PHQ-9 targets, fold-local normalisation and subject folds."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import PhqObservation, SubjectId
from .features import FEATURE_GROUPS, FEATURE_NAMES, N_FEATURES, DailyFeatures

log = logging.getLogger(__name__)

DAYS_PER_WEEK = 7
TASKS = ("diagnosis", "forecast")
SNAP_DAYS = 1


@dataclass(frozen=True)
class Sample:
    subject: SubjectId
    week_index: int
    seq: tuple[DailyFeatures, ...]
    target: float
    task: str

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not 1 <= len(self.seq) <= DAYS_PER_WEEK:
            raise ValueError("a sample holds between 1 and 7 days")
        if not 0.0 <= self.target <= 27.0:
            raise ValueError("target outside [0, 27]")

    @property
    def target_week(self) -> int:
        return self.week_index + (1 if self.task == "forecast" else 0)

    def array(self) -> np.ndarray:
        """Raw (T, 19) matrix, NaN where masked."""
        return np.array([d.values for d in self.seq], dtype=float)


def week_of_observation(day_index: int) -> int | None:
    """Week whose last day is within one day of ``day_index``."""
    week = round(day_index / DAYS_PER_WEEK)
    if week >= 1 and abs(day_index - DAYS_PER_WEEK * week) <= SNAP_DAYS:
        return week
    return None


def weekly_targets(phq: Iterable[PhqObservation]) -> dict[SubjectId, dict[int, int]]:
    """Per subject, week -> score. Of several observations snapping to one week
    the one nearest the week end wins (the later one on a tie)."""
    best: dict[tuple[SubjectId, int], tuple[int, int, int]] = {}
    for obs in phq:
        week = week_of_observation(obs.day_index)
        if week is None:
            log.warning("PHQ for %s on day %d is not near a week end; ignored", obs.subject, obs.day_index)
            continue
        rank = (-abs(obs.day_index - DAYS_PER_WEEK * week), obs.day_index)
        key = (obs.subject, week)
        if key not in best or rank > best[key][:2]:
            best[key] = (*rank, obs.score)
    out: dict[SubjectId, dict[int, int]] = defaultdict(dict)
    for (sid, week), (_, _, score) in best.items():
        out[sid][week] = score
    return dict(out)


def _empty_day(subject: SubjectId, day: int) -> DailyFeatures:
    return DailyFeatures(subject, day, (math.nan,) * N_FEATURES, (True,) * N_FEATURES)


def build_samples(daily: Iterable[DailyFeatures], phq: Iterable[PhqObservation], task: str) -> list[Sample]:
    """One sample per subject-week that has feature days and the needed target.

    Days of the week without a feature row are filled with fully masked rows,
    so every sample spans the full 7 days.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    by_subject: dict[SubjectId, dict[int, DailyFeatures]] = defaultdict(dict)
    for row in daily:
        by_subject[row.subject][row.day_index] = row
    targets = weekly_targets(phq)
    shift = 1 if task == "forecast" else 0
    samples = []
    for sid in sorted(by_subject, key=lambda s: s.id):
        days = by_subject[sid]
        if sid not in targets:
            log.warning("subject %s has no PHQ observations; no samples", sid)
            continue
        weeks = sorted({(d - 1) // DAYS_PER_WEEK + 1 for d in days})
        for w in weeks:
            score = targets[sid].get(w + shift)
            if score is None:
                continue
            first = DAYS_PER_WEEK * (w - 1) + 1
            seq = tuple(days.get(d) or _empty_day(sid, d) for d in range(first, first + DAYS_PER_WEEK))
            samples.append(Sample(sid, w, seq, float(score), task))
    return samples


def prefix_augment(samples: Sequence[Sample]) -> list[Sample]:
    """Each sample plus its day-1..d prefixes, all with the same weekly target."""
    out = []
    for s in samples:
        for d in range(1, len(s.seq) + 1):
            out.append(Sample(s.subject, s.week_index, s.seq[:d], s.target, s.task))
    return out


# -- normalisation --------------------------------------------------------------


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # True where all observed values are equal or none were observed

    @classmethod
    def fit(cls, samples: Sequence[Sample]) -> NormStats:
        """Statistics over the unmasked cells of each distinct subject-day in ``samples``."""
        rows: dict[tuple[str, int], tuple[float, ...]] = {}
        for s in samples:
            for d in s.seq:
                rows[(s.subject.id, d.day_index)] = d.values
        return cls.from_matrix(np.array([rows[k] for k in sorted(rows)], dtype=float).reshape(-1, N_FEATURES))

    @classmethod
    def from_matrix(cls, x: np.ndarray) -> NormStats:
        x = np.asarray(x, dtype=float).reshape(-1, x.shape[-1])
        observed = ~np.isnan(x)
        n = observed.sum(axis=0)
        filled = np.where(observed, x, 0.0)
        mean = np.divide(filled.sum(axis=0), n, out=np.zeros(x.shape[1]), where=n > 0)
        dev = np.where(observed, x - mean, 0.0)
        var = np.divide((dev**2).sum(axis=0), n, out=np.zeros(x.shape[1]), where=n > 0)
        std = np.sqrt(var)
        # exact test: a constant column can still show a rounding-level std
        lo = np.where(observed, x, np.inf).min(axis=0)
        hi = np.where(observed, x, -np.inf).max(axis=0)
        return cls(mean, std, (n == 0) | (lo == hi) | (std == 0))


def impute(seq: np.ndarray, stats: NormStats) -> np.ndarray:
    """Replace masked (NaN) cells by the training-fold feature mean."""
    seq = np.asarray(seq, dtype=float)
    return np.where(np.isnan(seq), stats.mean, seq)


def normalize(seq: np.ndarray, stats: NormStats) -> np.ndarray:
    """Z-score per feature; constant features map to 0."""
    safe = np.where(stats.constant, 1.0, stats.std)
    z = (np.asarray(seq, dtype=float) - stats.mean) / safe
    return np.where(stats.constant, 0.0, z)


def restrict(seq: np.ndarray, feature_set: str) -> np.ndarray:
    """Zero every input dimension outside ``feature_set`` (applied after normalisation)."""
    if feature_set not in FEATURE_GROUPS:
        raise ValueError(f"unknown feature set {feature_set!r}; expected one of {sorted(FEATURE_GROUPS)}")
    keep = np.zeros(N_FEATURES, dtype=bool)
    keep[list(FEATURE_GROUPS[feature_set])] = True
    return np.where(keep, seq, 0.0)


def prepare(samples: Sequence[Sample], stats: NormStats, feature_set: str = "all") -> list[np.ndarray]:
    return [restrict(normalize(impute(s.array(), stats), stats), feature_set) for s in samples]


# -- folds ------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[SubjectId, ...], ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def split(self, i: int) -> tuple[set[SubjectId], set[SubjectId]]:
        """(train subjects, test subjects) for fold ``i``."""
        test = set(self.folds[i])
        train = {s for j, f in enumerate(self.folds) if j != i for s in f}
        return train, test


def subject_kfold(subjects: Iterable[SubjectId], k: int = 10, seed: int = 0) -> FoldPlan:
    subjects = sorted(set(subjects), key=lambda s: s.id)
    if len(subjects) < k:
        raise ValueError(f"{len(subjects)} subjects cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(subjects))
    folds = tuple(tuple(subjects[i] for i in part) for part in np.array_split(order, k))
    return FoldPlan(folds, seed)


def write_folds(path: Path | str, plan: FoldPlan) -> None:
    doc = {"k": plan.k, "seed": plan.seed, "folds": {str(i): [s.id for s in f] for i, f in enumerate(plan.folds)}}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_folds(path: Path | str) -> FoldPlan:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    folds = tuple(tuple(SubjectId(s) for s in doc["folds"][str(i)]) for i in range(doc["k"]))
    return FoldPlan(folds, doc["seed"])


def write_samples(path: Path | str, samples: Sequence[Sample], stats: NormStats) -> None:
    """One row per sample-day with z-scored (imputed) features."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject", "week", "day", "task", "target", *FEATURE_NAMES])
        for s in samples:
            z = normalize(impute(s.array(), stats), stats)
            for d, row in zip(s.seq, z):
                writer.writerow([s.subject.id, s.week_index, d.day_index, s.task, repr(s.target), *map(repr, row.tolist())])
