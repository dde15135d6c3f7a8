"""Cross-validated evaluation: RMSE, major-depression and severity accuracy, mean baseline."""

from __future__ import annotations

import csv
import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import dataset, model
from .dataset import FoldPlan, NormStats, Sample

log = logging.getLogger(__name__)

MAJOR_CUTOFF = 10.0
SEVERITY_BOUNDS = (5.0, 10.0, 15.0, 20.0)
PHQ_MAX = 27.0
METRICS = ("binary_acc", "severity_acc", "rmse")


class Severity(str, enum.Enum):
    MINIMAL = "minimal"
    MILD = "mild"
    MODERATE = "moderate"
    MODERATELY_SEVERE = "moderately_severe"
    SEVERE = "severe"


SEVERITIES = tuple(Severity)


def rmse(preds, targets) -> float:
    p = np.asarray(preds, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.size == 0 or p.shape != t.shape:
        raise ValueError("rmse needs equal, non-zero lengths")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def severity_class(score: float) -> Severity:
    score = min(max(float(score), 0.0), PHQ_MAX)
    return SEVERITIES[int(np.searchsorted(SEVERITY_BOUNDS, score, side="right"))]


def binary_class(score: float) -> bool:
    """True for major depression (score >= 10)."""
    return min(max(float(score), 0.0), PHQ_MAX) >= MAJOR_CUTOFF


def binary_accuracy(preds, targets) -> float:
    return 100.0 * float(np.mean([binary_class(p) == binary_class(t) for p, t in zip(preds, targets)]))


def severity_accuracy(preds, targets) -> float:
    return 100.0 * float(np.mean([severity_class(p) == severity_class(t) for p, t in zip(preds, targets)]))


def baseline_predict(train_targets) -> float:
    """Constant prediction: the mean PHQ-9 of the training fold."""
    t = np.asarray(train_targets, dtype=float)
    if t.size == 0:
        raise ValueError("baseline needs at least one training target")
    return float(t.mean())


def metrics(preds, targets) -> dict[str, float]:
    return {
        "binary_acc": binary_accuracy(preds, targets),
        "severity_acc": severity_accuracy(preds, targets),
        "rmse": rmse(preds, targets),
    }


# -- cross-validation --------------------------------------------------------------

# fit(train_seqs, train_targets, config) -> predict(seqs) -> raw predictions
Fitter = Callable[[list[np.ndarray], np.ndarray, model.TrainConfig], Callable[[list[np.ndarray]], np.ndarray]]


def lstm_fitter(seqs: list[np.ndarray], targets: np.ndarray, config: model.TrainConfig):
    result = model.train(seqs, targets, config)
    return lambda xs: model.predict(result.params, xs, config.relu), result


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    model: dict[str, float]
    baseline: dict[str, float]
    baseline_value: float
    loss_trace: list[float] = field(default_factory=list)


@dataclass
class EvalReport:
    task: str
    algorithm: str
    feature_set: str
    folds: list[FoldResult]
    skipped_folds: list[int] = field(default_factory=list)
    unit: str = "sample (subject-week)"

    def values(self, metric: str, which: str = "model") -> np.ndarray:
        return np.array([getattr(f, which)[metric] for f in self.folds])

    def mean(self, metric: str, which: str = "model") -> float:
        return float(np.mean(self.values(metric, which)))

    def std(self, metric: str, which: str = "model") -> float:
        """Population standard deviation across folds."""
        return float(np.std(self.values(metric, which)))


def _run_fold(args) -> FoldResult | None:
    i, train, test, config, feature_set, fitter = args
    if not test:
        return None
    stats = NormStats.fit(train)
    # prefix augmentation, when configured, happens inside training as a per-day loss
    x_train = dataset.prepare(train, stats, feature_set)
    y_train = np.array([s.target for s in train])
    fitted = fitter(x_train, y_train, config)
    predict_fn, trace = fitted if isinstance(fitted, tuple) else (fitted, None)
    preds = np.clip(predict_fn(dataset.prepare(test, stats, feature_set)), 0.0, PHQ_MAX)
    targets = np.array([s.target for s in test])
    base = baseline_predict([s.target for s in train])
    return FoldResult(
        i,
        len(train),
        len(test),
        metrics(preds, targets),
        metrics(np.full(len(test), base), targets),
        base,
        list(trace.loss_trace) if trace is not None else [],
    )


def split_samples(samples: Sequence[Sample], plan: FoldPlan, i: int) -> tuple[list[Sample], list[Sample]]:
    train_ids, test_ids = plan.split(i)
    train = [s for s in samples if s.subject in train_ids]
    test = [s for s in samples if s.subject in test_ids]
    return train, test


def evaluate_cv(
    samples: Sequence[Sample],
    plan: FoldPlan,
    config: model.TrainConfig = model.TrainConfig(),
    feature_set: str = "all",
    algorithm: str = "",
    fitter: Fitter = lstm_fitter,
    n_jobs: int = 1,
) -> EvalReport:
    """Train on k-1 folds, score the held-out fold, for every fold of ``plan``.

    Normalisation statistics and the baseline mean come from the training
    folds only. Folds are independent, so ``n_jobs > 1`` runs them in worker
    processes with identical results.
    """
    if not samples:
        raise ValueError("no samples to evaluate")
    tasks = {s.task for s in samples}
    if len(tasks) != 1:
        raise ValueError(f"samples mix tasks {sorted(tasks)}")
    jobs = []
    for i in range(plan.k):
        train, test = split_samples(samples, plan, i)
        jobs.append((i, train, test, config, feature_set, fitter))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    skipped = [i for i, r in enumerate(results) if r is None]
    for i in skipped:
        log.warning("fold %d has no test samples; skipped", i)
    return EvalReport(tasks.pop(), algorithm, feature_set, [r for r in results if r is not None], skipped)


def feature_ablation(
    samples: Sequence[Sample],
    plan: FoldPlan,
    feature_sets: Sequence[str],
    config: model.TrainConfig = model.TrainConfig(),
    algorithm: str = "",
    fitter: Fitter = lstm_fitter,
    n_jobs: int = 1,
) -> dict[str, EvalReport]:
    if not feature_sets:
        raise ValueError("at least one feature set is required")
    return {fs: evaluate_cv(samples, plan, config, fs, algorithm, fitter, n_jobs) for fs in feature_sets}


# -- reports ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_report(path: Path | str, reports: Sequence[EvalReport]) -> None:
    """Baseline row plus one model row, columns task x metric with fold std."""
    by_task = {r.task: r for r in reports}
    tasks = [t for t in dataset.TASKS if t in by_task]
    header = ["model"]
    for m in METRICS:
        for t in tasks:
            header += [f"{m}_{t}", f"{m}_{t}_std"]
    rows = []
    for label, which in (("baseline", "baseline"), (reports[0].algorithm or "lstm", "model")):
        row = [label]
        for m in METRICS:
            for t in tasks:
                r = by_task[t]
                row += [_fmt(r.mean(m, which)), _fmt(r.std(m, which))]
        rows.append(row)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_fold_table(path: Path | str, reports: Sequence[EvalReport]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task", "feature_set", "fold", "n_train", "n_test", "which", *METRICS, "baseline_value"])
        for r in reports:
            for f in r.folds:
                for which in ("model", "baseline"):
                    vals = getattr(f, which)
                    writer.writerow(
                        [r.task, r.feature_set, f.fold, f.n_train, f.n_test, which, *(_fmt(vals[m]) for m in METRICS), _fmt(f.baseline_value)]
                    )


def write_ablation(path: Path | str, reports: Iterable[EvalReport]) -> None:
    """One row per (task, feature set) with model means, fold std and the baseline RMSE."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task", "feature_set", *(f"{m}{s}" for m in METRICS for s in ("", "_std")), "baseline_rmse"])
        for r in reports:
            row = [r.task, r.feature_set, *(_fmt(v) for m in METRICS for v in (r.mean(m), r.std(m)))]
            writer.writerow([*row, _fmt(r.mean("rmse", "baseline"))])
