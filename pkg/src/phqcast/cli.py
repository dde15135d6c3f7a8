"""Command-line entry point: ``phqcast synth | extract | run | verify``.

Every option can also come from a JSON file passed with ``--config``; keys
are the option names with dashes replaced by underscores, and flags given on
the command line win over the file.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, dataset, evaluation, features, geo, ingestion, model, synth

log = logging.getLogger("phqcast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
FEATURE_SETS = ("calls", "usage", "activity", "gps", "all")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _positive(kind):
    def parse(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return parse


def _cluster_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cluster", choices=geo.ALGORITHMS, default="kmeans", help="significant-place algorithm")
    p.add_argument("--distance", type=_positive(float), default=geo.TIME_DISTANCE_M, help="time-based join distance (m)")
    p.add_argument("--duration", type=_positive(float), default=geo.TIME_DURATION_S, help="time-based minimum stay (s)")
    p.add_argument("--radius", type=_positive(float), default=geo.KMEANS_RADIUS_M, help="k-means radius (m)")
    p.add_argument("--eps", type=_positive(float), default=geo.DBSCAN_EPS_M, help="DBSCAN eps (m)")
    p.add_argument("--min-samples", type=_positive(int), default=geo.DBSCAN_MIN_SAMPLES, help="DBSCAN min samples")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="phqcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic cohort with ground truth")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--subjects", type=_positive(int), default=48)
    p.add_argument("--weeks", type=_positive(int), default=8)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--walk-sd", type=float, default=synth.SynthConfig.walk_sd)
    p.add_argument("--effects", type=json.loads, default=None, help='JSON, e.g. {"activity": 1.0}')
    p.add_argument("--pattern", choices=("default", "home_work"), default="default")
    synth_parser = p

    p = sub.add_parser("extract", help="ingest a cohort and write the daily feature matrix")
    p.add_argument("--config", type=Path)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--days", type=_positive(int), default=None, help="study days per subject (default: last observed)")
    _cluster_options(p)
    extract_parser = p

    p = sub.add_parser("run", help="cross-validate the LSTM against the mean baseline")
    p.add_argument("--config", type=Path)
    p.add_argument("--input", type=Path, required=True, help="output directory of 'extract'")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--task", choices=(*dataset.TASKS, "both"), default="both")
    p.add_argument("--features", choices=FEATURE_SETS, default="all", help="input feature set")
    p.add_argument("--ablation", action="store_true", help="also evaluate every feature set")
    p.add_argument("--cluster", choices=geo.ALGORITHMS, default=None, help="must match the extraction")
    p.add_argument("--folds", type=_positive(int), default=10)
    p.add_argument("--fold-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0, help="model initialisation and shuffling")
    p.add_argument("--epochs", type=_positive(int), default=model.TrainConfig.epochs)
    p.add_argument("--batch-size", type=_positive(int), default=model.TrainConfig.batch_size)
    p.add_argument("--hidden", type=_positive(int), default=model.HIDDEN)
    p.add_argument("--lr", type=_positive(float), default=model.LEARNING_RATE)
    p.add_argument("--patience", type=_positive(int), default=None)
    p.add_argument("--relu", choices=("output", "hidden"), default="output")
    p.add_argument("--output-bias-init", choices=("mean", "uniform"), default="mean")
    p.add_argument("--prefix-augment", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--jobs", type=_positive(int), default=1, help="folds trained in parallel")
    run_parser = p

    p = sub.add_parser("verify", help="check extraction on a synthetic cohort against its truth")
    p.add_argument("--config", type=Path)
    p.add_argument("--cohort", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="discrepancy CSV")
    _cluster_options(p)
    verify_parser = p

    return parser, {"synth": synth_parser, "extract": extract_parser, "run": run_parser, "verify": verify_parser}


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if known.config is None or command not in subs:
        return parser.parse_args(argv)
    try:
        doc = json.loads(known.config.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    sub = subs[command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    unknown = sorted(set(doc) - set(actions))
    if unknown:
        raise UsageError(f"unknown config keys for {command!r}: {unknown}")
    for key, value in doc.items():
        action = actions[key]
        # values from the file pass the same checks as flags
        if action.type is not None and isinstance(value, (str, int, float)) and not isinstance(value, bool):
            try:
                doc[key] = action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
        if action.choices is not None and doc[key] not in action.choices:
            raise UsageError(f"config key {key!r}: {value!r} is not one of {list(action.choices)}")
        action.required = False
    sub.set_defaults(**doc)
    return parser.parse_args(argv)


def _cluster_params(args: argparse.Namespace) -> dict:
    if args.cluster == "time_based":
        return {"distance_m": args.distance, "duration_s": args.duration}
    if args.cluster == "kmeans":
        return {"radius_m": args.radius}
    return {"eps_m": args.eps, "min_samples": args.min_samples}


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _metadata(args: argparse.Namespace, **extra) -> dict:
    """Resolved configuration plus versions; deliberately free of timestamps."""
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "verbose"}
    versions = {"phqcast": __version__, "numpy": np.__version__, "python": platform.python_version()}
    return {"config": config, "versions": versions, **extra}


# -- commands -----------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    kwargs = {"n_subjects": args.subjects, "n_weeks": args.weeks, "seed": args.seed, "noise": args.noise}
    kwargs |= {"walk_sd": args.walk_sd, "pattern": args.pattern}
    if args.effects is not None:
        kwargs["effects"] = args.effects
    try:
        cfg = synth.SynthConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    truth = synth.generate(cfg, args.out)
    log.info("wrote %d subjects, %d feature rows to %s", cfg.n_subjects, len(truth.features), args.out)
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    manifest = ingestion.read_manifest(args.manifest)
    if not manifest.subjects:
        raise DataError(f"{args.manifest}: empty cohort, no subjects listed")
    cohort = ingestion.load_cohort(manifest)
    params = _cluster_params(args)
    rows, places, cutoff = features.extract_cohort(cohort.logs, args.cluster, args.days, **params)
    out = args.out
    (out / "places").mkdir(parents=True, exist_ok=True)
    features.write_features(out / "features.csv", rows)
    ingestion.write_stream(out / "phq.csv", "phq", cohort.phq)
    ingestion.write_rejections(out / "rejections.csv", cohort.rejections)
    for sid, sp in places.items():
        geo.write_places(out / "places" / f"{sid.id}.csv", sp)
    summary = [
        {"subject": s.subject.id, "counts": s.counts, "days_covered": s.days_covered, "rejected": s.rejected, "flagged": s.flagged}
        for s in cohort.summaries
    ]
    _write_json(
        out / "metadata.json",
        _metadata(args, algorithm=args.cluster, cluster_params=params, accuracy_cutoff=cutoff, subjects=summary),
    )
    log.info("%d subjects, %d feature rows, %d rejected rows", len(cohort.logs), len(rows), len(cohort.rejections))
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    meta_path = args.input / "metadata.json"
    algorithm = json.loads(meta_path.read_text(encoding="utf-8"))["algorithm"] if meta_path.exists() else ""
    if args.cluster is not None and algorithm and args.cluster != algorithm:
        raise UsageError(f"--cluster {args.cluster} does not match the extraction ({algorithm})")
    algorithm = args.cluster or algorithm
    rows = features.read_features(args.input / "features.csv")
    phq, rejected = ingestion.parse_stream(args.input / "phq.csv", "phq")
    if len(rejected):
        raise DataError(f"{args.input / 'phq.csv'}: {len(rejected)} malformed rows")
    config = model.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        patience=args.patience,
        prefix_augment=args.prefix_augment,
        relu=args.relu,
        output_bias_init=args.output_bias_init,
        hidden=args.hidden,
        lr=args.lr,
    )
    tasks = dataset.TASKS if args.task == "both" else (args.task,)
    out = args.out
    (out / "loss").mkdir(parents=True, exist_ok=True)
    reports, ablation, plans = [], [], {}
    for task in tasks:
        samples = dataset.build_samples(rows, phq, task)
        if not samples:
            raise DataError(f"no {task} samples: no subject has both features and matching PHQ-9 scores")
        plan = dataset.subject_kfold({s.subject for s in samples}, args.folds, args.fold_seed)
        plans[task] = plan
        # for inspection only: training always re-fits statistics on its own folds
        dataset.write_samples(out / f"samples_{task}.csv", samples, dataset.NormStats.fit(samples))
        sets = FEATURE_SETS if args.ablation else (args.features,)
        for fs in sets:
            report = evaluation.evaluate_cv(samples, plan, config, fs, algorithm, n_jobs=args.jobs)
            if fs == args.features:
                reports.append(report)
            ablation.append(report)
            for f in report.folds:
                model.write_loss_trace(out / "loss" / f"{task}_{fs}_fold{f.fold}.csv", f.loss_trace)
            log.info("%s/%s: rmse %.3f (baseline %.3f)", task, fs, report.mean("rmse"), report.mean("rmse", "baseline"))
    evaluation.write_report(out / "report.csv", reports)
    evaluation.write_fold_table(out / "folds.csv", ablation)
    if args.ablation:
        evaluation.write_ablation(out / "ablation.csv", ablation)
    for task, plan in plans.items():
        dataset.write_folds(out / f"folds_{task}.json", plan)
    skipped = {f"{r.task}/{r.feature_set}": r.skipped_folds for r in ablation if r.skipped_folds}
    _write_json(
        out / "metadata.json",
        _metadata(args, algorithm=algorithm, train_config=asdict(config), accuracy_unit=reports[0].unit, skipped_folds=skipped),
    )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    diffs = synth.verify_pipeline(args.cohort, args.cluster, **_cluster_params(args))
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        synth.write_discrepancies(args.out, diffs)
    print(f"{len(diffs)} discrepancies ({args.cluster})")
    for d in diffs[:20]:
        print(f"  {d.subject} day {d.day} {d.feature}: expected {d.expected!r}, got {d.actual!r}")
    return EXIT_OK if not diffs else EXIT_DATA


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "run": cmd_run, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"phqcast: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"phqcast: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except model.TrainingDiverged as exc:
        print(f"phqcast: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, OSError, ValueError) as exc:
        print(f"phqcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
