"""Command-line interface.

Subcommands: ingest, metrics, analyze, extract, codebook, train, evaluate,
experiment, report. Exit codes: 0 success, 2 input/validation error, 1
runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import date

import numpy as np

from . import __version__
from .analytics import (
    debut_vs_max_profile,
    decadal_cdf,
    metric_histogram,
    reference_stats_check,
    top_rank_proportion_by_debut,
)
from .bof import BofCodebook, bof_features, extract_mfcc_frames
from .chart import histories_from_json, histories_to_json, load_chart
from .dsp import read_wav
from .experiment import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    FeatureTable,
    compute_codebook,
    emit_reports,
    extract_complexity_table,
    read_audio_manifest,
    run_experiments,
)
from .learn import (
    LabeledDataset,
    TrainedModel,
    evaluate_model,
    standardize_apply,
    standardize_fit,
    train_logistic,
    train_svm_rbf,
)
from .metrics import METRIC_NAMES, compute_all_metrics, metrics_from_csv, metrics_to_csv


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (experiment subcommand)")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for extraction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="popmetrics", description=__doc__)
    parser.add_argument("--version", action="version", version=f"popmetrics {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a chart CSV into filtered song histories")
    p.add_argument("--chart", required=True)
    p.add_argument("--max-rank", type=int, default=100)
    p.add_argument("--min-weeks", type=int, default=3)
    p.add_argument("--out", required=True, help="histories JSON path")
    _common_flags(p)

    p = sub.add_parser("metrics", help="compute the eight popularity metrics per song")
    p.add_argument("--chart", help="chart CSV (ingests on the fly)")
    p.add_argument("--histories", help="histories JSON from `ingest`")
    p.add_argument("--max-rank", type=int, default=100)
    p.add_argument("--min-weeks", type=int, default=3)
    p.add_argument("--out", required=True, help="metrics CSV path")
    _common_flags(p)

    p = sub.add_parser("analyze", help="chart analyses over a metrics CSV")
    p.add_argument("--kind", required=True,
                   choices=["histogram", "decadal", "debut-max", "top-rank", "stats-check"])
    p.add_argument("--metrics-csv")
    p.add_argument("--histories", help="histories JSON (decadal analysis)")
    p.add_argument("--metric", choices=METRIC_NAMES)
    p.add_argument("--edges", help="comma-separated histogram bin edges")
    p.add_argument("--periods", help="comma-separated DATE:DATE intervals (decadal)")
    p.add_argument("--max-rank", type=int, default=100)
    p.add_argument("--out", required=True)
    _common_flags(p)

    p = sub.add_parser("extract", help="extract audio features for a song manifest")
    p.add_argument("--manifest", required=True, help="CSV with header song_id,wav_path")
    p.add_argument("--features", choices=["complexity", "mfcc-frames"], default="complexity")
    p.add_argument("--out", help="feature CSV path (complexity)")
    p.add_argument("--out-dir", help="directory for per-song .npy frames (mfcc-frames)")
    _common_flags(p)

    p = sub.add_parser("codebook", help="fit the bag-of-frames codebook on training songs")
    p.add_argument("--frames-dir", required=True, help="directory of per-song .npy frame files")
    p.add_argument("--train-ids", required=True, help="text file, one song_id per line")
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--max-frames", type=int)
    p.add_argument("--out", required=True, help="codebook JSON path")
    _common_flags(p)

    p = sub.add_parser("bof", help="bag-of-frames histograms from frames and a codebook")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--out", required=True, help="BOF feature CSV path")
    _common_flags(p)

    p = sub.add_parser("train", help="train a classifier on a feature CSV + label CSV")
    p.add_argument("--features", required=True, help="song_id-keyed feature CSV")
    p.add_argument("--labels", required=True, help="CSV with header song_id,label (+1/-1)")
    p.add_argument("--kind", choices=["svm_rbf", "logistic"], default="svm_rbf")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--out", required=True, help="model JSON path")
    _common_flags(p)

    p = sub.add_parser("evaluate", help="evaluate a trained model on features + labels")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--n-resamples", type=int, default=1000)
    p.add_argument("--out", required=True, help="evaluation report JSON path")
    _common_flags(p)

    p = sub.add_parser("experiment", help="run the configured experiments end to end")
    p.add_argument("--kind", choices=list(EXPERIMENT_KINDS) + ["all"], default="all")
    _common_flags(p)

    p = sub.add_parser("report", help="regenerate summary CSVs from per-cell JSONs")
    p.add_argument("--output-dir", required=True)
    _common_flags(p)

    return parser


def _read_labels_csv(path) -> dict[str, int]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["song_id", "label"]:
            raise ValueError(f"{path}: expected header song_id,label")
        labels = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2 or row[1] not in ("1", "+1", "-1"):
                raise ValueError(f"{path} line {lineno}: labels must be +1 or -1")
            labels[row[0]] = int(row[1])
    return labels


def _dataset_from_files(features_path, labels_path) -> LabeledDataset:
    table = FeatureTable.read_csv(features_path)
    labels = _read_labels_csv(labels_path)
    ids = [sid for sid in table.rows if sid in labels]
    if not ids:
        raise ValueError("no songs common to the feature and label files")
    return LabeledDataset(
        features=np.array([table.rows[sid] for sid in ids]),
        labels=np.array([labels[sid] for sid in ids]),
        song_ids=ids,
        feature_names=table.feature_names,
    )


def _cmd_ingest(args) -> int:
    histories = load_chart(args.chart, args.max_rank, args.min_weeks)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(histories_to_json(histories), f, indent=2)
    print(f"wrote {len(histories)} histories to {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    if bool(args.chart) == bool(args.histories):
        raise ValueError("give exactly one of --chart or --histories")
    if args.chart:
        histories = load_chart(args.chart, args.max_rank, args.min_weeks)
    else:
        with open(args.histories, "r", encoding="utf-8") as f:
            histories = histories_from_json(json.load(f))
    metrics = compute_all_metrics(histories)
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        metrics_to_csv(metrics, f)
    print(f"wrote metrics for {len(metrics)} songs to {args.out}")
    return 0


def _parse_periods(text: str) -> list[tuple[date, date]]:
    periods = []
    for part in text.split(","):
        try:
            start_s, end_s = part.split(":")
            periods.append((date.fromisoformat(start_s), date.fromisoformat(end_s)))
        except ValueError:
            raise ValueError(f"bad period {part!r}; expected YYYY-MM-DD:YYYY-MM-DD") from None
    return periods


def _cmd_analyze(args) -> int:
    if args.kind == "decadal":
        if not (args.histories and args.metric and args.periods):
            raise ValueError("decadal analysis needs --histories, --metric, and --periods")
        with open(args.histories, "r", encoding="utf-8") as f:
            histories = histories_from_json(json.load(f))
        cdfs = decadal_cdf(histories, _parse_periods(args.periods), args.metric)
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["period_start", "period_end", "value", "cumulative_fraction"])
            for (start, end), cdf in cdfs.items():
                for v, c in zip(cdf.values, cdf.cumulative_fraction):
                    w.writerow([start, end, repr(float(v)), repr(float(c))])
        return 0

    if not args.metrics_csv:
        raise ValueError(f"--metrics-csv is required for {args.kind}")
    with open(args.metrics_csv, "r", encoding="utf-8", newline="") as f:
        metrics = metrics_from_csv(f)

    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        if args.kind == "histogram":
            if not (args.metric and args.edges):
                raise ValueError("histogram needs --metric and --edges")
            edges = [float(e) for e in args.edges.split(",")]
            hist = metric_histogram([m.value(args.metric) for m in metrics], edges)
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(hist.bin_edges, hist.bin_edges[1:], hist.counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        elif args.kind == "debut-max":
            w.writerow(["debut", "mean_max", "std_max", "count"])
            for debut, (mean_max, std_max, count) in debut_vs_max_profile(metrics).items():
                w.writerow([debut, repr(mean_max), repr(std_max), count])
        elif args.kind == "top-rank":
            w.writerow(["debut", "fraction_reached_top"])
            for debut, frac in top_rank_proportion_by_debut(metrics, args.max_rank).items():
                w.writerow([debut, repr(frac)])
        elif args.kind == "stats-check":
            report = reference_stats_check(metrics)
            w.writerow(["statistic", "observed", "reference", "pass"])
            for key, entry in report.items():
                w.writerow([key, repr(entry["observed"]), repr(entry["reference"]),
                            int(entry["pass"])])
            for key, entry in report.items():
                status = "PASS" if entry["pass"] else "FAIL"
                print(f"{key}: observed={entry['observed']:.4g} "
                      f"reference={entry['reference']} [{status}]")
    return 0


def _cmd_extract(args) -> int:
    manifest = read_audio_manifest(args.manifest)
    song_ids = list(manifest)
    if args.features == "complexity":
        if not args.out:
            raise ValueError("complexity extraction needs --out")
        table = extract_complexity_table(manifest, song_ids, jobs=args.jobs)
        table.write_csv(args.out)
        print(f"wrote complexity features for {len(song_ids)} songs to {args.out}")
    else:
        if not args.out_dir:
            raise ValueError("mfcc-frames extraction needs --out-dir")
        os.makedirs(args.out_dir, exist_ok=True)
        for sid in song_ids:
            frames = extract_mfcc_frames(read_wav(manifest[sid]))
            np.save(os.path.join(args.out_dir, f"{sid}.npy"), frames)
        print(f"wrote MFCC frames for {len(song_ids)} songs to {args.out_dir}")
    return 0


def _load_frames_dir(frames_dir) -> dict[str, np.ndarray]:
    frames = {}
    for name in sorted(os.listdir(frames_dir)):
        if name.endswith(".npy"):
            frames[name[:-4]] = np.load(os.path.join(frames_dir, name))
    if not frames:
        raise ValueError(f"no .npy frame files in {frames_dir}")
    return frames


def _cmd_codebook(args) -> int:
    frames = _load_frames_dir(args.frames_dir)
    with open(args.train_ids, "r", encoding="utf-8") as f:
        train_ids = [line.strip() for line in f if line.strip()]
    codebook = compute_codebook(
        frames, train_ids, k=args.k, max_frames=args.max_frames, seed=args.seed or 0
    )
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(codebook.to_json())
    print(f"fit k={args.k} codebook on {len(train_ids)} songs "
          f"(inertia {codebook.inertia:.6g}, {codebook.n_iter} iterations)")
    return 0


def _cmd_bof(args) -> int:
    frames = _load_frames_dir(args.frames_dir)
    with open(args.codebook, "r", encoding="utf-8") as f:
        codebook = BofCodebook.from_json(f.read())
    table = FeatureTable(
        feature_names=[f"BOF{i}" for i in range(1, codebook.k + 1)],
        rows={sid: bof_features(f, codebook).frequencies for sid, f in frames.items()},
    )
    table.write_csv(args.out)
    print(f"wrote BOF features for {len(frames)} songs to {args.out}")
    return 0


def _cmd_train(args) -> int:
    data = _dataset_from_files(args.features, args.labels)
    stats = standardize_fit(data.features)
    standardized = LabeledDataset(
        features=standardize_apply(stats, data.features),
        labels=data.labels,
        song_ids=data.song_ids,
        feature_names=data.feature_names,
    )
    if args.kind == "svm_rbf":
        model = train_svm_rbf(standardized, C=args.C, gamma=args.gamma)
    else:
        model = train_logistic(standardized, l2=args.l2)
    model.standardization = stats
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(model.to_json())
    print(f"trained {args.kind} on {data.n} songs -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    with open(args.model, "r", encoding="utf-8") as f:
        model = TrainedModel.from_json(f.read())
    data = _dataset_from_files(args.features, args.labels)
    report = evaluate_model(model, data, n_resamples=args.n_resamples, seed=args.seed or 0)
    payload = report.to_dict()
    payload["seed"] = args.seed or 0
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    print(f"balanced accuracy {report.balanced_accuracy:.4f} "
          f"(p={report.p_value:.4f}) -> {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    if not args.config:
        raise ValueError("experiment needs --config")
    config = ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.jobs and args.jobs > 1:
        config.jobs = args.jobs
    kinds = list(EXPERIMENT_KINDS) if args.kind == "all" else [args.kind]
    results = run_experiments(config, kinds)
    written = emit_reports(results, config, config.output_dir)
    print(f"ran {', '.join(kinds)}; wrote {len(written)} files under {config.output_dir}")
    return 0


def _cmd_report(args) -> int:
    cells_dir = os.path.join(args.output_dir, "cells")
    if not os.path.isdir(cells_dir):
        raise ValueError(f"{cells_dir} does not exist")
    by_kind: dict[str, dict] = {}
    for name in sorted(os.listdir(cells_dir)):
        if not name.endswith(".json"):
            continue
        kind, label, metric = name[:-5].split("__")
        with open(os.path.join(cells_dir, name), "r", encoding="utf-8") as f:
            cell = json.load(f)
        by_kind.setdefault(kind, {}).setdefault(label, {})[metric] = cell["balanced_accuracy"]
    for kind, rows in by_kind.items():
        metrics = [m for m in METRIC_NAMES if any(m in r for r in rows.values())]
        path = os.path.join(args.output_dir, f"{kind}.csv")
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["feature_set"] + metrics)
            for label, cells in rows.items():
                w.writerow([label] + [repr(cells[m]) if m in cells else "" for m in metrics])
        print(f"regenerated {path}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "metrics": _cmd_metrics,
    "analyze": _cmd_analyze,
    "extract": _cmd_extract,
    "codebook": _cmd_codebook,
    "bof": _cmd_bof,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
