"""End-to-end experiments: temporal splitting, label construction, feature
assembly, grid-searched training, evaluation, and report emission.

Songs are split by debut week into train/validation/test periods (70/15/15 of
the chart period by default). Binary labels come from the training-split
median of each popularity metric. Everything derived from data (codebook,
medians, standardization) is computed from the training split alone.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .analytics import group_agreement_matrix
from .bof import BOF_FEATURE_NAMES, BofCodebook, bof_features, extract_mfcc_frames, fit_codebook
from .chart import SongHistory, load_chart
from .complexity import COMPLEXITY_FEATURE_NAMES, complexity_vector
from .dsp import read_wav
from .learn import (
    DEFAULT_C_GRID,
    DEFAULT_GAMMA_GRID,
    DEFAULT_L2_GRID,
    EvalReport,
    LabeledDataset,
    balanced_accuracy,
    evaluate_model,
    grid_search,
    median_split_labels,
    standardize_apply,
    standardize_fit,
    train_logistic,
    train_svm_rbf,
)
from .metrics import METRIC_NAMES, PopularityMetrics, compute_all_metrics

EXPERIMENT_KINDS = ("single", "group", "combined")

GROUP_FEATURE_SETS = [["complexity"], ["bof"]]
COMBINED_FEATURE_SETS = [["complexity", "bof"], ["complexity", "bof", "debut"]]


@dataclass
class ExperimentConfig:
    chart_path: str
    output_dir: str
    audio_manifest: str | None = None
    complexity_csv: str | None = None  # precomputed feature bypass
    bof_csv: str | None = None
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    metrics: list[str] = field(default_factory=lambda: list(METRIC_NAMES))
    classifier: str = "svm_rbf"
    c_grid: list[float] = field(default_factory=lambda: list(DEFAULT_C_GRID))
    gamma_grid: list[float] = field(default_factory=lambda: list(DEFAULT_GAMMA_GRID))
    l2_grid: list[float] = field(default_factory=lambda: list(DEFAULT_L2_GRID))
    seed: int = 0
    n_resamples: int = 1000
    max_rank: int = 100
    min_weeks: int = 3
    codebook_k: int = 32
    codebook_max_frames: int | None = None
    label_permutation_seed: int | None = None  # set to run a shuffled-label control
    jobs: int = 1

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if len(fr) != 3 or any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"fractions must be three positive values summing to 1, got {fr}")
        self.fractions = fr
        unknown = [m for m in self.metrics if m not in METRIC_NAMES]
        if unknown:
            raise ValueError(f"unknown metrics {unknown}; valid names: {METRIC_NAMES}")
        if self.classifier not in ("svm_rbf", "logistic"):
            raise ValueError(f"unknown classifier {self.classifier!r}")

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        valid = set(cls.__dataclass_fields__)
        unknown = set(raw) - valid
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        d = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            d[name] = list(v) if isinstance(v, tuple) else v
        return d


@dataclass
class FeatureTable:
    feature_names: list[str]
    rows: dict[str, np.ndarray]  # song_id -> feature vector

    def column(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ValueError(f"unknown feature {name!r}") from None

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["song_id"] + self.feature_names)
            for sid, vec in self.rows.items():
                w.writerow([sid] + [repr(float(v)) for v in vec])

    @classmethod
    def read_csv(cls, path) -> "FeatureTable":
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if not header or header[0] != "song_id":
                raise ValueError(f"{path}: expected a song_id-keyed feature CSV")
            names = header[1:]
            rows = {}
            for row in reader:
                rows[row[0]] = np.array([float(v) for v in row[1:]])
        return cls(feature_names=names, rows=rows)


def read_audio_manifest(path) -> dict[str, str]:
    """song_id -> wav path; relative paths resolve against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["song_id", "wav_path"]:
            raise ValueError(f"{path}: expected header song_id,wav_path")
        manifest = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValueError(f"{path} line {lineno}: expected 2 columns")
            sid, wav = row
            if sid in manifest:
                raise ValueError(f"{path} line {lineno}: duplicate song_id {sid!r}")
            manifest[sid] = wav if os.path.isabs(wav) else os.path.join(base, wav)
    return manifest


def temporal_split(
    histories: list[SongHistory], fractions=(0.70, 0.15, 0.15)
) -> tuple[list[str], list[str], list[str]]:
    """Partition songs by debut week into train/validation/test periods.

    The chart period (first to last charted week over all songs) is cut at the
    cumulative fraction points; each song goes to the period containing its
    debut week. Returns three song_id lists covering every song exactly once.
    """
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fr}")
    if not histories:
        raise ValueError("no histories to split")
    first = min(h.weeks[0] for h in histories)
    last = max(h.weeks[-1] for h in histories)
    total_days = (last - first).days

    train, validation, test = [], [], []
    for h in histories:
        offset = (h.debut_week - first).days
        if total_days == 0 or offset < fr[0] * total_days:
            train.append(h.song_id)
        elif offset < (fr[0] + fr[1]) * total_days:
            validation.append(h.song_id)
        else:
            test.append(h.song_id)
    return train, validation, test


def pool_training_frames(
    frames_by_song: dict[str, np.ndarray],
    train_ids: list[str],
    max_frames: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Stack training songs' MFCC frames (in split order), optionally
    subsampling without replacement to cap the clustering workload."""
    missing = [sid for sid in train_ids if sid not in frames_by_song]
    if missing:
        raise ValueError(f"missing MFCC frames for songs: {missing}")
    pooled = np.vstack([frames_by_song[sid] for sid in train_ids])
    if max_frames is not None and pooled.shape[0] > max_frames:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(pooled.shape[0], size=max_frames, replace=False))
        pooled = pooled[keep]
    return pooled


def compute_codebook(
    frames_by_song: dict[str, np.ndarray],
    train_ids: list[str],
    k: int = 32,
    max_frames: int | None = None,
    seed: int = 0,
) -> BofCodebook:
    """Codebook from training-split frames only (the no-leakage boundary)."""
    pooled = pool_training_frames(frames_by_song, train_ids, max_frames=max_frames, seed=seed)
    return fit_codebook(pooled, k=k, seed=seed)


def compute_medians(
    metrics_by_song: dict[str, PopularityMetrics],
    train_ids: list[str],
    metric_names: list[str],
) -> dict[str, float]:
    """Per-metric median over the training split (the label thresholds)."""
    missing = [sid for sid in train_ids if sid not in metrics_by_song]
    if missing:
        raise ValueError(f"missing metrics for songs: {missing}")
    out = {}
    for name in metric_names:
        values = np.array([metrics_by_song[sid].value(name) for sid in train_ids])
        out[name] = float(np.median(values))
    return out


def expand_feature_tokens(tokens: list[str]) -> list[str]:
    """Expand feature-set tokens to the full ordered column-name list."""
    names = []
    for token in tokens:
        if token == "complexity":
            names.extend(COMPLEXITY_FEATURE_NAMES)
        elif token == "bof":
            names.extend(BOF_FEATURE_NAMES)
        elif token == "debut":
            names.append("Debut")
        elif token in COMPLEXITY_FEATURE_NAMES or token in BOF_FEATURE_NAMES:
            names.append(token)
        else:
            raise ValueError(
                f"unknown feature token {token!r}; expected 'complexity', 'bof', "
                f"'debut', or a single feature name"
            )
    if not names:
        raise ValueError("empty feature set")
    return names


def build_labeled_dataset(
    song_ids: list[str],
    metric_name: str,
    feature_tokens: list[str],
    metrics_by_song: dict[str, PopularityMetrics],
    medians: dict[str, float],
    complexity_table: FeatureTable | None = None,
    bof_table: FeatureTable | None = None,
) -> LabeledDataset:
    """Assemble one split's features (in declared token order) and labels."""
    names = expand_feature_tokens(feature_tokens)

    def lookup(table: FeatureTable | None, what: str, sid: str) -> np.ndarray:
        if table is None:
            raise ValueError(f"feature set requires {what} features but none were provided")
        if sid not in table.rows:
            missing = [s for s in song_ids if s not in table.rows]
            raise ValueError(f"missing {what} features for songs: {missing}")
        return table.rows[sid]

    rows = []
    for sid in song_ids:
        parts = []
        for token in feature_tokens:
            if token == "complexity":
                parts.append(lookup(complexity_table, "complexity", sid))
            elif token == "bof":
                parts.append(lookup(bof_table, "bof", sid))
            elif token == "debut":
                parts.append([float(metrics_by_song[sid].debut)])
            elif token in COMPLEXITY_FEATURE_NAMES:
                vec = lookup(complexity_table, "complexity", sid)
                parts.append([vec[complexity_table.column(token)]])
            else:
                vec = lookup(bof_table, "bof", sid)
                parts.append([vec[bof_table.column(token)]])
        rows.append(np.concatenate(parts))

    values = np.array([metrics_by_song[sid].value(metric_name) for sid in song_ids])
    labels = median_split_labels(values, medians[metric_name])
    return LabeledDataset(
        features=np.array(rows),
        labels=labels,
        song_ids=list(song_ids),
        feature_names=names,
    )


@dataclass
class CellResult:
    feature_set: list[str]
    metric: str
    classifier: str
    params: dict
    report: EvalReport
    seed: int
    test_correct: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        d = {
            "feature_set": self.feature_set,
            "metric": self.metric,
            "classifier": self.classifier,
            "params": self.params,
            "seed": self.seed,
        }
        d.update(self.report.to_dict())
        return d


def _cell_seed(base_seed: int, fs_idx: int, m_idx: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(fs_idx, m_idx))
    return int(ss.generate_state(1)[0])


def evaluate_cell(
    train: LabeledDataset,
    validation: LabeledDataset,
    test: LabeledDataset,
    config: ExperimentConfig,
    cell_seed: int,
) -> tuple[dict, EvalReport, np.ndarray]:
    """Standardize, grid-search on validation, retrain, evaluate on test.

    Returns (chosen params, test report, per-test-song correctness).
    """
    stats = standardize_fit(train.features)

    def z(ds: LabeledDataset) -> LabeledDataset:
        return replace(ds, features=standardize_apply(stats, ds.features))

    tr, va, te = z(train), z(validation), z(test)

    if config.classifier == "svm_rbf":
        c_best, gamma_best = grid_search(tr, va, config.c_grid, config.gamma_grid)
        model = train_svm_rbf(tr, C=c_best, gamma=gamma_best)
        params = {"C": c_best, "gamma": gamma_best}
    else:
        scored = []
        for l2 in sorted(config.l2_grid):
            candidate = train_logistic(tr, l2=l2)
            ba = balanced_accuracy(candidate.predict(va.features), va.labels).balanced_accuracy
            scored.append((ba, l2))
        best_l2 = min(scored, key=lambda s: (-s[0], s[1]))[1]
        model = train_logistic(tr, l2=best_l2)
        params = {"l2": best_l2}

    report = evaluate_model(model, te, n_resamples=config.n_resamples, seed=cell_seed)
    correct = model.predict(te.features) == te.labels
    return params, report, correct


@dataclass
class ExperimentResult:
    kind: str
    feature_sets: list[list[str]]
    metrics: list[str]
    cells: dict[tuple[str, str], CellResult]  # (feature set label, metric)
    agreement: np.ndarray | None = None
    agreement_groups: tuple[str, str] | None = None

    def cell(self, feature_set_label: str, metric: str) -> CellResult:
        return self.cells[(feature_set_label, metric)]


def feature_set_label(tokens: list[str]) -> str:
    return "+".join(tokens)


@dataclass
class PreparedData:
    histories: list[SongHistory]
    metrics_by_song: dict[str, PopularityMetrics]
    split: tuple[list[str], list[str], list[str]]
    medians: dict[str, float]
    complexity_table: FeatureTable | None
    bof_table: FeatureTable | None
    codebook: BofCodebook | None
    frames_by_song: dict[str, np.ndarray] | None


def _extract_complexity_one(args):
    sid, path = args
    return sid, complexity_vector(read_wav(path)).values


def _extract_frames_one(args):
    sid, path = args
    return sid, extract_mfcc_frames(read_wav(path))


def _map_jobs(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=4))
    return [fn(item) for item in items]


def extract_complexity_table(
    manifest: dict[str, str], song_ids: list[str], jobs: int = 1
) -> FeatureTable:
    missing = [sid for sid in song_ids if sid not in manifest]
    if missing:
        raise ValueError(f"audio manifest is missing songs: {missing}")
    results = _map_jobs(_extract_complexity_one, [(sid, manifest[sid]) for sid in song_ids], jobs)
    return FeatureTable(
        feature_names=list(COMPLEXITY_FEATURE_NAMES),
        rows={sid: values for sid, values in results},
    )


def extract_frames_by_song(
    manifest: dict[str, str], song_ids: list[str], jobs: int = 1
) -> dict[str, np.ndarray]:
    missing = [sid for sid in song_ids if sid not in manifest]
    if missing:
        raise ValueError(f"audio manifest is missing songs: {missing}")
    results = _map_jobs(_extract_frames_one, [(sid, manifest[sid]) for sid in song_ids], jobs)
    return dict(results)


def _permute_metrics(
    metrics_by_song: dict[str, PopularityMetrics], song_ids: list[str], seed: int
) -> dict[str, PopularityMetrics]:
    """Reassign metric records among songs (shuffled-label control runs)."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(song_ids))
    return {song_ids[i]: metrics_by_song[song_ids[perm[i]]] for i in range(len(song_ids))}


def prepare_data(config: ExperimentConfig, needs: set[str]) -> PreparedData:
    """Load the chart, split songs, compute labels' thresholds, and provide the
    feature tables a run needs ('complexity' and/or 'bof')."""
    histories = load_chart(config.chart_path, config.max_rank, config.min_weeks)
    song_ids = [h.song_id for h in histories]
    metrics_by_song = {m.song_id: m for m in compute_all_metrics(histories)}
    if config.label_permutation_seed is not None:
        metrics_by_song = _permute_metrics(
            metrics_by_song, song_ids, config.label_permutation_seed
        )

    train_ids, val_ids, test_ids = temporal_split(histories, config.fractions)
    overlap = set(train_ids) & (set(val_ids) | set(test_ids))
    if overlap:
        raise RuntimeError(f"split is not a partition; overlap: {sorted(overlap)}")
    medians = compute_medians(metrics_by_song, train_ids, config.metrics)

    manifest = None
    complexity_table = None
    bof_table = None
    codebook = None
    frames_by_song = None

    if "complexity" in needs:
        if config.complexity_csv:
            complexity_table = FeatureTable.read_csv(config.complexity_csv)
            if complexity_table.feature_names != list(COMPLEXITY_FEATURE_NAMES):
                raise ValueError(f"{config.complexity_csv}: unexpected feature columns")
        else:
            if not config.audio_manifest:
                raise ValueError("config needs audio_manifest or complexity_csv")
            manifest = read_audio_manifest(config.audio_manifest)
            complexity_table = extract_complexity_table(manifest, song_ids, config.jobs)

    if "bof" in needs:
        if config.bof_csv:
            bof_table = FeatureTable.read_csv(config.bof_csv)
            if bof_table.feature_names != list(BOF_FEATURE_NAMES):
                raise ValueError(f"{config.bof_csv}: unexpected feature columns")
        else:
            if not config.audio_manifest:
                raise ValueError("config needs audio_manifest or bof_csv")
            if manifest is None:
                manifest = read_audio_manifest(config.audio_manifest)
            frames_by_song = extract_frames_by_song(manifest, song_ids, config.jobs)
            codebook = compute_codebook(
                frames_by_song,
                train_ids,
                k=config.codebook_k,
                max_frames=config.codebook_max_frames,
                seed=config.seed,
            )
            bof_table = FeatureTable(
                feature_names=list(BOF_FEATURE_NAMES),
                rows={
                    sid: bof_features(frames_by_song[sid], codebook).frequencies
                    for sid in song_ids
                },
            )

    return PreparedData(
        histories=histories,
        metrics_by_song=metrics_by_song,
        split=(train_ids, val_ids, test_ids),
        medians=medians,
        complexity_table=complexity_table,
        bof_table=bof_table,
        codebook=codebook,
        frames_by_song=frames_by_song,
    )


def _needs_for(feature_sets: list[list[str]]) -> set[str]:
    needs = set()
    for tokens in feature_sets:
        for token in tokens:
            if token == "complexity" or token in COMPLEXITY_FEATURE_NAMES:
                needs.add("complexity")
            elif token == "bof" or token in BOF_FEATURE_NAMES:
                needs.add("bof")
    return needs


def _run_feature_sets(
    config: ExperimentConfig,
    kind: str,
    feature_sets: list[list[str]],
    data: PreparedData | None = None,
) -> ExperimentResult:
    if data is None:
        data = prepare_data(config, _needs_for(feature_sets))
    train_ids, val_ids, test_ids = data.split

    cells = {}
    for fs_idx, tokens in enumerate(feature_sets):
        label = feature_set_label(tokens)
        for m_idx, metric in enumerate(config.metrics):
            datasets = [
                build_labeled_dataset(
                    ids,
                    metric,
                    tokens,
                    data.metrics_by_song,
                    data.medians,
                    complexity_table=data.complexity_table,
                    bof_table=data.bof_table,
                )
                for ids in (train_ids, val_ids, test_ids)
            ]
            seed = _cell_seed(config.seed, fs_idx, m_idx)
            params, report, correct = evaluate_cell(*datasets, config, seed)
            cells[(label, metric)] = CellResult(
                feature_set=tokens,
                metric=metric,
                classifier=config.classifier,
                params=params,
                report=report,
                seed=seed,
                test_correct=correct,
            )

    return ExperimentResult(
        kind=kind, feature_sets=feature_sets, metrics=list(config.metrics), cells=cells
    )


def run_single_feature_experiment(
    config: ExperimentConfig, data: PreparedData | None = None
) -> ExperimentResult:
    """One classifier per (single complexity feature, metric) pair."""
    feature_sets = [[name] for name in COMPLEXITY_FEATURE_NAMES]
    return _run_feature_sets(config, "single", feature_sets, data)


def run_group_experiment(
    config: ExperimentConfig, data: PreparedData | None = None
) -> ExperimentResult:
    """Complexity group vs bag-of-frames group, plus their agreement matrix
    over the pooled test predictions."""
    result = _run_feature_sets(config, "group", GROUP_FEATURE_SETS, data)
    correct_complexity = np.concatenate(
        [result.cell("complexity", m).test_correct for m in result.metrics]
    )
    correct_bof = np.concatenate([result.cell("bof", m).test_correct for m in result.metrics])
    result.agreement = group_agreement_matrix(correct_complexity, correct_bof)
    result.agreement_groups = ("complexity", "bof")
    return result


def run_combined_experiment(
    config: ExperimentConfig, data: PreparedData | None = None
) -> ExperimentResult:
    """Concatenated feature groups, with and without the debut score."""
    return _run_feature_sets(config, "combined", COMBINED_FEATURE_SETS, data)


_RUNNERS = {
    "single": run_single_feature_experiment,
    "group": run_group_experiment,
    "combined": run_combined_experiment,
}


def run_experiment(
    config: ExperimentConfig, kind: str, data: PreparedData | None = None
) -> ExperimentResult:
    if kind not in _RUNNERS:
        raise ValueError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")
    return _RUNNERS[kind](config, data)


def run_experiments(config: ExperimentConfig, kinds: list[str]) -> list[ExperimentResult]:
    """Run several experiment kinds over one shared data preparation."""
    for kind in kinds:
        if kind not in _RUNNERS:
            raise ValueError(f"unknown experiment kind {kind!r}")
    needs = set()
    if "single" in kinds:
        needs |= {"complexity"}
    if "group" in kinds or "combined" in kinds:
        needs |= {"complexity", "bof"}
    data = prepare_data(config, needs)
    return [run_experiment(config, kind, data) for kind in kinds]


def emit_reports(results: list[ExperimentResult], config: ExperimentConfig, output_dir) -> list[str]:
    """Write one summary CSV per experiment, one JSON per cell, and a run
    manifest. Identical configs and seeds reproduce these files byte for byte."""
    os.makedirs(output_dir, exist_ok=True)
    cells_dir = os.path.join(output_dir, "cells")
    os.makedirs(cells_dir, exist_ok=True)
    written = []

    for result in results:
        table_path = os.path.join(output_dir, f"{result.kind}.csv")
        with open(table_path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["feature_set"] + result.metrics)
            for tokens in result.feature_sets:
                label = feature_set_label(tokens)
                w.writerow(
                    [label]
                    + [repr(result.cell(label, m).report.balanced_accuracy) for m in result.metrics]
                )
            if result.kind == "group":
                # reserved row for the out-of-scope MPEG feature group
                w.writerow(["mpeg"] + ["" for _ in result.metrics])
        written.append(table_path)

        for (label, metric), cell in result.cells.items():
            cell_path = os.path.join(cells_dir, f"{result.kind}__{label}__{metric}.json")
            with open(cell_path, "w", encoding="utf-8") as f:
                json.dump(cell.to_dict(), f, indent=2)
            written.append(cell_path)

        if result.agreement is not None:
            agreement_path = os.path.join(output_dir, f"{result.kind}_agreement.json")
            with open(agreement_path, "w", encoding="utf-8") as f:
                json.dump(
                    {
                        "rows": result.agreement_groups[0],
                        "cols": result.agreement_groups[1],
                        "order": ["hit", "miss"],
                        "matrix": result.agreement.tolist(),
                    },
                    f,
                    indent=2,
                )
            written.append(agreement_path)

    manifest_path = os.path.join(output_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(
            {
                "config": config.to_dict(),
                "cell_seeds": {
                    f"{r.kind}__{label}__{metric}": cell.seed
                    for r in results
                    for (label, metric), cell in r.cells.items()
                },
                "versions": {"popmetrics": __version__, "numpy": np.__version__},
            },
            f,
            indent=2,
        )
    written.append(manifest_path)
    return written
