"""popmetrics: chart-based music popularity metrics and audio-based prediction."""

__version__ = "0.1.0"

from .chart import (
    ChartEntry,
    ChartFormatError,
    SongHistory,
    assemble_histories,
    filter_min_weeks,
    load_chart,
    parse_chart_csv,
    rank_to_score,
)
from .metrics import METRIC_NAMES, PopularityMetrics, compute_all_metrics, compute_metrics
from .analytics import (
    CumulativeDistribution,
    Histogram,
    debut_vs_max_profile,
    decadal_cdf,
    group_agreement_matrix,
    metric_histogram,
    top_rank_proportion_by_debut,
)
from .dsp import (
    AudioClip,
    WavFormatError,
    decode_wav,
    frame_signal,
    hamming_window,
    magnitude_spectrum,
    mel_filterbank_energies,
    mfcc,
    read_wav,
    resample_to,
)
from .complexity import (
    COMPLEXITY_FEATURE_NAMES,
    ComplexityFeatureVector,
    ComponentSequence,
    arousal,
    chroma_sequence,
    complexity_vector,
    jsd,
    rhythm_sequence,
    structural_change,
    timbre_sequence,
)
from .bof import (
    BOF_FEATURE_NAMES,
    BofCodebook,
    BofFeatureVector,
    bof_features,
    extract_mfcc_frames,
    fit_codebook,
)
from .learn import (
    EvalReport,
    LabeledDataset,
    TrainedModel,
    balanced_accuracy,
    bootstrap_significance,
    grid_search,
    median_split_labels,
    standardize_apply,
    standardize_fit,
    train_logistic,
    train_svm_rbf,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    build_labeled_dataset,
    emit_reports,
    run_combined_experiment,
    run_experiment,
    run_group_experiment,
    run_single_feature_experiment,
    temporal_split,
)
