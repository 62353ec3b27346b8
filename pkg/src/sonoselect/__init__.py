"""Sonomyography scanline analysis: end-state extraction, per-scanline
discriminability scoring, sparse subset selection and NN/LOOCV motion
classification, with a seeded synthetic phantom for end-to-end validation."""

from .classify import (
    AccuracyStats,
    ConfusionMatrix,
    DistanceMetric,
    accuracy,
    confusion_csv,
    loocv,
    nn_classify,
    summary_json,
)
from .endstate import (
    CorrelationTrace,
    InsufficientValleysError,
    ValleyParams,
    build_dataset,
    cc_trace,
    detect_endstates,
    moving_average,
    pearson_cc,
    resolve_min_separation,
)
from .preprocess import (
    NormalizationScope,
    PreprocessConfig,
    analytic_envelope,
    compress_normalize,
    preprocess_sequence,
)
from .scoring import (
    AggregatedScore,
    MiConfig,
    aggregate,
    entropy,
    fc_pair,
    joint_entropy,
    mi_pair,
    score_matrix,
    trial_consistency,
)
from .selection import (
    Polarity,
    ScanlineSubset,
    SubsetStrategy,
    css,
    dss,
    extract_feature_map,
    extrema_select,
    udss,
)
from .seqio import (
    EndStateDataset,
    FormatError,
    Frame,
    FrameKind,
    ScoreMatrix,
    ScoreMethod,
    ScoreTable,
    Sequence,
    SequenceMeta,
    read_dataset,
    read_scores,
    read_sequence,
    write_dataset,
    write_scores,
    write_sequence,
)
from .synthgen import (
    ActiveRegion,
    PhantomConfig,
    PhantomProfile,
    PhantomTruth,
    default_config,
    generate,
    modulate_rf,
    write_truth,
)

__version__ = "0.1.0"
