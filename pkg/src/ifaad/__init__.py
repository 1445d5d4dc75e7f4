"""Isolation-forest anomaly detection with analyst feedback in the loop."""

from .aad import (
    ANOMALY,
    LABELS,
    NOMINAL,
    AadConfig,
    FeedbackState,
    LabeledSet,
    QuantileAnchor,
    SessionFormatError,
    compute_quantile_anchor,
    hinge_loss,
    load_session,
    next_query,
    objective,
    objective_gradient,
    run_feedback_loop,
    save_session,
    update_weights,
)
from .data import (
    ClassMapping,
    CsvSchema,
    LabeledDataset,
    downsample_anomalies,
    load_csv,
    make_synthetic_2d,
    write_canonical,
)
from .forest import (
    SCHEME_IF,
    SCHEME_IF_LEAF,
    SCHEMES,
    Forest,
    ForestFormatError,
    SparseNodeVector,
    baseline_rank,
    build_forest,
    deserialize_forest,
    feature_matrix,
    score,
    score_all,
    serialize_forest,
    traverse,
    uniform_weights,
)
from .harness import (
    ARM_BASELINE,
    ARM_IF_AAD,
    ARM_IF_AAD_LEAF,
    ARMS,
    DiscoveryCurve,
    ExperimentConfig,
    compare_arms,
    export_results,
    load_results,
    run_experiment,
)

__version__ = "0.1.0"
