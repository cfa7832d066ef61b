"""Sampled minimum-Bayes-risk training over weighted finite-state lattices.

The package builds globally normalized lattice distributions from
per-frame scores and a decoder transducer, draws exact path samples from
them, and estimates expected losses (word edit distance or frame errors)
and their score gradients, with exact enumeration and edge-additive
oracles for verification plus a small synthetic training loop.
"""

__version__ = "0.1.0"

from .compose import (
    build_score_fst,
    compose,
    format_logits_csv,
    parse_logits_csv,
    path_occupancy,
)
from .errors import (
    CyclicFstError,
    DegenerateLatticeError,
    DimensionMismatchError,
    FstParseError,
    InvalidFstError,
    InvalidPathError,
    NonFiniteGradientError,
    PathOverflowError,
    SampledMbrError,
    UnsupportedCompositionError,
    UnsupportedTopologyError,
    UsageError,
)
from .estimators import (
    MbrEstimate,
    estimate_report,
    expected_additive_loss,
    expected_loss_exact,
    expected_loss_gradient_exact,
    loss_shift_check,
    sampled_estimate,
)
from .fst import (
    EPSILON,
    Edge,
    Path,
    Wfst,
    count_paths,
    empty_wfst,
    enumerate_paths,
    format_fst_text,
    format_symbol_table,
    is_acyclic,
    make_path,
    parse_fst_text,
    parse_symbol_table,
    path_distribution,
    path_input_labels,
    path_log_weight,
    path_output_labels,
    topological_order,
)
from .losses import (
    FrameErrorLoss,
    ShiftedLoss,
    WordEditLoss,
    edge_loss_annotation,
    edit_distance,
    format_label_sequence,
    frame_error,
    parse_label_sequence,
)
from .sampling import (
    SampleStream,
    backward,
    log_total_weight,
    reweight_stochastic,
    sample_path,
    sample_paths,
    stochasticity_deviation,
)
from .training import (
    DEFAULT_EMBR_LEARNING_RATE,
    LEARNING_RATE_RATIO,
    CurveRecord,
    EnumeratedObjective,
    LinearModel,
    TaskConfig,
    TrainConfig,
    Utterance,
    build_task,
    chain_decoder_graph,
    format_curve_csv,
    format_model_text,
    forward,
    init_model,
    make_synthetic_task,
    parse_config,
    parse_model_text,
    run_experiment,
    split_train_dev,
    train_step,
    utterance_lattice,
    zero_wall_times,
)

__all__ = [
    "DEFAULT_EMBR_LEARNING_RATE",
    "EPSILON",
    "LEARNING_RATE_RATIO",
    "CurveRecord",
    "CyclicFstError",
    "DegenerateLatticeError",
    "DimensionMismatchError",
    "Edge",
    "EnumeratedObjective",
    "FrameErrorLoss",
    "FstParseError",
    "InvalidFstError",
    "InvalidPathError",
    "LinearModel",
    "MbrEstimate",
    "NonFiniteGradientError",
    "Path",
    "PathOverflowError",
    "SampleStream",
    "SampledMbrError",
    "ShiftedLoss",
    "TaskConfig",
    "TrainConfig",
    "UnsupportedCompositionError",
    "UnsupportedTopologyError",
    "UsageError",
    "Utterance",
    "Wfst",
    "WordEditLoss",
    "backward",
    "build_score_fst",
    "build_task",
    "chain_decoder_graph",
    "compose",
    "count_paths",
    "edge_loss_annotation",
    "edit_distance",
    "empty_wfst",
    "enumerate_paths",
    "estimate_report",
    "expected_additive_loss",
    "expected_loss_exact",
    "expected_loss_gradient_exact",
    "format_curve_csv",
    "format_fst_text",
    "format_label_sequence",
    "format_logits_csv",
    "format_model_text",
    "format_symbol_table",
    "forward",
    "frame_error",
    "init_model",
    "is_acyclic",
    "log_total_weight",
    "loss_shift_check",
    "make_path",
    "make_synthetic_task",
    "parse_config",
    "parse_fst_text",
    "parse_label_sequence",
    "parse_logits_csv",
    "parse_model_text",
    "parse_symbol_table",
    "path_distribution",
    "path_input_labels",
    "path_log_weight",
    "path_occupancy",
    "path_output_labels",
    "reweight_stochastic",
    "run_experiment",
    "sample_path",
    "sample_paths",
    "sampled_estimate",
    "split_train_dev",
    "stochasticity_deviation",
    "topological_order",
    "train_step",
    "utterance_lattice",
    "zero_wall_times",
]
