"""Toolkit for detecting miscommunication cues in dialogue from facial
feature time-series: stream formats, salient-moment extraction, clip
assembly, a from-scratch recurrent classifier, and evaluation metrics.
"""

from .clips import (
    ClipCompilation,
    assemble_compilation,
    extract_clip,
    split_into_moment_samples,
)
from .datagen import GeneratedDataset, GenSpec, generate, plant_report
from .errors import DataError, NumericError
from .lstm import LSTMParams, forward, gradients, loss, predict_probs
from .metrics import (
    AnnotationMatrix,
    EvalReport,
    HumanEvalReport,
    build_report,
    fleiss_kappa,
    human_eval_report,
    point_metrics,
    roc_and_auc,
)
from .salience import (
    MatchReport,
    PeakDetectorParams,
    SalienceMethod,
    SalientMoment,
    blendshape_sum_signal,
    detect_peaks_realtime,
    extract_moments,
    keypoint_displacement_signal,
    match_moments,
    moving_average,
    select_top_k,
)
from .splits import SplitAssignment, make_splits
from .streams import (
    ExchangeRecord,
    FeatureFrame,
    FeatureStream,
    parse_stream,
    read_manifest,
    write_manifest,
    write_stream,
)
from .training import (
    TrainingConfig,
    TrainingCurves,
    load_checkpoint,
    pos_weight_from_labels,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationMatrix",
    "ClipCompilation",
    "DataError",
    "EvalReport",
    "ExchangeRecord",
    "FeatureFrame",
    "FeatureStream",
    "GenSpec",
    "GeneratedDataset",
    "HumanEvalReport",
    "LSTMParams",
    "MatchReport",
    "NumericError",
    "PeakDetectorParams",
    "SalienceMethod",
    "SalientMoment",
    "SplitAssignment",
    "TrainingConfig",
    "TrainingCurves",
    "assemble_compilation",
    "blendshape_sum_signal",
    "build_report",
    "detect_peaks_realtime",
    "extract_clip",
    "extract_moments",
    "fleiss_kappa",
    "forward",
    "generate",
    "gradients",
    "human_eval_report",
    "keypoint_displacement_signal",
    "load_checkpoint",
    "loss",
    "make_splits",
    "match_moments",
    "moving_average",
    "parse_stream",
    "plant_report",
    "point_metrics",
    "pos_weight_from_labels",
    "predict_probs",
    "read_manifest",
    "roc_and_auc",
    "save_checkpoint",
    "select_top_k",
    "split_into_moment_samples",
    "train",
    "write_manifest",
    "write_stream",
]
