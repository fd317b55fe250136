"""Per-campaign logistic response models: fitting, ROC thresholds and ensemble scoring."""

from ._core import (
    BinaryModel,
    DegenerateCalibration,
    DegenerateData,
    DomainError,
    EmptyBatch,
    EmptyInput,
    EmptyPool,
    Ensemble,
    Error,
    FitResult,
    Impression,
    InvalidModel,
    RocCurve,
    SchemaMismatch,
    fit,
    inverse_logit,
    load_model_dir,
    logit,
    read_batch,
    read_clicks,
    roc_from_scores,
    synthetic_clicks,
    write_model_dir,
)

__all__ = [
    "BinaryModel",
    "DegenerateCalibration",
    "DegenerateData",
    "DomainError",
    "EmptyBatch",
    "EmptyInput",
    "EmptyPool",
    "Ensemble",
    "Error",
    "FitResult",
    "Impression",
    "InvalidModel",
    "RocCurve",
    "SchemaMismatch",
    "fit",
    "inverse_logit",
    "load_model_dir",
    "logit",
    "read_batch",
    "read_clicks",
    "roc_from_scores",
    "synthetic_clicks",
    "write_model_dir",
]
