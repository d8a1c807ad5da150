"""Respiration-pattern voice activity detection."""

from ._core import (
    ConvergenceError,
    DegenerateInputError,
    Error,
    Model,
    NumericalError,
    SingleClassError,
    auroc,
    bandpass,
    chunk,
    cli,
    flow_matrix,
    load_frames,
    metrics,
    reassemble,
    respiration_pattern,
    roc_curve,
    synth_rp_dataset,
    synth_video,
    top_singular_triplet,
    transition_errors,
)

__all__ = [
    "ConvergenceError",
    "DegenerateInputError",
    "Error",
    "Model",
    "NumericalError",
    "SingleClassError",
    "auroc",
    "bandpass",
    "chunk",
    "cli",
    "flow_matrix",
    "load_frames",
    "metrics",
    "reassemble",
    "respiration_pattern",
    "roc_curve",
    "synth_rp_dataset",
    "synth_video",
    "top_singular_triplet",
    "transition_errors",
]
