"""Python bindings for the c2am core library."""

from ._core import (
    DEFAULT_ALPHA,
    ConfigError,
    DivergenceError,
    Error,
    FormatError,
    InputError,
    IoError,
    ShapeError,
    binarize,
    box_from_map,
    box_iou,
    cosine_sim,
    disentangle,
    extract_bbox,
    generate_synthetic,
    infer,
    largest_component,
    max_box_acc_v2,
    negative_loss,
    positive_loss,
    rank_weights,
    refine_cam,
    total_loss,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
