"""Vessel-feature segmentation for accumulated video frames.

Thin Python surface over the C++ core: synthetic phantoms, the residual
encoder-decoder segmentation model, overlap metrics and frame-stream
accumulation.
"""

from ._core import (
    ContractViolation,
    FormatError,
    FrameStream,
    ModelConfig,
    SegResNet,
    __version__,
    accumulate,
    bce_loss,
    boundary_iou,
    combined_loss,
    dice_loss,
    dice_score,
    gen_phantom,
    gen_stream,
    iou_score,
    largest_component,
    load_model,
    read_stream,
    run_gradchecks,
    write_stream,
)

__all__ = [
    "ContractViolation",
    "FormatError",
    "FrameStream",
    "ModelConfig",
    "SegResNet",
    "__version__",
    "accumulate",
    "bce_loss",
    "boundary_iou",
    "combined_loss",
    "dice_loss",
    "dice_score",
    "gen_phantom",
    "gen_stream",
    "iou_score",
    "largest_component",
    "load_model",
    "read_stream",
    "run_gradchecks",
    "write_stream",
]
