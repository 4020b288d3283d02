"""Synthetic infrared small-target lab (python bindings)."""

from ._core import (
    InvalidParameter,
    IoError,
    NoiseSchedule,
    ShapeMismatch,
    cut_and_paste,
    cutmix,
    default_config,
    degrade,
    evaluate,
    forward_diffuse,
    generate_scene,
    ipi,
    lcm,
    mixup,
    mosaic,
    pd_fa,
    pixel_iou,
    quadrant_discrepancy,
    rpca,
    run_ablation,
    sample_gaussian_prior,
    soft_iou_loss,
    threshold,
    tophat,
)

__all__ = [
    "InvalidParameter",
    "IoError",
    "NoiseSchedule",
    "ShapeMismatch",
    "cut_and_paste",
    "cutmix",
    "default_config",
    "degrade",
    "evaluate",
    "forward_diffuse",
    "generate_scene",
    "ipi",
    "lcm",
    "mixup",
    "mosaic",
    "pd_fa",
    "pixel_iou",
    "quadrant_discrepancy",
    "rpca",
    "run_ablation",
    "sample_gaussian_prior",
    "soft_iou_loss",
    "threshold",
    "tophat",
]
