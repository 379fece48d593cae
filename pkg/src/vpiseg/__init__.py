"""Bone-feature segmentation toolkit for ultrasound-projection-style images.

A from-scratch encoder/decoder segmentation network (built on a minimal
reverse-mode autodiff engine), a binary cross-entropy + smoothness loss,
pixel-level evaluation (Dice, ROC, AUC), a seeded synthetic scene generator
with speckle and periodic occlusion corruptions, and a training pipeline.
"""

from vpiseg.tensor import Tensor, backward, concat_channels, conv2d, maxpool2d, upsample2x
from vpiseg.unet import ParamSet, UNetConfig, build, forward, threshold_mask
from vpiseg.losses import LossConfig, bce_loss, combined_loss, tv_loss
from vpiseg.metrics import EvalReport, RocPoint, auc, dice, roc_curve
from vpiseg.synth import SceneSpec, apply_occlusion, apply_speckle, generate_dataset, generate_scene
from vpiseg.augment import AugmentConfig, affine, hflip, random_crop
from vpiseg.train import TrainConfig, adam_step, evaluate, resize, train

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "conv2d", "maxpool2d", "upsample2x", "concat_channels",
    "UNetConfig", "ParamSet", "build", "forward", "threshold_mask",
    "LossConfig", "bce_loss", "tv_loss", "combined_loss",
    "RocPoint", "EvalReport", "dice", "roc_curve", "auc",
    "SceneSpec", "generate_scene", "apply_speckle", "apply_occlusion", "generate_dataset",
    "AugmentConfig", "random_crop", "hflip", "affine",
    "TrainConfig", "adam_step", "resize", "train", "evaluate",
]
