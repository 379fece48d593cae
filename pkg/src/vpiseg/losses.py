"""Training objective: binary cross-entropy plus a weighted smoothness term.

The smoothness term is the total-variance penalty on the predicted
probability map: the mean squared difference over vertical neighbor pairs
plus the mean squared difference over horizontal neighbor pairs, each
normalized by its own pair count ((H-1)*W vertical, H*(W-1) horizontal).
It is zero exactly when the map is constant and grows with the map's edge
energy, which is what suppresses small speckle-shaped false responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vpiseg.tensor import Tensor, slice_hw


@dataclass(frozen=True)
class LossConfig:
    """Smoothness weight and the probability clamp applied before logarithms."""
    tv_weight: float = 0.4
    eps: float = 1e-7

    def __post_init__(self):
        if self.tv_weight < 0:
            raise ValueError(f"tv_weight must be >= 0, got {self.tv_weight}")
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"eps must be in (0, 0.5), got {self.eps}")


def _check_prob_target(prob: Tensor, target: np.ndarray) -> np.ndarray:
    if prob.data.ndim != 4 or prob.shape[0] != 1 or prob.shape[1] != 1:
        raise ValueError(f"expected (1,1,H,W) probability map, got {prob.shape}")
    t = np.asarray(target, dtype=np.float64)
    if t.ndim == 4:
        t = t[0, 0]
    if t.shape != prob.shape[2:]:
        raise ValueError(f"target shape {t.shape} does not match map {prob.shape[2:]}")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValueError("target mask must contain only 0/1 values")
    return t


def bce_loss(prob: Tensor, target: np.ndarray, cfg: LossConfig = LossConfig()) -> Tensor:
    """Negative mean per-pixel log-likelihood of the mask under the map.

    Probabilities are clamped to [eps, 1-eps] before the logs; the sigmoid
    can saturate to machine 0/1 in 64-bit floats during training.
    """
    t = _check_prob_target(prob, target)
    hw = t.size
    y = Tensor(t.reshape(prob.shape))
    p = prob.clamp(cfg.eps, 1.0 - cfg.eps)
    ll = y * p.log() + (1.0 - y) * (1.0 - p).log()
    return ll.sum() * (-1.0 / hw)


def tv_loss(prob: Tensor) -> Tensor:
    """Mean squared difference between adjacent pixels, per direction."""
    if prob.data.ndim != 4 or prob.shape[0] != 1 or prob.shape[1] != 1:
        raise ValueError(f"expected (1,1,H,W) probability map, got {prob.shape}")
    h, w = prob.shape[2], prob.shape[3]
    if h < 2 or w < 2:
        raise ValueError(f"tv_loss needs at least a 2x2 map, got {h}x{w}")
    dv = slice_hw(prob, 0, h - 1, 0, w) - slice_hw(prob, 1, h, 0, w)
    dh = slice_hw(prob, 0, h, 0, w - 1) - slice_hw(prob, 0, h, 1, w)
    vterm = (dv * dv).sum() * (1.0 / ((h - 1) * w))
    hterm = (dh * dh).sum() * (1.0 / (h * (w - 1)))
    return vterm + hterm


def combined_loss(prob: Tensor, target: np.ndarray, cfg: LossConfig = LossConfig()) -> Tensor:
    """bce + tv_weight * tv; with tv_weight == 0 this is bce_loss exactly."""
    bce = bce_loss(prob, target, cfg)
    if cfg.tv_weight == 0.0:
        return bce
    return bce + cfg.tv_weight * tv_loss(prob)
