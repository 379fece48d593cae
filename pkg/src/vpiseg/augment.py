"""Training-time augmentation: random crop, horizontal flip, affine warp.

Every transform applies the exact same geometric map to the image and its
mask.  Images resample bilinearly; masks resample nearest-neighbor and so
stay strictly binary.  All randomness comes from a caller-supplied
``numpy.random.Generator``, which makes a full augmentation sequence
reproducible from its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class AugmentConfig:
    crop_h: int = 128
    crop_w: int = 128
    flip_prob: float = 0.5
    rotation_deg: float = 10.0
    translate_frac: float = 0.05
    scale_range: tuple[float, float] = (0.9, 1.1)

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must be in [0, 1], got {self.flip_prob}")
        if self.crop_h < 1 or self.crop_w < 1:
            raise ValueError("crop dims must be positive")


def random_crop(image: np.ndarray, mask: np.ndarray, cfg: AugmentConfig,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Cut an aligned (crop_h, crop_w) patch at a uniformly random offset."""
    h, w = image.shape
    if cfg.crop_h > h or cfg.crop_w > w:
        raise ValueError(f"crop {cfg.crop_h}x{cfg.crop_w} larger than image {h}x{w}")
    r0 = int(rng.integers(0, h - cfg.crop_h + 1))
    c0 = int(rng.integers(0, w - cfg.crop_w + 1))
    return (image[r0:r0 + cfg.crop_h, c0:c0 + cfg.crop_w].copy(),
            mask[r0:r0 + cfg.crop_h, c0:c0 + cfg.crop_w].copy())


def hflip(image: np.ndarray, mask: np.ndarray, rng: np.random.Generator,
          prob: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Mirror both arrays about the vertical axis with the given probability."""
    if rng.random() < prob:
        return np.ascontiguousarray(image[:, ::-1]), np.ascontiguousarray(mask[:, ::-1])
    return image, mask


def affine_apply(image: np.ndarray, mask: np.ndarray, angle_deg: float,
                 translate: tuple[float, float], scale: float
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Rotate/scale about the patch center then translate, with fixed parameters.

    Out-of-bounds regions fill with 0 in both outputs.  Identity parameters
    (0 degrees, zero shift, scale 1) reproduce the inputs exactly.
    """
    h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    th = np.deg2rad(angle_deg)
    cos, sin = np.cos(th), np.sin(th)
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    # invert dst = R(theta) * scale * (src - center) + center + translate
    yr = rr - cy - translate[0]
    xc = cc - cx - translate[1]
    src_r = (cos * yr + sin * xc) / scale + cy
    src_c = (-sin * yr + cos * xc) / scale + cx
    img_out = ndimage.map_coordinates(np.asarray(image, dtype=np.float64),
                                      [src_r, src_c], order=1,
                                      mode="constant", cval=0.0)
    mask_out = ndimage.map_coordinates(np.asarray(mask, dtype=np.uint8),
                                       [src_r, src_c], order=0,
                                       mode="constant", cval=0)
    return img_out, mask_out


def affine(image: np.ndarray, mask: np.ndarray, cfg: AugmentConfig,
           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample rotation, translation and scale from cfg ranges and apply them."""
    h, w = image.shape
    angle = float(rng.uniform(-cfg.rotation_deg, cfg.rotation_deg))
    tr = float(rng.uniform(-cfg.translate_frac, cfg.translate_frac)) * h
    tc = float(rng.uniform(-cfg.translate_frac, cfg.translate_frac)) * w
    scale = float(rng.uniform(cfg.scale_range[0], cfg.scale_range[1]))
    return affine_apply(image, mask, angle, (tr, tc), scale)
