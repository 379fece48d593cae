#!/usr/bin/env python3
"""Training augmentations: aligned crops, coin-flip mirroring, affine warps."""

import numpy as np

from vpiseg.augment import AugmentConfig, affine, affine_apply, hflip, random_crop
from vpiseg.synth import SceneSpec, generate_scene

image, mask = generate_scene(SceneSpec(seed=12))
cfg = AugmentConfig(crop_h=96, crop_w=96)
rng = np.random.default_rng(0)

patch_img, patch_mask = random_crop(image, mask, cfg, rng)
print(f"crop: {image.shape} -> {patch_img.shape}, "
      f"bone fraction {patch_mask.mean():.3f}")

flipped_img, flipped_mask = hflip(patch_img, patch_mask, rng, prob=1.0)
print("forced flip mirrors image and mask together:",
      np.array_equal(flipped_img[:, ::-1], patch_img),
      np.array_equal(flipped_mask[:, ::-1], patch_mask))

warped_img, warped_mask = affine(patch_img, patch_mask, cfg, rng)
print("warped mask stays strictly binary:", set(np.unique(warped_mask)) <= {0, 1})

same_img, same_mask = affine_apply(patch_img, patch_mask, 0.0, (0.0, 0.0), 1.0)
print("identity parameters change nothing:",
      np.array_equal(same_img, patch_img) and np.array_equal(same_mask, patch_mask))

quarter_img, quarter_mask = affine_apply(patch_img, patch_mask, 90.0, (0.0, 0.0), 1.0)
print(f"area before/after a 90-degree turn: "
      f"{patch_mask.sum()} -> {quarter_mask.sum()} pixels")
