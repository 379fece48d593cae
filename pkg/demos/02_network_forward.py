#!/usr/bin/env python3
"""Build the segmentation network, run it, threshold, and round-trip a checkpoint."""

import os
import tempfile

import numpy as np

from vpiseg.tensor import Tensor
from vpiseg.unet import UNetConfig, build, forward, load_params, save_params, threshold_mask

cfg = UNetConfig(depth=4, base_channels=16)
params = build(cfg, seed=42)
weights = sum(1 for n in params.names() if n.endswith(".weight"))
print(f"depth {cfg.depth}, base {cfg.base_channels}: "
      f"{weights} conv layers, {params.num_scalars():,} scalars")

image = Tensor(np.random.default_rng(1).random((1, 1, 64, 64)))
prob = forward(params, image)
print(f"probability map shape {prob.shape}, "
      f"range ({prob.data.min():.3f}, {prob.data.max():.3f})")

mask = threshold_mask(prob, t=0.5)
print(f"mask at 0.5: {mask.sum()} of {mask.size} pixels on")

with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "model.vpsg")
    save_params(params, path)
    restored = load_params(path)
    same = all(np.array_equal(restored[n].data, params[n].data) for n in params.names())
    print(f"checkpoint round trip bit-exact: {same} "
          f"({os.path.getsize(path):,} bytes)")
