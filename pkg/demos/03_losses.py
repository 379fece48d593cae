#!/usr/bin/env python3
"""The combined objective: cross-entropy plus the smoothness (total-variance) term."""

import numpy as np

from vpiseg.losses import LossConfig, bce_loss, combined_loss, tv_loss
from vpiseg.tensor import Tensor

rng = np.random.default_rng(3)


def as_map(a):
    return Tensor(np.asarray(a, dtype=np.float64).reshape(1, 1, *np.shape(a)))


# a clean step map and a speckled version of it
target = np.zeros((32, 32), dtype=np.uint8)
target[8:24, 8:24] = 1
clean = target * 0.9 + 0.05
noisy = np.clip(clean + 0.35 * rng.standard_normal(clean.shape), 0.001, 0.999)

cfg = LossConfig()  # smoothness weight 0.4
for name, m in (("clean", clean), ("speckled", noisy)):
    b = bce_loss(as_map(m), target, cfg).item()
    tv = tv_loss(as_map(m)).item()
    total = combined_loss(as_map(m), target, cfg).item()
    print(f"{name:>9}: bce={b:.4f}  tv={tv:.4f}  combined={total:.4f}")

print("\nthe smoothness term punishes the speckled map; "
      "cross-entropy alone barely separates them")

# quadratic homogeneity of the smoothness term
p = rng.random((8, 8))
print("\ntv(2*p) / tv(p) =", tv_loss(as_map(2 * p)).item() / tv_loss(as_map(p)).item())

# weight 0 reduces the objective to plain cross-entropy, bit for bit
lam0 = LossConfig(tv_weight=0.0)
print("lambda=0 equals bce exactly:",
      combined_loss(as_map(noisy), target, lam0).item()
      == bce_loss(as_map(noisy), target, lam0).item())
