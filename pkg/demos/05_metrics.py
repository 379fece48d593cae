#!/usr/bin/env python3
"""Dice overlap, ROC curve, and AUC on hand-made predictions."""

import numpy as np

from vpiseg.metrics import auc, dice, roc_curve

truth = np.zeros((16, 16), dtype=np.uint8)
truth[4:12, 4:12] = 1

# a prediction shifted by two pixels
pred = np.zeros_like(truth)
pred[6:14, 6:14] = 1
print(f"dice of a 2-pixel shift: {dice(pred, truth):.4f}")
print(f"dice is symmetric: {dice(pred, truth) == dice(truth, pred)}")

# pixel scores: informative but noisy
rng = np.random.default_rng(5)
scores = np.clip(truth.ravel() * 0.6 + 0.2 + 0.25 * rng.standard_normal(truth.size),
                 0.0, 1.0)
points = roc_curve(scores, truth.ravel())
print(f"\nROC sweep over {len(points)} thresholds, "
      f"from ({points[0].fpr:.0f},{points[0].tpr:.0f}) "
      f"to ({points[-1].fpr:.0f},{points[-1].tpr:.0f})")
print(f"AUC: {auc(points):.4f}")

perfect = roc_curve(truth.ravel().astype(float), truth.ravel())
print(f"AUC of the oracle predictor: {auc(perfect):.1f}")

flat = roc_curve(np.full(truth.size, 0.5), truth.ravel())
print(f"AUC of a constant predictor: {auc(flat):.1f}")
