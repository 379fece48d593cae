import math

import numpy as np
import pytest

from conftest import max_rel_err, numeric_grad
from vpiseg.losses import LossConfig, bce_loss, combined_loss, tv_loss
from vpiseg.tensor import Tensor, backward


def prob_tensor(arr, grad=False):
    a = np.asarray(arr, dtype=np.float64)
    return Tensor(a.reshape(1, 1, *a.shape), requires_grad=grad)


def bce_oracle(p, y, eps):
    """Direct double-loop summation, independent of the tensor engine."""
    h, w = p.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            q = min(max(p[i, j], eps), 1.0 - eps)
            total += y[i, j] * math.log(q) + (1 - y[i, j]) * math.log(1.0 - q)
    return -total / (h * w)


def tv_oracle(p):
    """Direct double-loop per-direction mean squared neighbor difference."""
    h, w = p.shape
    v = sum((p[i, j] - p[i + 1, j]) ** 2 for i in range(h - 1) for j in range(w))
    hz = sum((p[i, j] - p[i, j + 1]) ** 2 for i in range(h) for j in range(w - 1))
    return v / ((h - 1) * w) + hz / (h * (w - 1))


class TestBce:
    def test_single_pixel_half(self):
        loss = bce_loss(prob_tensor([[0.5]]), np.array([[1]]))
        assert abs(loss.item() - math.log(2)) < 1e-12

    def test_perfect_prediction_is_tiny(self):
        y = np.array([[1, 0], [0, 1]], dtype=np.uint8)
        loss = bce_loss(prob_tensor(y.astype(float)), y)
        assert loss.item() <= -math.log(1 - 1e-7) + 1e-12

    def test_matches_direct_summation(self, rng):
        p = rng.random((4, 4))
        y = (rng.random((4, 4)) > 0.5).astype(np.uint8)
        cfg = LossConfig()
        assert abs(bce_loss(prob_tensor(p), y, cfg).item()
                   - bce_oracle(p, y, cfg.eps)) < 1e-12

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="target"):
            bce_loss(prob_tensor(rng.random((3, 3))), np.zeros((2, 3), dtype=np.uint8))

    def test_nonbinary_target_rejected(self, rng):
        with pytest.raises(ValueError, match="0/1"):
            bce_loss(prob_tensor(rng.random((2, 2))), np.full((2, 2), 0.5))

    def test_minimized_at_target(self):
        # gradient points away from the target value on single pixels
        for y, p0 in ((1, 0.3), (1, 0.9), (0, 0.3), (0, 0.9)):
            pt = prob_tensor([[p0]], grad=True)
            backward(bce_loss(pt, np.array([[y]])))
            g = pt.grad[0, 0, 0, 0]
            assert g < 0 if y == 1 else g > 0

    def test_gradient_matches_finite_differences(self, rng):
        pv = rng.random((5, 7)) * 0.8 + 0.1
        y = (rng.random((5, 7)) > 0.5).astype(np.uint8)
        pt = prob_tensor(pv, grad=True)
        backward(bce_loss(pt, y))
        num = numeric_grad(lambda: bce_loss(prob_tensor(pv), y).item(), pv, h=1e-6)
        assert max_rel_err(pt.grad[0, 0], num) < 1e-4


class TestTv:
    def test_constant_map_is_zero(self):
        assert tv_loss(prob_tensor(np.full((5, 6), 0.37))).item() == 0.0

    def test_two_by_two_case(self):
        assert tv_loss(prob_tensor([[0.0, 1.0], [0.0, 1.0]])).item() == 1.0

    def test_quadratic_scaling(self, rng):
        p = rng.random((4, 6))
        base = tv_loss(prob_tensor(p)).item()
        for alpha in (0.5, 2.0, 3.0):
            assert abs(tv_loss(prob_tensor(alpha * p)).item() - alpha ** 2 * base) < 1e-12

    def test_shift_invariance(self, rng):
        p = rng.random((4, 6)) * 0.5
        assert abs(tv_loss(prob_tensor(p)).item()
                   - tv_loss(prob_tensor(p + 0.25)).item()) < 1e-12

    def test_nonnegative_and_zero_iff_constant(self, rng):
        p = rng.random((6, 4))
        assert tv_loss(prob_tensor(p)).item() > 0.0

    def test_matches_direct_summation(self, rng):
        p = rng.random((5, 8))
        assert abs(tv_loss(prob_tensor(p)).item() - tv_oracle(p)) < 1e-12

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="2x2"):
            tv_loss(prob_tensor(np.zeros((1, 5))))

    def test_gradient_matches_finite_differences(self, rng):
        pv = rng.random((5, 7))
        pt = prob_tensor(pv, grad=True)
        backward(tv_loss(pt))
        num = numeric_grad(lambda: tv_loss(prob_tensor(pv)).item(), pv, h=1e-6)
        assert max_rel_err(pt.grad[0, 0], num) < 1e-4


class TestCombined:
    def test_lambda_zero_is_bce_bitwise(self, rng):
        p = rng.random((4, 4))
        y = (rng.random((4, 4)) > 0.5).astype(np.uint8)
        cfg = LossConfig(tv_weight=0.0)
        a = combined_loss(prob_tensor(p), y, cfg).item()
        b = bce_loss(prob_tensor(p), y, cfg).item()
        assert a == b

    def test_constant_map_equals_bce(self, rng):
        p = np.full((4, 4), 0.6)
        y = (rng.random((4, 4)) > 0.5).astype(np.uint8)
        cfg = LossConfig()
        assert combined_loss(prob_tensor(p), y, cfg).item() == \
            bce_loss(prob_tensor(p), y, cfg).item()

    def test_default_weight(self):
        assert LossConfig().tv_weight == 0.4

    def test_monotone_in_weight(self, rng):
        p = rng.random((4, 4))
        y = (rng.random((4, 4)) > 0.5).astype(np.uint8)
        vals = [combined_loss(prob_tensor(p), y, LossConfig(tv_weight=lam)).item()
                for lam in (0.0, 0.2, 0.4, 0.8)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_gradient_matches_finite_differences(self, rng):
        pv = rng.random((5, 7)) * 0.8 + 0.1
        y = (rng.random((5, 7)) > 0.5).astype(np.uint8)
        cfg = LossConfig()
        pt = prob_tensor(pv, grad=True)
        backward(combined_loss(pt, y, cfg))
        num = numeric_grad(lambda: combined_loss(prob_tensor(pv), y, cfg).item(), pv, h=1e-6)
        assert max_rel_err(pt.grad[0, 0], num) < 1e-4

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            LossConfig(tv_weight=-0.1)
        with pytest.raises(ValueError):
            LossConfig(eps=0.7)
