import numpy as np
import pytest
from scipy import stats

from vpiseg.augment import AugmentConfig, affine, affine_apply, hflip, random_crop


def scene(rng, h=128, w=512):
    img = rng.random((h, w))
    mask = (rng.random((h, w)) > 0.7).astype(np.uint8)
    return img, mask


class TestRandomCrop:
    def test_full_size_crop_is_identity(self, rng):
        img, mask = scene(rng, 32, 48)
        cfg = AugmentConfig(crop_h=32, crop_w=48)
        pi, pm = random_crop(img, mask, cfg, rng)
        np.testing.assert_array_equal(pi, img)
        np.testing.assert_array_equal(pm, mask)

    def test_patch_origin_matches_source(self):
        img = np.arange(100.0).reshape(10, 10) / 100
        mask = np.zeros((10, 10), np.uint8)
        cfg = AugmentConfig(crop_h=4, crop_w=4)
        replay = np.random.default_rng(3)
        r0 = int(replay.integers(0, 7))
        c0 = int(replay.integers(0, 7))
        pi, _ = random_crop(img, mask, cfg, np.random.default_rng(3))
        assert pi[0, 0] == img[r0, c0]
        assert pi.shape == (4, 4)

    def test_crop_larger_than_image_rejected(self, rng):
        img, mask = scene(rng, 16, 16)
        with pytest.raises(ValueError, match="larger"):
            random_crop(img, mask, AugmentConfig(crop_h=32, crop_w=8), rng)

    def test_offsets_roughly_uniform(self, rng):
        img, mask = scene(rng, 128, 512)
        cfg = AugmentConfig(crop_h=64, crop_w=64)
        probe = np.arange(128 * 512, dtype=np.float64).reshape(128, 512)
        cols = []
        for _ in range(1000):
            pi, _ = random_crop(probe, mask, cfg, rng)
            cols.append(int(pi[0, 0]) % 512)
        counts, _ = np.histogram(cols, bins=16, range=(0, 512 - 64 + 1))
        chi2 = ((counts - counts.mean()) ** 2 / counts.mean()).sum()
        p = stats.chi2.sf(chi2, df=15)
        assert p > 0.001


class TestHflip:
    def test_forced_flip_mirrors(self):
        img = np.array([[1.0, 2.0], [3.0, 4.0]])
        mask = np.array([[1, 0], [0, 1]], np.uint8)
        fi, fm = hflip(img, mask, np.random.default_rng(0), prob=1.0)
        np.testing.assert_array_equal(fi, [[2.0, 1.0], [4.0, 3.0]])
        np.testing.assert_array_equal(fm, [[0, 1], [1, 0]])

    def test_double_forced_flip_is_identity(self, rng):
        img, mask = scene(rng, 8, 8)
        r = np.random.default_rng(0)
        fi, fm = hflip(*hflip(img, mask, r, prob=1.0), r, prob=1.0)
        np.testing.assert_array_equal(fi, img)
        np.testing.assert_array_equal(fm, mask)

    def test_zero_prob_never_flips(self, rng):
        img, mask = scene(rng, 8, 8)
        fi, fm = hflip(img, mask, rng, prob=0.0)
        np.testing.assert_array_equal(fi, img)

    def test_flip_rate_near_half(self):
        r = np.random.default_rng(123)
        img = np.array([[1.0, 2.0]])
        mask = np.array([[0, 1]], np.uint8)
        flips = sum(hflip(img, mask, r)[0][0, 0] == 2.0 for _ in range(10000))
        assert 0.47 <= flips / 10000 <= 0.53


class TestAffine:
    def test_identity_parameters_unchanged(self, rng):
        img, mask = scene(rng, 32, 32)
        ai, am = affine_apply(img, mask, 0.0, (0.0, 0.0), 1.0)
        np.testing.assert_array_equal(ai, img)
        np.testing.assert_array_equal(am, mask)

    def test_mask_stays_binary(self, rng):
        img, mask = scene(rng, 64, 64)
        cfg = AugmentConfig(rotation_deg=25.0, translate_frac=0.1, scale_range=(0.8, 1.2))
        for _ in range(10):
            _, am = affine(img, mask, cfg, rng)
            assert set(np.unique(am)) <= {0, 1}

    def test_right_angle_rotation_preserves_area(self):
        mask = np.zeros((64, 64), np.uint8)
        mask[20:44, 26:38] = 1
        img = mask.astype(np.float64)
        _, am = affine_apply(img, mask, 90.0, (0.0, 0.0), 1.0)
        assert abs(int(am.sum()) - int(mask.sum())) <= 0.02 * mask.sum()

    def test_translation_moves_content(self):
        img = np.zeros((16, 16))
        img[8, 8] = 1.0
        mask = (img > 0).astype(np.uint8)
        ai, am = affine_apply(img, mask, 0.0, (3.0, -2.0), 1.0)
        assert ai[11, 6] == pytest.approx(1.0)
        assert am[11, 6] == 1

    def test_out_of_bounds_fills_zero(self, rng):
        img = np.ones((16, 16))
        mask = np.ones((16, 16), np.uint8)
        ai, am = affine_apply(img, mask, 0.0, (8.0, 0.0), 1.0)
        assert np.all(ai[:4] == 0.0)
        assert np.all(am[:4] == 0)

    def test_reproducible_given_seed(self, rng):
        img, mask = scene(rng, 32, 32)
        cfg = AugmentConfig()
        a1 = affine(img, mask, cfg, np.random.default_rng(7))
        a2 = affine(img, mask, cfg, np.random.default_rng(7))
        np.testing.assert_array_equal(a1[0], a2[0])
        np.testing.assert_array_equal(a1[1], a2[1])

    def test_image_mask_correspondence(self, rng):
        # a pixel well inside the mask lands inside the transformed mask
        mask = np.zeros((64, 64), np.uint8)
        mask[24:40, 24:40] = 1
        img = mask.astype(np.float64)
        ai, am = affine_apply(img, mask, 15.0, (2.0, 1.0), 1.05)
        inside = am == 1
        assert inside.sum() > 0
        assert ai[inside].mean() > 0.9


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            AugmentConfig(flip_prob=1.5)
        with pytest.raises(ValueError):
            AugmentConfig(crop_h=0)
