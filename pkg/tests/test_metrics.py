import math

import numpy as np
import pytest

from sonomark import metrics
from sonomark.errors import InvalidInputError
from sonomark.metrics import LossWeights, bce_loss, pretrain_loss, rmse, ssim, wm_loss


def brute_mse(a, b):
    """Independent oracle: plain python summation over flattened elements."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    total = 0.0
    for x, y in zip(a.tolist(), b.tolist()):
        total += (x - y) ** 2
    return total / len(a)


class TestPretrainLoss:
    def test_identity_is_zero(self, rng):
        w = rng.uniform(-1, 1, 8192)
        assert pretrain_loss(w, w) == 0.0

    def test_unit_offset(self):
        assert pretrain_loss(np.ones(8192), np.zeros(8192)) == 1.0

    def test_single_spike(self):
        w = np.zeros(8192)
        w[0] = 1.0
        expected = brute_mse(w, np.zeros(8192))
        assert math.isclose(pretrain_loss(w, np.zeros(8192)), expected, rel_tol=1e-12)
        assert math.isclose(expected, 1.0 / 8192, rel_tol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            pretrain_loss(np.zeros(10), np.zeros(11))

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            a = rng.normal(size=257)
            b = rng.normal(size=257)
            assert math.isclose(pretrain_loss(a, b), brute_mse(a, b), rel_tol=1e-12)


class TestWmLoss:
    def test_zero_at_fixed_point(self, rng):
        w = rng.uniform(-1, 1, 64)
        c = rng.uniform(0, 1, (8, 8, 3))
        assert wm_loss(w, w, c, c, LossWeights(3.0, 7.0)) == 0.0

    def test_weighted_combination(self, rng):
        w, wp = rng.normal(size=100), rng.normal(size=100)
        c, m = rng.uniform(size=(5, 5, 3)), rng.uniform(size=(5, 5, 3))
        a, b = brute_mse(w, wp), brute_mse(c, m)
        got = wm_loss(w, wp, c, m, LossWeights(2.0, 3.0))
        assert math.isclose(got, 2 * a + 3 * b, rel_tol=1e-12)

    def test_scaling_weights_scales_loss(self, rng):
        w, wp = rng.normal(size=50), rng.normal(size=50)
        c, m = rng.uniform(size=(4, 4, 3)), rng.uniform(size=(4, 4, 3))
        base = wm_loss(w, wp, c, m, LossWeights(1.0, 2.0))
        scaled = wm_loss(w, wp, c, m, LossWeights(5.0, 10.0))
        assert math.isclose(scaled, 5 * base, rel_tol=1e-12)

    def test_brute_force_fixtures(self, rng):
        for _ in range(30):
            w, wp = rng.normal(size=128), rng.normal(size=128)
            c, m = rng.uniform(size=(6, 6, 3)), rng.uniform(size=(6, 6, 3))
            lw = LossWeights(float(rng.uniform(0, 4)), float(rng.uniform(0.1, 4)))
            expected = lw.lambda1 * brute_mse(w, wp) + lw.lambda2 * brute_mse(c, m)
            assert math.isclose(wm_loss(w, wp, c, m, lw), expected, rel_tol=1e-12)

    def test_weight_validation(self):
        with pytest.raises(InvalidInputError):
            LossWeights(-1.0, 1.0)
        with pytest.raises(InvalidInputError):
            LossWeights(0.0, 0.0)


class TestBceLoss:
    def test_confident_correct_is_near_zero(self):
        assert bce_loss(1, 1.0 - 1e-9) < 1e-6
        assert bce_loss(0, 1e-9) < 1e-6

    def test_half_probability_closed_form(self):
        assert abs(bce_loss(1, 0.5) - math.log(2)) < 1e-9
        assert abs(bce_loss(0, 0.5) - math.log(2)) < 1e-9

    def test_clamping_guards_log(self):
        assert np.isfinite(bce_loss(1, 0.0))
        assert np.isfinite(bce_loss(0, 1.0))

    def test_gradient_matches_closed_form(self):
        # d/dp of -[y log p + (1-y) log(1-p)] is -(y/p) + (1-y)/(1-p)
        for y in (0, 1):
            for p in (0.2, 0.5, 0.8):
                h = 1e-6
                fd = (bce_loss(y, p + h) - bce_loss(y, p - h)) / (2 * h)
                closed = -(y / p) + (1 - y) / (1 - p)
                assert abs(fd - closed) < 1e-6 * max(1.0, abs(closed))

    def test_label_validation(self):
        with pytest.raises(InvalidInputError):
            bce_loss(2, 0.5)


class TestRmse:
    def test_identity(self, rng):
        a = rng.normal(size=(10, 10))
        assert rmse(a, a) == 0.0

    def test_constant_offset(self):
        a = np.zeros((16, 16))
        assert math.isclose(rmse(a, a + 0.5), 0.5, rel_tol=1e-12)

    def test_consistent_with_mse(self, rng):
        a, b = rng.normal(size=300), rng.normal(size=300)
        assert math.isclose(rmse(a, b), math.sqrt(pretrain_loss(a, b)), rel_tol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            rmse(np.zeros(3), np.zeros(4))

    def test_full_scale_reference_constants_present(self):
        assert metrics.FULL_SCALE_TEST_RMSE == 0.009452
        assert metrics.FULL_SCALE_TEST_SSIM == 0.988230


class TestSsim:
    def test_identity_is_one(self, rng):
        x = rng.uniform(0, 1, (128, 128, 3))
        assert math.isclose(ssim(x, x), 1.0, abs_tol=1e-12)

    def test_symmetry(self, rng):
        a = rng.uniform(0, 1, (64, 64, 3))
        b = rng.uniform(0, 1, (64, 64, 3))
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12

    def test_constant_offset_luminance_only(self):
        # zero-variance images: contrast/structure term is exactly 1, so
        # SSIM reduces to the closed-form luminance term
        a = np.full((32, 32, 3), 0.2)
        b = np.full((32, 32, 3), 0.7)
        c1 = 0.01**2
        expected = (2 * 0.2 * 0.7 + c1) / (0.2**2 + 0.7**2 + c1)
        got = ssim(a, b)
        assert got < 1.0
        assert math.isclose(got, expected, rel_tol=1e-9)

    def test_against_skimage_oracle(self, rng):
        skimage_metrics = pytest.importorskip("skimage.metrics")
        for _ in range(5):
            a = rng.uniform(0, 1, (128, 128, 3))
            b = np.clip(a + rng.normal(0, 0.05, a.shape), 0, 1)
            ref = skimage_metrics.structural_similarity(
                a,
                b,
                channel_axis=2,
                gaussian_weights=True,
                sigma=1.5,
                use_sample_covariance=False,
                data_range=1.0,
            )
            assert math.isclose(ssim(a, b), ref, rel_tol=1e-6, abs_tol=1e-7)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            ssim(np.zeros((8, 8, 3)), np.zeros((9, 9, 3)))
