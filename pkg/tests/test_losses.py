import math

import numpy as np
import pytest

from evmv.errors import DimensionError, DomainError
from evmv.losses import (
    LabelVector,
    ace_loss,
    anneal_coefficient,
    kl_to_uniform,
    overall_loss,
    sample_loss,
    tilde_alpha,
)
from evmv.sl import DirichletParams
from evmv.special import digamma, trigamma

LN2 = math.log(2.0)


def harmonic(n):
    return sum(1.0 / k for k in range(1, n + 1))


class TestAceLoss:
    def test_uniform_prior(self):
        value, grad = ace_loss(DirichletParams([1.0, 1.0]), LabelVector([1, 0]))
        assert value == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(
            grad, [trigamma(2.0) - trigamma(1.0), trigamma(2.0)], atol=1e-12
        )

    def test_confident_correct(self):
        value, _ = ace_loss(DirichletParams([101.0, 1.0]), LabelVector([1, 0]))
        assert value == pytest.approx(1.0 / 101.0, rel=1e-10)

    def test_confident_wrong(self):
        value, _ = ace_loss(DirichletParams([1.0, 101.0]), LabelVector([1, 0]))
        assert value == pytest.approx(harmonic(101), rel=1e-10)

    def test_non_negative_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            k = int(rng.integers(2, 6))
            alpha = 1.0 + rng.uniform(0, 30, size=k)
            y = LabelVector.from_index(int(rng.integers(k)), k)
            value, _ = ace_loss(DirichletParams(alpha), y)
            assert value >= 0.0

    def test_monotone_in_true_class_evidence(self):
        base = np.array([2.0, 3.0, 1.5])
        losses = []
        for bump in (0.0, 1.0, 5.0, 20.0):
            alpha = base.copy()
            alpha[0] += bump
            value, _ = ace_loss(DirichletParams(alpha), LabelVector([1, 0, 0]))
            losses.append(value)
        assert np.all(np.diff(losses) < 0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        h = 1e-4
        for _ in range(100):
            k = int(rng.integers(2, 6))
            alpha = 1.0 + rng.uniform(0.1, 20, size=k)
            y = LabelVector.from_index(int(rng.integers(k)), k)
            _, grad = ace_loss(DirichletParams(alpha), y)
            for j in range(k):
                up, down = alpha.copy(), alpha.copy()
                up[j] += h
                down[j] -= h
                fd = (ace_loss(DirichletParams(up), y)[0] - ace_loss(DirichletParams(down), y)[0]) / (2 * h)
                tol = 1e-3 * max(abs(fd), 1e-3)
                assert abs(grad[j] - fd) <= tol


class TestTildeAlpha:
    def test_examples(self):
        np.testing.assert_array_equal(
            tilde_alpha(DirichletParams([5.0, 3.0]), LabelVector([1, 0])), [1.0, 3.0]
        )
        np.testing.assert_array_equal(
            tilde_alpha(DirichletParams([1.0, 1.0]), LabelVector([0, 1])), [1.0, 1.0]
        )
        np.testing.assert_array_equal(
            tilde_alpha(DirichletParams([9.0, 2.0, 2.0]), LabelVector([0, 0, 1])),
            [9.0, 2.0, 1.0],
        )

    def test_true_slot_pinned_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            alpha = 1.0 + rng.uniform(0, 50, size=k)
            idx = int(rng.integers(k))
            at = tilde_alpha(DirichletParams(alpha), LabelVector.from_index(idx, k))
            assert at[idx] == 1.0
            others = np.delete(np.arange(k), idx)
            np.testing.assert_array_equal(at[others], alpha[others])


class TestKlToUniform:
    def test_uniform_is_zero(self):
        value, _ = kl_to_uniform([1.0, 1.0])
        assert value == pytest.approx(0.0, abs=1e-12)
        value, _ = kl_to_uniform([1.0, 1.0, 1.0])
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_hand_worked_value(self):
        value, _ = kl_to_uniform([2.0, 1.0])
        assert value == pytest.approx(LN2 - 0.5, abs=1e-12)

    def test_domain_error_below_one(self):
        with pytest.raises(DomainError):
            kl_to_uniform([0.9, 1.5])

    def test_non_negative_with_equality_iff_ones(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            k = int(rng.integers(2, 6))
            at = 1.0 + rng.uniform(0, 20, size=k) * (rng.random(k) < 0.7)
            value, _ = kl_to_uniform(at)
            if np.all(at == 1.0):
                assert value == pytest.approx(0.0, abs=1e-12)
            else:
                assert value > 0.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        h = 1e-4
        for _ in range(100):
            k = int(rng.integers(2, 6))
            at = 1.0 + rng.uniform(0.05, 20, size=k)
            _, grad = kl_to_uniform(at)
            for j in range(k):
                up, down = at.copy(), at.copy()
                up[j] += h
                down[j] -= h
                fd = (kl_to_uniform(up)[0] - kl_to_uniform(down)[0]) / (2 * h)
                tol = 1e-3 * max(abs(fd), 1e-3)
                assert abs(grad[j] - fd) <= tol


class TestAnnealCoefficient:
    def test_examples(self):
        assert anneal_coefficient(0, 10) == 0.0
        assert anneal_coefficient(5, 10) == 0.5
        assert anneal_coefficient(25, 10) == 1.0

    def test_non_decreasing_and_bounded(self):
        values = [anneal_coefficient(e, 7) for e in range(40)]
        assert all(0.0 <= v <= 1.0 for v in values)
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            anneal_coefficient(1, 0)
        with pytest.raises(ValueError):
            anneal_coefficient(-1, 5)


class TestSampleLoss:
    def test_uniform_prior_full_lambda(self):
        lv = sample_loss(DirichletParams([1.0, 1.0]), LabelVector([1, 0]), 1.0)
        assert lv.total == pytest.approx(1.0, abs=1e-12)
        assert lv.ace == pytest.approx(1.0, abs=1e-12)
        assert lv.kl == pytest.approx(0.0, abs=1e-12)

    def test_lambda_zero_disables_regularizer(self):
        d = DirichletParams([5.0, 3.0])
        y = LabelVector([1, 0])
        lv = sample_loss(d, y, 0.0)
        assert lv.total == ace_loss(d, y)[0]

    def test_total_at_least_ace(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            k = int(rng.integers(2, 5))
            d = DirichletParams(1.0 + rng.uniform(0, 30, size=k))
            y = LabelVector.from_index(int(rng.integers(k)), k)
            lv = sample_loss(d, y, 1.0)
            assert lv.total >= lv.ace - 1e-12
            assert lv.total == pytest.approx(lv.ace + lv.lam * lv.kl, abs=1e-12)

    def test_lambda_out_of_range(self):
        with pytest.raises(ValueError):
            sample_loss(DirichletParams([1.0, 1.0]), LabelVector([1, 0]), 1.5)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        h = 1e-4
        for _ in range(100):
            k = int(rng.integers(2, 6))
            alpha = 1.0 + rng.uniform(0.05, 20, size=k)
            y = LabelVector.from_index(int(rng.integers(k)), k)
            lam = float(rng.random())
            grad = sample_loss(DirichletParams(alpha), y, lam).grad_alpha
            for j in range(k):
                up, down = alpha.copy(), alpha.copy()
                up[j] += h
                down[j] -= h
                fd = (
                    sample_loss(DirichletParams(up), y, lam).total
                    - sample_loss(DirichletParams(down), y, lam).total
                ) / (2 * h)
                tol = 1e-3 * max(abs(fd), 1e-3)
                assert abs(grad[j] - fd) <= tol


class TestOverallLoss:
    def test_no_views_equals_sample_loss(self):
        d = DirichletParams([4.0, 2.0])
        y = LabelVector([0, 1])
        agg = overall_loss(d, [], y, 0.5)
        assert agg.total == sample_loss(d, y, 0.5).total
        assert agg.views == ()

    def test_identical_views_scale_linearly(self):
        d = DirichletParams([1.0, 1.0])
        y = LabelVector([1, 0])
        for v in (1, 2, 5):
            agg = overall_loss(d, [d] * v, y, 0.0)
            assert agg.total == pytest.approx((v + 1) * 1.0, abs=1e-12)

    def test_mismatched_k_rejected(self):
        with pytest.raises(DimensionError):
            overall_loss(
                DirichletParams([1.0, 1.0]),
                [DirichletParams([1.0, 1.0, 1.0])],
                LabelVector([1, 0]),
                0.5,
            )

    def test_gradients_per_component(self):
        rng = np.random.default_rng(7)
        h = 1e-4
        fused = DirichletParams(1.0 + rng.uniform(0, 5, size=3))
        views = [DirichletParams(1.0 + rng.uniform(0, 5, size=3)) for _ in range(2)]
        y = LabelVector([0, 1, 0])
        lam = 0.8
        agg = overall_loss(fused, views, y, lam)
        for vi, d in enumerate(views):
            for j in range(3):
                up = d.alpha.copy()
                up[j] += h
                down = d.alpha.copy()
                down[j] -= h
                views_up = list(views)
                views_up[vi] = DirichletParams(up)
                views_down = list(views)
                views_down[vi] = DirichletParams(down)
                fd = (
                    overall_loss(fused, views_up, y, lam).total
                    - overall_loss(fused, views_down, y, lam).total
                ) / (2 * h)
                assert abs(agg.views[vi].grad_alpha[j] - fd) <= 1e-3 * max(abs(fd), 1e-3)


def test_digamma_link():
    # ace on the uniform prior is psi(2) - psi(1), which the recurrence makes 1/1
    assert digamma(2.0) - digamma(1.0) == pytest.approx(1.0, abs=1e-12)
