"""Proposal weights, weighted pooling, and concatenated aggregation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sba import (
    ParamError,
    SbaAggregator,
    ShapeError,
    aggregate,
    compute_weights,
    pool_weighted,
    sum_pool,
)
from sba.detectors import DetectorSet

from conftest import random_tensor
from oracles import naive_aggregate, naive_pool_weighted, naive_weights


def _detectors(indices, c):
    return DetectorSet(indices=indices, variances=np.zeros(len(indices)),
                       source_channels=c)


class TestComputeWeights:
    def test_uniform_channel_closed_form(self):
        # v = const on a 2x2 grid with alpha=beta=2 gives 4^(-1/4) everywhere
        t = np.full((1, 2, 2), 3.7)
        w = compute_weights(t, 0, alpha=2.0, beta=2.0)
        np.testing.assert_allclose(w, 4.0 ** -0.25, rtol=1e-12)

    def test_zero_channel_gives_zero_weights(self):
        t = np.zeros((2, 3, 3))
        w = compute_weights(t, 0)
        assert np.all(w == 0.0)
        assert np.all(np.isfinite(w))

    def test_scale_invariance(self, rng):
        t = random_tensor(rng, c=1, h=4, w=4).astype(np.float64)
        base = compute_weights(t, 0)
        for lam in (1e-3, 7.0, 1e3):
            np.testing.assert_allclose(compute_weights(t * lam, 0), base,
                                       atol=1e-6)

    def test_negative_values_clamped(self):
        t = np.array([[[-2.0, 1.0], [1.0, 1.0]]])
        w = compute_weights(t, 0, alpha=2.0, beta=2.0)
        assert w[0, 0] == 0.0
        assert np.all(np.isfinite(w))

    def test_bad_params_rejected(self, rng):
        t = random_tensor(rng, c=2)
        with pytest.raises(ParamError):
            compute_weights(t, 0, alpha=0.0)
        with pytest.raises(ParamError):
            compute_weights(t, 0, beta=-1.0)
        with pytest.raises(ParamError):
            compute_weights(t, 5)

    def test_matches_loop_oracle(self, rng):
        for _ in range(20):
            t = random_tensor(rng)
            alpha = float(rng.uniform(0.5, 4))
            beta = float(rng.uniform(0.5, 4))
            det = int(rng.integers(0, t.shape[0]))
            np.testing.assert_allclose(
                compute_weights(t, det, alpha, beta),
                naive_weights(t, det, alpha, beta),
                atol=1e-9,
            )


class TestPoolWeighted:
    def test_unit_weights_reduce_to_sum_pool(self, rng):
        t = random_tensor(rng, c=4, h=3, w=3)
        np.testing.assert_allclose(
            pool_weighted(t, np.ones((3, 3))), sum_pool(t), rtol=1e-6
        )

    def test_zero_weights_annihilate(self, rng):
        t = random_tensor(rng, c=4, h=3, w=3)
        np.testing.assert_array_equal(pool_weighted(t, np.zeros((3, 3))),
                                      np.zeros(4))

    def test_dim_mismatch_rejected(self, rng):
        with pytest.raises(ShapeError):
            pool_weighted(random_tensor(rng, c=2, h=3, w=3), np.ones((2, 3)))

    def test_matches_loop_oracle(self, rng):
        for _ in range(20):
            t = random_tensor(rng)
            w = rng.random(t.shape[1:])
            np.testing.assert_allclose(
                pool_weighted(t, w), naive_pool_weighted(t, w), rtol=1e-6
            )


class TestAggregate:
    def test_single_detector_is_one_block(self, rng):
        t = random_tensor(rng, c=2, h=3, w=3)
        out = aggregate(t, _detectors([1], 2))
        assert out.shape == (2,)
        np.testing.assert_allclose(
            out, pool_weighted(t, compute_weights(t, 1))
        )

    def test_detector_order_swaps_blocks(self, rng):
        t = random_tensor(rng, c=4, h=3, w=3)
        ab = aggregate(t, _detectors([0, 2], 4))
        ba = aggregate(t, _detectors([2, 0], 4))
        np.testing.assert_array_equal(ab[:4], ba[4:])
        np.testing.assert_array_equal(ab[4:], ba[:4])

    def test_channel_count_mismatch_rejected(self, rng):
        with pytest.raises(ShapeError):
            aggregate(random_tensor(rng, c=3), _detectors([0], 4))

    def test_matches_naive_oracle(self, rng):
        t = random_tensor(rng, c=8, h=5, w=5)
        out = aggregate(t, _detectors([5, 0, 3], 8), alpha=2.0, beta=2.0)
        np.testing.assert_allclose(
            out, naive_aggregate(t, [5, 0, 3], 2.0, 2.0), atol=1e-5
        )


class TestProperties:
    @given(seed=st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_spatial_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        t = random_tensor(rng, c=4, h=3, w=4)
        flat = t.reshape(4, -1)
        perm = rng.permutation(12)
        permuted = flat[:, perm].reshape(4, 3, 4)
        np.testing.assert_allclose(
            aggregate(permuted, _detectors([0, 2], 4)),
            aggregate(t, _detectors([0, 2], 4)),
            rtol=1e-9,
        )

    def test_detector_channel_scale_leaves_weights_unchanged(self, rng):
        t = random_tensor(rng, c=3, h=4, w=4).astype(np.float64)
        scaled = t.copy()
        scaled[1] *= 50.0
        np.testing.assert_allclose(
            compute_weights(scaled, 1), compute_weights(t, 1), atol=1e-9
        )

    def test_non_negativity(self, rng):
        for _ in range(10):
            t = random_tensor(rng)
            n = int(rng.integers(1, t.shape[0] + 1))
            out = aggregate(t, _detectors(list(range(n)), t.shape[0]))
            assert np.all(out >= 0)

    def test_monotone_dominance(self, rng):
        t = random_tensor(rng, c=3, h=3, w=3) + 0.1
        w = compute_weights(t, 0)
        y, x = 1, 2
        assert w[y, x] > 0
        zeroed = t.copy()
        zeroed[:, y, x] = 0.0
        before = pool_weighted(t, w)
        after = pool_weighted(zeroed, w)
        assert np.all(after <= before + 1e-12)


class TestEstimator:
    def test_fit_transform_shape(self, rng):
        tensors = [random_tensor(rng, c=6, h=3, w=3) for _ in range(10)]
        agg = SbaAggregator(n_detectors=4)
        vectors = agg.fit(tensors).transform(tensors)
        assert vectors.shape == (10, 4 * 6)
        assert len(agg.detectors_) == 4

    def test_transform_matches_functional_path(self, rng):
        tensors = [random_tensor(rng, c=5, h=3, w=3) for _ in range(6)]
        agg = SbaAggregator(n_detectors=2).fit(tensors)
        rows = agg.transform(tensors)
        for row, t in zip(rows, tensors):
            np.testing.assert_allclose(row, aggregate(t, agg.detectors_))
