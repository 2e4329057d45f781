from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mothscan import InputError, ProbVector, cross_entropy, final_loss, fuse_geometric


def prob_vectors(n_min=1, n_max=8):
    return (
        st.lists(st.floats(1e-6, 1.0, allow_nan=False), min_size=n_min, max_size=n_max)
        .map(lambda v: np.asarray(v) / np.sum(v))
        .map(ProbVector)
    )


class TestProbVector:
    def test_valid(self):
        p = ProbVector(np.array([0.25, 0.75]))
        assert len(p) == 2

    def test_rejects_bad_sum(self):
        with pytest.raises(InputError):
            ProbVector(np.array([0.5, 0.6]))

    def test_accepts_sum_within_tolerance(self):
        ProbVector(np.array([0.5, 0.5 + 5e-10]))

    def test_rejects_negative(self):
        with pytest.raises(InputError):
            ProbVector(np.array([1.5, -0.5]))

    def test_rejects_nan(self):
        with pytest.raises(InputError):
            ProbVector(np.array([np.nan, 1.0]))

    def test_rejects_matrix(self):
        with pytest.raises(InputError):
            ProbVector(np.ones((2, 2)) / 4)

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            ProbVector(np.array([]))

    def test_probs_read_only(self):
        p = ProbVector(np.array([1.0]))
        with pytest.raises(ValueError):
            p.probs[0] = 0.5


class TestCrossEntropy:
    def test_matches_negative_log(self):
        p = ProbVector(np.array([0.1, 0.6, 0.3]))
        assert cross_entropy(p, 1) == pytest.approx(-math.log(0.6), abs=1e-12)

    def test_certain_class_zero_loss(self):
        assert cross_entropy(ProbVector(np.array([0.0, 1.0])), 1) == 0.0

    def test_zero_probability_floored(self):
        got = cross_entropy(ProbVector(np.array([0.0, 1.0])), 0)
        assert got == pytest.approx(-math.log(1e-12), rel=1e-12)

    def test_label_out_of_range(self):
        p = ProbVector(np.array([0.5, 0.5]))
        with pytest.raises(InputError):
            cross_entropy(p, 2)
        with pytest.raises(InputError):
            cross_entropy(p, -1)


class TestFinalLoss:
    def test_mean_of_two_losses(self):
        p = ProbVector(np.array([0.2, 0.8]))
        q = ProbVector(np.array([0.7, 0.3]))
        want = 0.5 * (-math.log(0.8) - math.log(0.3))
        assert final_loss(p, q, 1) == pytest.approx(want, abs=1e-12)

    @given(p=prob_vectors(3, 3), q=prob_vectors(3, 3), y=st.integers(0, 2))
    @settings(max_examples=100, deadline=None)
    def test_equals_log_of_geometric_mean(self, p, q, y):
        want = -math.log(math.sqrt(p.probs[y] * q.probs[y]))
        assert abs(final_loss(p, q, y) - want) <= 1e-12

    @given(p=prob_vectors(4, 4), y=st.integers(0, 3))
    @settings(max_examples=60, deadline=None)
    def test_self_fusion_loss_is_cross_entropy(self, p, y):
        assert abs(final_loss(p, p, y) - cross_entropy(p, y)) <= 1e-12

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            final_loss(ProbVector(np.array([1.0])), ProbVector(np.array([0.5, 0.5])), 0)


class TestFuseGeometric:
    def test_hand_case(self):
        p = ProbVector(np.array([0.9, 0.1]))
        q = ProbVector(np.array([0.5, 0.5]))
        r = np.sqrt([0.45, 0.05])
        want = r / r.sum()
        np.testing.assert_allclose(fuse_geometric(p, q).probs, want, atol=1e-12)

    @given(p=prob_vectors())
    @settings(max_examples=100, deadline=None)
    def test_self_fusion_identity(self, p):
        got = fuse_geometric(p, p)
        assert np.abs(got.probs - p.probs).max() <= 1e-9

    @given(p=prob_vectors(4, 4), q=prob_vectors(4, 4))
    @settings(max_examples=100, deadline=None)
    def test_symmetric_and_normalized(self, p, q):
        a = fuse_geometric(p, q)
        b = fuse_geometric(q, p)
        np.testing.assert_allclose(a.probs, b.probs, atol=1e-12)
        assert abs(float(a.probs.sum()) - 1.0) <= 1e-9

    def test_disjoint_support_uniform(self):
        p = ProbVector(np.array([1.0, 0.0]))
        q = ProbVector(np.array([0.0, 1.0]))
        np.testing.assert_array_equal(fuse_geometric(p, q).probs, [0.5, 0.5])

    def test_shared_certainty_preserved(self):
        p = ProbVector(np.array([0.0, 1.0, 0.0]))
        q = ProbVector(np.array([0.0, 1.0, 0.0]))
        np.testing.assert_array_equal(fuse_geometric(p, q).probs, [0.0, 1.0, 0.0])

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            fuse_geometric(ProbVector(np.array([1.0])), ProbVector(np.array([0.5, 0.5])))

    @given(p=prob_vectors(3, 3), q=prob_vectors(3, 3))
    @settings(max_examples=60, deadline=None)
    def test_fused_argmax_tracks_product(self, p, q):
        # the fused vector ranks classes by p[i]*q[i]; only assert when the
        # top two products are separated beyond sqrt's rounding noise
        prod = p.probs * q.probs
        top_two = np.sort(prod)[::-1][:2]
        if top_two[0] - top_two[1] <= 1e-9 * top_two[0]:
            return
        fused = fuse_geometric(p, q)
        assert int(fused.probs.argmax()) == int(prod.argmax())
