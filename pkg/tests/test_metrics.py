import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activedict.errors import ParameterError
from activedict.metrics import (
    SNR_CAP_DB,
    average_coherence,
    dict_distance,
    hist_intersection_distance,
    mutual_coherence,
    true_snr_of_selection,
)
from activedict.synthgen import make_gabor_dictionary, sample_codes, sigma_for_snr, synthesize

from oracles import brute_force_distance, unit_columns


def gram_example():
    G = np.array([[1.0, 0.2, -0.5], [0.2, 1.0, 0.1], [-0.5, 0.1, 1.0]])
    return np.linalg.cholesky(G).T


class TestDictDistance:
    def test_identity(self):
        A = unit_columns(np.random.default_rng(0).normal(size=(6, 5)))
        assert dict_distance(A, A) == 0.0

    def test_permutation_invariant(self):
        A = unit_columns(np.random.default_rng(1).normal(size=(6, 5)))
        assert dict_distance(A[:, [3, 1, 4, 0, 2]], A) == pytest.approx(0.0, abs=1e-15)

    def test_four_by_four_brute_force(self):
        rng = np.random.default_rng(2)
        A, B = rng.normal(size=(2, 4, 4))
        assert abs(dict_distance(A, B) - brute_force_distance(A, B)) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(K=st.integers(1, 6), P=st.integers(1, 8), seed=st.integers(0, 2 ** 32 - 1))
    def test_matches_brute_force(self, K, P, seed):
        rng = np.random.default_rng(seed)
        A = unit_columns(rng.normal(size=(P, K)))
        B = unit_columns(rng.normal(size=(P, K)))
        assert abs(dict_distance(A, B) - brute_force_distance(A, B)) <= 1e-12

    def test_symmetric_under_joint_permutation(self):
        rng = np.random.default_rng(3)
        A, B = rng.normal(size=(2, 5, 6))
        perm = rng.permutation(6)
        assert dict_distance(A[:, perm], B[:, perm]) == pytest.approx(dict_distance(A, B), abs=1e-14)

    def test_no_sign_flips(self):
        a = np.array([[1.0], [0.0], [0.0]])
        # a flipped atom sits at squared distance 4, not 0
        assert dict_distance(-a, a) == pytest.approx(4.0 / 3.0)

    def test_return_perm(self):
        A = unit_columns(np.random.default_rng(4).normal(size=(6, 5)))
        order = np.array([2, 0, 4, 1, 3])
        d, perm = dict_distance(A[:, order], A, return_perm=True)
        np.testing.assert_array_equal(A[:, order][:, perm], A)

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError):
            dict_distance(np.eye(3), np.eye(4))


class TestCoherence:
    def test_hand_example(self):
        A = gram_example()
        assert mutual_coherence(A) == pytest.approx(0.5, abs=1e-12)
        assert average_coherence(A) == pytest.approx(0.8 / 3, abs=1e-12)
        assert average_coherence(A) == pytest.approx(0.2667, abs=1e-4)

    def test_orthonormal(self):
        Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(5, 5)))
        assert mutual_coherence(Q) == pytest.approx(0.0, abs=1e-12)
        assert average_coherence(Q) == pytest.approx(0.0, abs=1e-12)

    def test_duplicate_column(self):
        A = unit_columns(np.random.default_rng(1).normal(size=(6, 3)))
        assert mutual_coherence(np.column_stack([A, A[:, 1]])) == pytest.approx(1.0)

    def test_mean_below_max(self):
        A = make_gabor_dictionary(8, 30, seed=2)
        assert average_coherence(A) <= mutual_coherence(A)

    def test_single_column(self):
        with pytest.raises(ParameterError):
            mutual_coherence(np.ones((3, 1)))


class TestTrueSnr:
    @pytest.fixture(scope="class")
    @classmethod
    def batch(cls):
        A = make_gabor_dictionary(8, 64, seed=0)
        S = sample_codes(64, 5, 1.0, 10_000, seed=1)
        return synthesize(A, S, sigma_for_snr(1.0, 5, 64, 6.0), seed=2, lam=1.0, k=5)

    def test_all_examples_match_calibration(self, batch):
        assert abs(true_snr_of_selection(batch, np.arange(batch.N)) - 6.0) <= 0.5

    def test_high_energy_subset_not_worse(self, batch):
        energy = (batch.clean ** 2).sum(axis=0)
        top = np.argsort(-energy)[:500]
        assert true_snr_of_selection(batch, top) >= true_snr_of_selection(batch, np.arange(batch.N))

    def test_direct_formula(self, batch):
        idx = np.array([3, 17, 256])
        signal = sum(np.sum((batch.A_star @ batch.S_true[:, i]) ** 2) for i in idx)
        noise = sum(np.sum(batch.E[:, i] ** 2) for i in idx)
        assert true_snr_of_selection(batch, idx) == pytest.approx(10 * np.log10(signal / noise), rel=1e-12)

    def test_noiseless_capped(self):
        A = make_gabor_dictionary(8, 10, seed=0)
        b = synthesize(A, sample_codes(10, 2, 1.0, 20, seed=1), 0.0, seed=2)
        assert true_snr_of_selection(b, [0, 1]) == SNR_CAP_DB

    def test_empty(self, batch):
        with pytest.raises(ParameterError):
            true_snr_of_selection(batch, [])


class TestHistogramDistance:
    def test_identical(self):
        X = np.random.default_rng(0).normal(size=(5, 200))
        assert hist_intersection_distance(X, X) == 0.0

    def test_permuted_columns(self):
        X = np.random.default_rng(1).normal(size=(5, 200))
        assert hist_intersection_distance(X[:, ::-1], X) == pytest.approx(0.0, abs=1e-12)

    def test_disjoint(self):
        # pool mass sits in the two edge bins, the subset sits in the middle
        X_N = np.tile([0.0, 1.0], (3, 50))
        X_n = np.full((3, 10), 0.5)
        assert hist_intersection_distance(X_n, X_N) == 1.0

    def test_out_of_range_clamps_to_edge(self):
        X_N = np.tile([0.0, 1.0], (2, 50))
        X_n = np.array([[-5.0, 9.0], [-5.0, 9.0]])
        assert hist_intersection_distance(X_n, X_N) == pytest.approx(0.0, abs=1e-12)

    def test_half_subsample(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(64, 10_000))
        half = rng.choice(10_000, 5000, replace=False)
        assert hist_intersection_distance(X[:, half], X, bins=32) < 0.05

    def test_hand_computed(self):
        # two bins over [0, 1]: pool 3 left / 1 right, subset 1 left / 1 right
        X_N = np.array([[0.0, 0.1, 0.2, 1.0]])
        X_n = np.array([[0.0, 1.0]])
        expected = 1 - (min(0.75, 0.5) + min(0.25, 0.5))
        assert hist_intersection_distance(X_n, X_N, bins=2) == pytest.approx(expected)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 40), bins=st.integers(2, 40))
    def test_in_unit_interval(self, seed, n, bins):
        rng = np.random.default_rng(seed)
        X_N = rng.normal(size=(4, 60))
        X_n = rng.normal(loc=rng.normal(), size=(4, n))
        assert 0.0 <= hist_intersection_distance(X_n, X_N, bins) <= 1.0

    def test_bad_bins(self):
        with pytest.raises(ParameterError):
            hist_intersection_distance(np.ones((2, 2)), np.ones((2, 2)), bins=1)
