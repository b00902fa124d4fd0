import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activedict.encoders import (
    EncoderSpec,
    encode_batch,
    encode_ksparse,
    encode_l0,
    encode_l1,
    kkt_residuals,
)
from activedict.errors import EncoderError, ParameterError
from activedict.synthgen import make_gabor_dictionary, sample_codes, synthesize

from oracles import l1_objective, projected_gradient_l1, unit_columns


def random_instance(rng, P=8, K=16, k=3, noise=0.1):
    A = unit_columns(rng.normal(size=(P, K)))
    s = np.zeros(K)
    s[rng.choice(K, k, replace=False)] = rng.exponential(1.0, k)
    return A, A @ s + noise * rng.normal(size=P)


class TestL1:
    def test_orthonormal_soft_threshold(self):
        s = encode_l1(np.array([3.0, 0.1, 0.0]), np.eye(3), penalty=1.0, noise_var=1.0)
        np.testing.assert_allclose(s, [2.0, 0.0, 0.0], atol=1e-12)

    def test_threshold_scales_with_noise_var(self):
        # effective threshold is penalty * sigma^2
        s = encode_l1(np.array([3.0, 0.1, 0.0]), np.eye(3), penalty=2.0, noise_var=0.25)
        np.testing.assert_allclose(s, [2.5, 0.0, 0.0], atol=1e-12)

    def test_zero_signal(self):
        A = unit_columns(np.random.default_rng(0).normal(size=(8, 16)))
        np.testing.assert_array_equal(encode_l1(np.zeros(8), A, 1.0), np.zeros(16))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_projected_gradient_objective(self, seed):
        rng = np.random.default_rng(seed)
        A, x = random_instance(rng)
        penalty, noise_var = 0.8, 0.5
        s = encode_l1(x, A, penalty, noise_var=noise_var)
        ref = projected_gradient_l1(x, A, penalty, noise_var)
        assert abs(l1_objective(x, A, s, penalty, noise_var)
                   - l1_objective(x, A, ref, penalty, noise_var)) <= 1e-6

    def test_kkt_overcomplete(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            A, x = random_instance(rng, P=64, K=100, k=5, noise=0.2)
            s = encode_l1(x, A, 2.0, noise_var=0.2)
            assert np.all(s >= 0)
            assert kkt_residuals(A, x[:, None], s[:, None], 2.0, 0.2)[0] <= 1e-6

    def test_bad_penalty(self):
        with pytest.raises(ParameterError):
            encode_l1(np.ones(3), np.eye(3), 0.0)

    def test_iteration_cap_raises_with_best_iterate(self):
        rng = np.random.default_rng(2)
        A, x = random_instance(rng, P=16, K=32, k=6, noise=0.0)
        with pytest.raises(EncoderError) as info:
            encode_l1(x, A, 1e-3, noise_var=1.0, max_iter=1)
        assert info.value.best is not None
        assert info.value.best.shape == (32, 1)


class TestL0:
    def test_orthonormal_exact(self):
        Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(4, 4)))
        code = np.array([0.0, 5.0, 0.0, 2.0])
        s = encode_l0(Q @ code, Q, 2)
        np.testing.assert_allclose(s, code, atol=1e-12)

    def test_zero_signal_stops_early(self):
        np.testing.assert_array_equal(encode_l0(np.zeros(4), np.eye(4), 3), np.zeros(4))

    def test_anticorrelated_signal(self):
        A = unit_columns(np.abs(np.random.default_rng(1).normal(size=(6, 5))))
        np.testing.assert_array_equal(encode_l0(-A[:, 0], A, 3), np.zeros(5))

    def test_residual_non_increasing_over_steps(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            A, x = random_instance(rng, P=16, K=30, k=5, noise=0.3)
            errs = [np.linalg.norm(x)]
            for k in range(1, 8):
                s = encode_l0(x, A, k)
                assert np.count_nonzero(s) <= k
                assert np.all(s >= 0)
                errs.append(np.linalg.norm(x - A @ s))
            assert np.all(np.diff(errs) <= 1e-12)

    def test_refit_is_nonnegative_least_squares(self):
        # on its chosen support the code must satisfy NNLS optimality
        rng = np.random.default_rng(9)
        A, x = random_instance(rng, P=12, K=20, k=4, noise=0.2)
        s = encode_l0(x, A, 4)
        g = A.T @ (x - A @ s)
        on = s > 0
        np.testing.assert_allclose(g[on], 0.0, atol=1e-9)

    def test_bad_k(self):
        with pytest.raises(ParameterError):
            encode_l0(np.ones(3), np.eye(3), 4)


class TestKSparse:
    def test_top1(self):
        np.testing.assert_array_equal(encode_ksparse(np.array([3.0, 1.0, 2.0]), np.eye(3), 1), [3, 0, 0])

    def test_top2_by_value(self):
        np.testing.assert_array_equal(encode_ksparse(np.array([-3.0, 1.0, 2.0]), np.eye(3), 2), [0, 1, 2])

    def test_all_negative_clamped(self):
        np.testing.assert_array_equal(encode_ksparse(np.array([-3.0, -1.0, -2.0]), np.eye(3), 1), [0, 0, 0])

    def test_ties_go_to_lower_index(self):
        np.testing.assert_array_equal(encode_ksparse(np.array([1.0, 2.0, 2.0]), np.eye(3), 1), [0, 2, 0])

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), k=st.integers(1, 10))
    def test_support_matches_sort(self, seed, k):
        rng = np.random.default_rng(seed)
        A = unit_columns(rng.normal(size=(8, 10)))
        x = rng.normal(size=8)
        s = encode_ksparse(x, A, k)
        c = A.T @ x
        top = sorted(range(10), key=lambda j: (-c[j], j))[:k]
        expected = np.zeros(10)
        expected[top] = np.maximum(c[top], 0)
        np.testing.assert_array_equal(s, expected)


def test_noiseless_orthonormal_recovery_all_encoders():
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.normal(size=(10, 10)))
    code = np.zeros(10)
    code[[1, 4, 7]] = [3.0, 5.0, 4.0]
    x = Q @ code
    support = {1, 4, 7}
    assert set(np.flatnonzero(encode_l1(x, Q, 0.5, noise_var=1.0))) == support
    assert set(np.flatnonzero(encode_l0(x, Q, 3))) == support
    assert set(np.flatnonzero(encode_ksparse(x, Q, 3))) == support


class TestBatch:
    @pytest.fixture(scope="class")
    @classmethod
    def problem(cls):
        A = make_gabor_dictionary(8, 100, seed=1)
        S = sample_codes(100, 5, 1.0, 500, seed=2)
        return A, synthesize(A, S, 0.2, seed=3).X

    def test_empty(self):
        S = encode_batch(np.zeros((4, 0)), np.eye(4), EncoderSpec("l0", k=2))
        assert S.shape == (4, 0)

    @pytest.mark.parametrize("spec", [EncoderSpec("l1", penalty=12.8, noise_var=0.04),
                                      EncoderSpec("l0", k=5), EncoderSpec("ksparse", k=5)])
    def test_columns_match_single_calls(self, problem, spec):
        A, X = problem
        S = encode_batch(X[:, :40], A, spec)
        for i in range(40):
            if spec.kind == "l1":
                single = encode_l1(X[:, i], A, spec.penalty, noise_var=spec.noise_var)
            elif spec.kind == "l0":
                single = encode_l0(X[:, i], A, spec.k)
            else:
                single = encode_ksparse(X[:, i], A, spec.k)
            # batch correlations go through gemm, single ones through gemv
            np.testing.assert_allclose(S[:, i], single, rtol=0, atol=1e-12)

    def test_omp_sparsity_contract(self, problem):
        A, X = problem
        S = encode_batch(X, A, EncoderSpec("omp", k=5))
        assert np.all((S > 0).sum(axis=0) <= 5)
        assert np.all(S >= 0) and np.all(np.isfinite(S))

    def test_error_carries_column(self):
        rng = np.random.default_rng(2)
        A = unit_columns(rng.normal(size=(16, 32)))
        X = A @ np.abs(rng.normal(size=(32, 3)))
        with pytest.raises(EncoderError) as info:
            encode_batch(X, A, EncoderSpec("l1", penalty=1e-3, max_iter=1))
        assert info.value.column == 0

    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            EncoderSpec("l1")
        with pytest.raises(ParameterError):
            EncoderSpec("ksparse")
        with pytest.raises(ParameterError):
            EncoderSpec("sparse-magic", k=2)
        assert EncoderSpec("lars", penalty=1.0).kind == "l1"
        assert EncoderSpec("omp", k=1).kind == "l0"
