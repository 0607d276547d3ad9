import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepsr.errors import InputError
from deepsr.sparse import (
    LassoConfig,
    kkt_violation,
    lasso_objective,
    soft_threshold,
    sparse_encode,
    sparse_encode_batch,
)

TIGHT = LassoConfig(lam=0.3, max_iters=1000, tol=1e-12)


def random_unit_dict(rng, dim, n_atoms):
    d = rng.standard_normal((dim, n_atoms))
    return d / np.linalg.norm(d, axis=0)


def random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def cd_lasso_oracle(d, x, lam, sweeps=20000, tol=1e-14):
    """Coordinate-descent lasso (unit-norm atoms), independent of FISTA."""
    a = np.zeros(d.shape[1])
    r = x - d @ a
    for _ in range(sweeps):
        delta = 0.0
        for j in range(d.shape[1]):
            old = a[j]
            rho = d[:, j] @ r + old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0)
            if new != old:
                r += d[:, j] * (old - new)
                a[j] = new
                delta = max(delta, abs(new - old))
        if delta < tol:
            break
    return a


class TestSoftThreshold:
    def test_closed_form(self):
        assert soft_threshold(3.0, 1.0) == 2.0

    def test_shrink_to_zero(self):
        assert soft_threshold(-0.5, 1.0) == 0.0

    def test_zero_threshold_is_noop(self):
        for v in (-7.3, 0.0, 2.5):
            assert soft_threshold(v, 0.0) == v

    def test_negative_threshold_rejected(self):
        with pytest.raises(InputError):
            soft_threshold(1.0, -0.1)

    @given(st.floats(-1e6, 1e6), st.floats(0, 1e6))
    @settings(max_examples=100, deadline=None)
    def test_magnitude_never_grows(self, v, t):
        out = soft_threshold(v, t)
        assert abs(out) <= abs(v)
        assert out == 0.0 or np.sign(out) == np.sign(v)


class TestLassoObjective:
    def test_zero_code(self):
        x = np.array([1.0, 2.0])
        d = np.eye(2)
        assert lasso_objective(d, x, np.zeros(2), 1.0) == pytest.approx(2.5)

    def test_exact_reconstruction(self):
        x = np.array([1.0, -2.0])
        assert lasso_objective(np.eye(2), x, x, 0.0) == 0.0

    def test_direct_evaluation_oracle(self):
        rng = np.random.default_rng(0)
        d = random_unit_dict(rng, 4, 6)
        x = rng.standard_normal(4)
        a = rng.standard_normal(6)
        r = x - d @ a
        expected = 0.5 * float(r @ r) + 0.7 * float(np.abs(a).sum())
        assert abs(lasso_objective(d, x, a, 0.7) - expected) < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(InputError):
            lasso_objective(np.eye(2), np.zeros(3), np.zeros(2), 0.1)


class TestSparseEncode:
    def test_identity_dictionary_soft_thresholds(self):
        a = sparse_encode(np.eye(2), np.array([3.0, -0.5]), LassoConfig(lam=1.0, max_iters=500, tol=1e-12))
        assert np.allclose(a, [2.0, 0.0], atol=1e-8)

    def test_unregularized_square_solve(self):
        rng = np.random.default_rng(1)
        d = random_unit_dict(rng, 5, 5)
        x = rng.standard_normal(5)
        a = sparse_encode(d, x, LassoConfig(lam=0.0, max_iters=5000, tol=1e-14))
        assert np.abs(a - np.linalg.solve(d, x)).max() < 1e-6

    def test_orthonormal_closed_form(self):
        rng = np.random.default_rng(2)
        d = random_rotation(rng, 12)
        x = rng.standard_normal(12)
        a = sparse_encode(d, x, TIGHT)
        ref = soft_threshold(d.T @ x, 0.3)
        assert np.abs(a - ref).max() < 1e-6

    def test_small_overcomplete_vs_cd_oracle(self):
        rng = np.random.default_rng(3)
        d = random_unit_dict(rng, 2, 3)
        x = rng.standard_normal(2)
        cfg = LassoConfig(lam=0.3, max_iters=2000, tol=1e-14)
        a = sparse_encode(d, x, cfg)
        ref = cd_lasso_oracle(d, x, 0.3)
        gap = lasso_objective(d, x, a, 0.3) - lasso_objective(d, x, ref, 0.3)
        assert gap <= 1e-4

    def test_zero_signal_gives_zero_code(self):
        d = random_unit_dict(np.random.default_rng(4), 6, 10)
        a = sparse_encode(d, np.zeros(6), TIGHT)
        assert np.array_equal(a, np.zeros(10))

    def test_nonfinite_rejected(self):
        with pytest.raises(InputError):
            sparse_encode(np.eye(2), np.array([np.inf, 0.0]), TIGHT)

    def test_trace_monotone(self):
        rng = np.random.default_rng(5)
        d = random_unit_dict(rng, 10, 25)
        x = rng.standard_normal(10)
        _, trace = sparse_encode(d, x, LassoConfig(lam=0.1, max_iters=500, tol=1e-12), return_trace=True)
        for prev, cur in zip(trace, trace[1:]):
            assert cur <= prev + 1e-12

    def test_kkt_certificate(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            d = random_unit_dict(rng, 8, 16)
            x = rng.standard_normal(8)
            a = sparse_encode(d, x, LassoConfig(lam=0.2, max_iters=3000, tol=1e-14))
            assert kkt_violation(d, x, a, 0.2) <= 1e-4

    def test_sparsity_monotone_in_lambda(self):
        rng = np.random.default_rng(7)
        d = random_unit_dict(rng, 10, 20)
        x = rng.standard_normal(10)
        loose = sparse_encode(d, x, LassoConfig(lam=0.01, max_iters=2000, tol=1e-12))
        tight = sparse_encode(d, x, LassoConfig(lam=1.0, max_iters=2000, tol=1e-12))
        assert np.count_nonzero(tight) <= np.count_nonzero(loose)

    def test_scaling_homogeneity(self):
        # Well-conditioned (orthonormal) instance: the solver reaches the
        # exact solution, so the 1e-8 bound tests homogeneity rather than
        # the stopping rule's floating-point noise floor.
        rng = np.random.default_rng(8)
        d = random_rotation(rng, 8)
        x = rng.standard_normal(8)
        c = 3.5
        base = sparse_encode(d, x, LassoConfig(lam=0.2, max_iters=20000, tol=1e-16))
        scaled = sparse_encode(d, c * x, LassoConfig(lam=c * 0.2, max_iters=20000, tol=1e-16))
        assert np.abs(scaled - c * base).max() < 1e-8


class TestSparseEncodeBatch:
    def test_single_column_equals_encode(self):
        rng = np.random.default_rng(9)
        d = random_unit_dict(rng, 6, 10)
        x = rng.standard_normal(6)
        batch = sparse_encode_batch(d, x.reshape(-1, 1), TIGHT)
        solo = sparse_encode(d, x, TIGHT)
        assert np.array_equal(batch[:, 0], solo)

    def test_duplicated_columns_identical(self):
        rng = np.random.default_rng(10)
        d = random_unit_dict(rng, 6, 10)
        x = rng.standard_normal(6)
        xs = np.stack([x, x], axis=1)
        codes = sparse_encode_batch(d, xs, TIGHT)
        assert np.array_equal(codes[:, 0], codes[:, 1])

    def test_matches_per_column_encoding(self):
        rng = np.random.default_rng(11)
        d = random_unit_dict(rng, 8, 12)
        xs = rng.standard_normal((8, 10))
        codes = sparse_encode_batch(d, xs, TIGHT)
        for i in range(10):
            solo = sparse_encode(d, xs[:, i], TIGHT)
            assert np.abs(codes[:, i] - solo).max() < 1e-10

    def test_dim_mismatch_rejected(self):
        with pytest.raises(InputError):
            sparse_encode_batch(np.eye(3), np.zeros((4, 2)), TIGHT)
