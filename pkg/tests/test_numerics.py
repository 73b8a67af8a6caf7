import numpy as np
import pytest

from kooploop.numerics import (
    KKTSolveError,
    control_block,
    kkt_residual,
    lstsq_operator,
    solve_kkt,
    truncated_svd,
)

from oracles import nullspace_qp


class TestTruncatedSvd:
    def test_identity_rank_two(self):
        svd = truncated_svd(np.eye(3), rank=2)
        assert svd.effective_rank == 2
        np.testing.assert_allclose(svd.singular_values, [1.0, 1.0])
        # basis spans the first two canonical axes (up to rotation within the
        # eigenspace); projector comparison is the invariant form
        proj = svd.basis @ svd.basis.T
        assert abs(np.trace(proj) - 2.0) < 1e-12

    def test_diagonal_truncation(self):
        svd = truncated_svd(np.diag([3.0, 2.0, 1.0]), rank=2)
        np.testing.assert_allclose(svd.singular_values, [3.0, 2.0])
        span = np.abs(svd.basis)
        np.testing.assert_allclose(span[:, 0], [1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(span[:, 1], [0, 1, 0], atol=1e-12)

    def test_full_rank_reconstruction(self, rng):
        m = rng.standard_normal((10, 6))
        svd = truncated_svd(m, rank=6)
        err = np.linalg.norm(svd.reconstruct() - m)
        assert err <= 1e-10 * np.linalg.norm(m) + 1e-13

    def test_orthonormal_factors(self, rng):
        m = rng.standard_normal((8, 5))
        svd = truncated_svd(m, rank=4)
        r = svd.effective_rank
        assert np.linalg.norm(svd.basis.T @ svd.basis - np.eye(r)) <= 1e-10
        assert np.linalg.norm(svd.right_vectors.T @ svd.right_vectors - np.eye(r)) <= 1e-10
        assert np.all(np.diff(svd.singular_values) <= 1e-15)
        assert np.all(svd.singular_values > 0)

    def test_numerical_rank_drop(self, rng):
        u = np.linalg.qr(rng.standard_normal((6, 2)))[0]
        m = u @ rng.standard_normal((2, 7))
        svd = truncated_svd(m, rank=5, rel_tol=1e-10)
        assert svd.effective_rank == 2

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            truncated_svd(np.zeros((0, 3)), rank=1)
        with pytest.raises(ValueError):
            truncated_svd(np.array([[np.nan, 1.0]]), rank=1)
        with pytest.raises(ValueError):
            truncated_svd(np.eye(3), rank=4)
        with pytest.raises(ValueError):
            truncated_svd(np.eye(3), rank=0)


class TestLstsqOperator:
    def test_identity_fit(self, rng):
        x = rng.standard_normal((4, 9))
        a = lstsq_operator(x, x)
        assert np.linalg.norm(a - np.eye(4)) <= 1e-10

    def test_scalar_geometric_sequence(self):
        inputs = np.array([[1.0, 0.9, 0.81]])
        targets = np.array([[0.9, 0.81, 0.729]])
        a = lstsq_operator(targets, inputs)
        np.testing.assert_allclose(a, [[0.9]], atol=1e-12)

    def test_recovers_generating_operator(self, rng):
        k0 = rng.standard_normal((4, 4))
        k0 *= 0.95 / np.max(np.abs(np.linalg.eigvals(k0)))
        z = rng.standard_normal(4)
        cols = [z]
        for _ in range(20):
            cols.append(k0 @ cols[-1])
        x = np.array(cols[:-1]).T
        x_prime = np.array(cols[1:]).T
        a = lstsq_operator(x_prime, x)
        assert np.linalg.norm(a - k0) <= 1e-8

    def test_minimum_norm_under_rank_deficiency(self, rng):
        # inputs with a dead row: the corresponding operator column must be 0
        inputs = np.vstack([rng.standard_normal((2, 8)), np.zeros((1, 8))])
        targets = rng.standard_normal((2, 8))
        a = lstsq_operator(targets, inputs)
        assert np.linalg.norm(a[:, 2]) <= 1e-12

    def test_residual_beats_random_alternatives(self, rng):
        targets = rng.standard_normal((3, 10))
        inputs = rng.standard_normal((3, 10))
        a = lstsq_operator(targets, inputs)
        best = np.linalg.norm(targets - a @ inputs)
        for _ in range(100):
            alt = a + rng.standard_normal(a.shape) * 1e-2
            assert np.linalg.norm(targets - alt @ inputs) >= best - 1e-12

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            lstsq_operator(rng.standard_normal((2, 5)), rng.standard_normal((2, 6)))


class TestControlBlock:
    def test_matches_matrix_vector_identity(self, rng):
        r, m = 3, 4
        gamma = rng.standard_normal((r, m))
        s = rng.standard_normal(m)
        vec = gamma.reshape(-1, order="F")
        np.testing.assert_allclose(control_block(s, r) @ vec, gamma @ s, atol=1e-14)


class TestSolveKkt:
    def test_hand_solved_example(self):
        primal, dual = solve_kkt(2.0 * np.eye(2), np.array([[1.0, 1.0]]),
                                 np.array([2.0, 0.0]), np.array([0.0]))
        np.testing.assert_allclose(primal, [0.5, -0.5], atol=1e-12)
        assert dual.shape == (1,)

    def test_empty_constraints_reduce_to_plain_solve(self, rng):
        h = rng.standard_normal((4, 4))
        h = h @ h.T + 4.0 * np.eye(4)
        b = rng.standard_normal(4)
        primal, dual = solve_kkt(h, np.zeros((0, 4)), b, np.zeros(0))
        np.testing.assert_allclose(h @ primal, b, atol=1e-10)
        assert dual.size == 0

    def test_matches_nullspace_oracle(self, rng):
        h = rng.standard_normal((6, 6))
        h = h @ h.T + 6.0 * np.eye(6)
        c = rng.standard_normal((2, 6))
        b = rng.standard_normal(6)
        primal, dual = solve_kkt(h, c, b, np.zeros(2))
        assert kkt_residual(h, c, b, np.zeros(2), primal, dual) <= 1e-10
        q_ref, _ = nullspace_qp(h, b, c)
        assert np.linalg.norm(primal - q_ref) <= 1e-8

    def test_constraint_and_stationarity_residuals(self, rng):
        for _ in range(5):
            n, k = 7, 3
            h = rng.standard_normal((n, n))
            h = h @ h.T + n * np.eye(n)
            c = rng.standard_normal((k, n))
            bp = rng.standard_normal(n)
            bd = rng.standard_normal(k)
            primal, dual = solve_kkt(h, c, bp, bd)
            assert np.linalg.norm(c @ primal - bd) <= 1e-9 * (1 + np.linalg.norm(bd))
            assert np.linalg.norm(h @ primal + c.T @ dual - bp) <= 1e-8 * (1 + np.linalg.norm(bp))

    def test_zero_rows_dropped_with_zero_duals(self, rng):
        h = 2.0 * np.eye(3)
        c = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        primal, dual = solve_kkt(h, c, np.ones(3), np.zeros(2))
        assert dual[1] == 0.0
        assert abs(primal[0]) <= 1e-12

    def test_zero_row_with_nonzero_rhs_is_infeasible(self):
        with pytest.raises(KKTSolveError):
            solve_kkt(np.eye(2), np.zeros((1, 2)), np.zeros(2), np.array([1.0]))

    def test_singular_system_reports_diagnostics(self):
        h = np.zeros((2, 2))
        c = np.zeros((0, 2))
        with pytest.raises(KKTSolveError, match="cond|singular|failed"):
            solve_kkt(h, c, np.array([1.0, 0.0]), np.zeros(0))

    def test_asymmetric_hessian_rejected(self):
        h = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            solve_kkt(h, np.zeros((0, 2)), np.zeros(2), np.zeros(0))

    def test_duplicated_constraint_rows_error_not_garbage(self):
        # dependent (not dropped-zero) rows make the saddle singular; the
        # failure must surface, not silently return junk
        h = 2.0 * np.eye(3)
        c = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
        with pytest.raises(KKTSolveError):
            solve_kkt(h, c, np.ones(3), np.zeros(2))
