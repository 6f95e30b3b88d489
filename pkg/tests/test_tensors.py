import numpy as np
import pytest

from tnad import DegenerateInputError, DimensionError, contract_pair, reorder_axes, truncated_svd


class TestContractPair:
    def test_identity_contraction(self):
        result = contract_pair(np.eye(2), np.array([3.0, 4.0]), [(1, 0)])
        np.testing.assert_allclose(result, [3.0, 4.0])

    def test_outer_product(self):
        result = contract_pair(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
        np.testing.assert_allclose(result, [[3.0, 4.0], [6.0, 8.0]])

    def test_matches_triple_loop_matmul(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 5))
        expected = np.zeros((3, 5))
        for i in range(3):
            for j in range(5):
                for k in range(4):
                    expected[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(contract_pair(a, b, [(1, 0)]), expected, rtol=1e-13)

    def test_full_contraction_gives_scalar(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((2, 3))
        result = contract_pair(a, a, [(0, 0), (1, 1)])
        assert result.ndim == 0
        np.testing.assert_allclose(float(result), (a * a).sum())

    def test_extent_mismatch_names_both_axes(self):
        with pytest.raises(DimensionError, match="a-axis 1.*b-axis 0"):
            contract_pair(np.ones((2, 3)), np.ones((4, 2)), [(1, 0)])

    def test_duplicate_axis_rejected(self):
        with pytest.raises(DimensionError, match="duplicate"):
            contract_pair(np.ones((2, 2)), np.ones((2, 2)), [(0, 0), (0, 1)])

    def test_axis_out_of_range(self):
        with pytest.raises(DimensionError, match="out of range"):
            contract_pair(np.ones((2, 2)), np.ones((2, 2)), [(5, 0)])

    def test_bilinearity(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.standard_normal((3, 2))
            b = rng.standard_normal((2, 4))
            alpha = rng.standard_normal()
            left = contract_pair(alpha * a, b, [(1, 0)])
            right = alpha * contract_pair(a, b, [(1, 0)])
            np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-14)

    def test_operand_swap_is_a_reorder(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((3, 4, 2))
        b = rng.standard_normal((4, 5))
        ab = contract_pair(a, b, [(1, 0)])  # axes (3, 2, 5)
        ba = contract_pair(b, a, [(0, 1)])  # axes (5, 3, 2)
        np.testing.assert_allclose(ba, reorder_axes(ab, [2, 0, 1]), rtol=1e-13)


class TestReorderAxes:
    def test_transpose(self):
        a = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(reorder_axes(a, [1, 0]), a.T)

    def test_identity(self):
        a = np.arange(24.0).reshape(2, 3, 4)
        np.testing.assert_array_equal(reorder_axes(a, [0, 1, 2]), a)

    def test_inverse_composition(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((2, 3, 4))
        roundtrip = reorder_axes(reorder_axes(a, [2, 0, 1]), [1, 2, 0])
        np.testing.assert_array_equal(roundtrip, a)

    def test_non_bijective_rejected(self):
        with pytest.raises(DimensionError, match="bijection"):
            reorder_axes(np.ones((2, 2)), [0, 0])


class TestTruncatedSvd:
    def test_diagonal_matrix(self):
        result = truncated_svd(np.diag([3.0, 2.0, 1e-12]), rel_threshold=1e-8)
        assert result.rank == 2
        np.testing.assert_allclose(result.singular_values, [3.0, 2.0])
        np.testing.assert_allclose(result.discarded_weight, 1e-24)

    def test_orthogonal_matrix(self):
        rng = np.random.default_rng(5)
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        result = truncated_svd(q, rel_threshold=0.0)
        np.testing.assert_allclose(result.singular_values, np.ones(4), atol=1e-12)
        assert result.discarded_weight == 0.0

    def test_max_rank_truncation_matches_gram_oracle(self):
        rng = np.random.default_rng(6)
        m = rng.standard_normal((6, 4))
        # independent oracle: eigenvalues of m^T m are squared singular values
        sigma_sq = np.sort(np.linalg.eigvalsh(m.T @ m))[::-1]
        result = truncated_svd(m, max_rank=2)
        recon = result.left_isometry * result.singular_values @ result.right_isometry
        err_sq = np.linalg.norm(m - recon) ** 2
        np.testing.assert_allclose(err_sq, sigma_sq[2] + sigma_sq[3], rtol=1e-10)
        np.testing.assert_allclose(result.discarded_weight, err_sq, rtol=1e-10)

    def test_full_rank_reconstruction(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = rng.standard_normal((5, 3))
            r = truncated_svd(m, rel_threshold=0.0, max_rank=3)
            recon = r.left_isometry * r.singular_values @ r.right_isometry
            assert np.linalg.norm(m - recon) <= 1e-10 * np.linalg.norm(m)

    def test_isometries(self):
        rng = np.random.default_rng(8)
        m = rng.standard_normal((5, 7))
        r = truncated_svd(m, max_rank=3)
        u, vt = r.left_isometry, r.right_isometry
        assert np.abs(u.T @ u - np.eye(3)).max() <= 1e-10
        assert np.abs(vt @ vt.T - np.eye(3)).max() <= 1e-10

    def test_singular_values_sorted_positive(self):
        rng = np.random.default_rng(9)
        m = rng.standard_normal((4, 6))
        r = truncated_svd(m)
        s = r.singular_values
        assert (s > 0).all()
        assert (np.diff(s) <= 0).all()

    def test_zero_matrix_degenerate(self):
        with pytest.raises(DegenerateInputError):
            truncated_svd(np.zeros((3, 3)))

    def test_non_matrix_rejected(self):
        with pytest.raises(DimensionError):
            truncated_svd(np.ones((2, 2, 2)))

    def test_bad_threshold_rejected(self):
        with pytest.raises(DimensionError):
            truncated_svd(np.eye(2), rel_threshold=1.0)

    def test_rank_one_matrix(self):
        m = np.outer([1.0, 2.0], [3.0, 4.0, 5.0])
        r = truncated_svd(m, rel_threshold=1e-12)
        assert r.rank == 1
