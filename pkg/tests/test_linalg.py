"""Tests for the symmetric/PSD matrix helpers."""

import numpy as np
import pytest

from ppcrb.errors import SingularMatrixError
from ppcrb.linalg import (
    PsdMatrix,
    SymMatrix,
    as_psd,
    is_matrix_supremum,
    loewner_leq,
    psd_sqrt,
    robust_inverse,
    spectral_norm,
)


class TestSymMatrix:
    def test_symmetrizes(self):
        a = SymMatrix([[1.0, 2.0], [0.0, 1.0]])
        assert np.array_equal(a.entries, [[1.0, 1.0], [1.0, 1.0]])

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            SymMatrix(np.zeros((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SymMatrix([[np.nan, 0.0], [0.0, 1.0]])

    def test_array_protocol(self):
        a = SymMatrix(np.eye(3))
        assert np.asarray(a).shape == (3, 3)


class TestPsdMatrix:
    def test_accepts_semidefinite(self):
        # rank-1, smallest eigenvalue exactly zero
        v = np.array([[1.0], [2.0]])
        p = PsdMatrix(v @ v.T)
        assert p.eigenvalues[0] >= 0.0

    def test_clamps_rounding_noise(self):
        p = PsdMatrix(np.diag([1.0, -1e-14]))
        assert p.eigenvalues[0] == 0.0

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="not positive semidefinite"):
            PsdMatrix(np.diag([1.0, -1e-3]))

    def test_sqrt_squares_back(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            b = rng.standard_normal((4, 4))
            a = b @ b.T
            root = PsdMatrix(a).sqrt()
            assert np.allclose(root @ root, a, atol=1e-10)
            assert np.allclose(root, root.T)


class TestAsPsd:
    def test_scalar_needs_dim(self):
        with pytest.raises(ValueError, match="dimension"):
            as_psd(2.0)

    def test_scalar_becomes_scaled_identity(self):
        p = as_psd(3.0, dim=2)
        assert np.allclose(p.entries, 3.0 * np.eye(2))

    def test_dim_mismatch_names_argument(self):
        with pytest.raises(ValueError, match="S has dimension"):
            as_psd(np.eye(3), dim=2, name="S")

    def test_psd_sqrt_shortcut(self):
        assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


class TestLoewnerOrder:
    def test_identity_leq_twice_identity(self):
        assert loewner_leq(np.eye(2), 2 * np.eye(2))
        assert not loewner_leq(2 * np.eye(2), np.eye(2))

    def test_incomparable_pair(self):
        a = np.diag([2.0, 0.5])
        b = np.diag([0.5, 2.0])
        assert not loewner_leq(a, b)
        assert not loewner_leq(b, a)

    def test_tolerance_band(self):
        a = np.eye(2)
        assert loewner_leq(a + 1e-12 * np.eye(2), a)

    def test_spectral_norm(self):
        assert spectral_norm(np.diag([3.0, -5.0])) == 5.0


class TestMatrixSupremum:
    def test_chain_has_top(self):
        fam = [np.eye(2) * k for k in (1.0, 2.0, 3.0)]
        assert is_matrix_supremum(fam[2], fam)
        assert not is_matrix_supremum(fam[1], fam)

    def test_incomparable_family_has_no_sup_inside(self):
        # neither member dominates the other, so no member is a supremum
        fam = [np.diag([2.0, 0.5]), np.diag([0.5, 2.0])]
        assert not is_matrix_supremum(fam[0], fam)
        assert not is_matrix_supremum(fam[1], fam)

    def test_candidate_must_be_a_member(self):
        fam = [np.diag([2.0, 0.5]), np.diag([0.5, 2.0])]
        # the entrywise max dominates both but is not in the family
        assert not is_matrix_supremum(np.diag([2.0, 2.0]), fam)


class TestRobustInverse:
    def test_matches_solve(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            b = rng.standard_normal((5, 5))
            a = b @ b.T + np.eye(5)
            assert np.allclose(robust_inverse(a) @ a, np.eye(5), atol=1e-9)

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            robust_inverse(np.diag([1.0, 0.0]))

    def test_ill_conditioned_raises(self):
        with pytest.raises(SingularMatrixError):
            robust_inverse(np.diag([1.0, 1e-15]))

    def test_ridge_rescues_singular(self):
        inv = robust_inverse(np.diag([1.0, 0.0]), ridge=0.5)
        assert np.allclose(inv, np.diag([1.0 / 1.5, 2.0]))

    def test_negative_ridge_rejected(self):
        with pytest.raises(ValueError):
            robust_inverse(np.eye(2), ridge=-1.0)
