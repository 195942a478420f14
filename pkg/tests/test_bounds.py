"""Tests for the privacy-constrained error bounds.

Frozen values were computed by hand from the scalar formula
1 / (sigma^2 + 1/s) for the per-row information of a scaled-identity
budget with Gaussian noise; every multivariate case below reduces to it.
"""

import numpy as np
import pytest

from ppcrb.errors import SingularMatrixError
from ppcrb.fisher import FisherMatrix, Gaussian, LaplaceIID
from ppcrb.linalg import loewner_leq
from ppcrb.bounds import (
    consensus_mse_bound,
    identifiable_under_privacy,
    joint_identifiable,
    multi_sensor_bound,
    pp_fisher_additive,
    pp_fisher_block,
    ppcr_bound,
    ppcr_bound_for_model,
)
from ppcrb.mechanisms import MeasurementModel


class TestScalarOracles:
    def test_single_row(self):
        # s = 1, sigma = 0.2: info = 1/(0.04 + 1), bound = 1.04
        res = ppcr_bound([[1.0]], 1.0 * np.eye(1), FisherMatrix([[1.0 / 0.04]]))
        assert res.identifiable
        assert res.pp_fisher[0, 0] == pytest.approx(1.0 / 1.04, rel=1e-12)
        assert res.trace == pytest.approx(1.04, rel=1e-12)

    def test_two_stacked_rows(self):
        # two independent unit-gain rows halve the bound: 1.04 / 2 = 0.52
        res = ppcr_bound(
            [[1.0], [1.0]], np.eye(2), FisherMatrix(np.eye(2) / 0.04)
        )
        assert res.pp_fisher[0, 0] == pytest.approx(2.0 / 1.04, rel=1e-12)
        assert res.trace == pytest.approx(0.52, rel=1e-12)

    def test_identity_system_unit_noise(self):
        # H = I, S = I, Sigma_w = I: info = I/2, bound = 2 I, trace 4
        res = ppcr_bound(np.eye(2), np.eye(2), FisherMatrix(np.eye(2)))
        assert np.allclose(res.pp_fisher, 0.5 * np.eye(2))
        assert np.allclose(res.sigma, 2.0 * np.eye(2))
        assert res.trace == pytest.approx(4.0)

    def test_budget_zero_information(self):
        # S -> 0 releases nothing; the inner matrix collapses
        info = pp_fisher_block([[1.0]], 1e-18 * np.eye(1), FisherMatrix([[25.0]]))
        assert info[0, 0] == pytest.approx(1e-18, rel=1e-6)

    def test_large_budget_approaches_classical_bound(self):
        h = np.array([[1.0, 0.2], [0.3, 1.0], [0.5, -0.5]])
        fy = FisherMatrix(np.eye(3) / 0.04)
        crb = np.linalg.inv(h.T @ fy.matrix @ h)
        res = ppcr_bound(h, 1e12 * np.eye(3), fy)
        assert np.allclose(res.sigma, crb, rtol=1e-9)
        # and the budgeted bound always dominates the classical one
        res_mid = ppcr_bound(h, 2.0 * np.eye(3), fy)
        assert loewner_leq(crb, res_mid.sigma)


class TestModelRoute:
    def test_gaussian_model_attainable(self):
        model = MeasurementModel([[1.0]], Gaussian([0.0], [[0.04]]))
        res = ppcr_bound_for_model(model, 1.0)
        assert res.attainable
        assert res.trace == pytest.approx(1.04, rel=1e-12)

    def test_laplace_model_not_attainable(self):
        model = MeasurementModel([[1.0]], LaplaceIID(0.5, 1))
        res = ppcr_bound_for_model(model, 1.0)
        assert not res.attainable
        # I_y = 1/b^2 = 4: info = 1/(1/4 + 1) = 0.8
        assert res.trace == pytest.approx(1.25, rel=1e-12)


class TestIdentifiability:
    def test_rank_deficient_h(self):
        h = np.array([[1.0, 2.0], [2.0, 4.0]])
        assert not identifiable_under_privacy(h, np.eye(2))

    def test_budget_nullspace_can_break_identifiability(self):
        # S releases nothing about the second measurement
        h = np.eye(2)
        s = np.diag([1.0, 0.0])
        assert not identifiable_under_privacy(h, s)
        assert identifiable_under_privacy(h, np.eye(2))

    def test_not_identifiable_result(self):
        res = ppcr_bound(np.eye(2), np.diag([1.0, 0.0]), FisherMatrix(np.eye(2)))
        assert not res.identifiable
        assert res.sigma is None
        with pytest.raises(SingularMatrixError):
            res.trace

    def test_against_brute_force_rank(self):
        """Planted full-rank and deficient instances against numpy's rank."""
        rng = np.random.default_rng(42)
        disagreements = 0
        for trial in range(300):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(n, n + 4))
            h = rng.standard_normal((m, n))
            diag = rng.uniform(0.5, 2.0, m)
            if trial % 3 == 1:
                h[:, rng.integers(0, n)] = 0.0  # dead parameter direction
            if trial % 3 == 2 and m > n:
                diag[: m - n + 1] = 0.0  # budget blind to too many rows
                h[: m - n + 1] = rng.standard_normal((1, n))  # make rows redundant
            s = np.diag(diag)
            gram = h.T @ s @ h
            brute = np.linalg.matrix_rank(gram) == n
            if identifiable_under_privacy(h, s) != brute:
                disagreements += 1
        assert disagreements == 0

    def test_joint_route_matches_stacked(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            blocks = []
            for _ in range(int(rng.integers(2, 5))):
                h = rng.standard_normal((2, 3))
                s = np.diag(rng.uniform(0.1, 2.0, 2))
                blocks.append((h, s))
            stacked_h = np.vstack([h for h, _ in blocks])
            stacked_s = np.zeros((stacked_h.shape[0],) * 2)
            at = 0
            for h, s in blocks:
                stacked_s[at : at + 2, at : at + 2] = s
                at += 2
            assert joint_identifiable(blocks) == identifiable_under_privacy(
                stacked_h, stacked_s
            )


class TestAdditivity:
    def test_stacked_equals_sum(self):
        """Information of independently noised blocks adds across blocks."""
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(1, 4))
            blocks = []
            for _ in range(int(rng.integers(2, 9))):
                k = int(rng.integers(1, 11))
                h = rng.standard_normal((k, n))
                s_half = rng.standard_normal((k, k)) / np.sqrt(k)
                s = s_half @ s_half.T + 0.1 * np.eye(k)
                c_half = rng.standard_normal((k, k)) / np.sqrt(k)
                cov = c_half @ c_half.T + 0.1 * np.eye(k)
                blocks.append((h, s, cov))
            total = pp_fisher_additive(blocks)
            big_h = np.vstack([h for h, _, _ in blocks])
            big_s = _block_diag([s for _, s, _ in blocks])
            big_c = _block_diag([c for _, _, c in blocks])
            direct = pp_fisher_block(big_h, big_s, FisherMatrix(np.linalg.inv(big_c)))
            denom = max(np.linalg.norm(direct), 1.0)
            assert np.linalg.norm(total - direct) <= 1e-9 * denom

    def test_two_sensor_frozen_value(self):
        # identical unit sensors, s = 1, sigma = 0.2: two rows, bound 0.52
        blocks = [
            ([[1.0]], np.eye(1), [[0.04]]),
            ([[1.0]], np.eye(1), [[0.04]]),
        ]
        res = multi_sensor_bound(blocks)
        assert res.trace == pytest.approx(0.52, rel=1e-12)
        assert res.attainable


class TestConsensusBound:
    def test_uniform_budgets(self):
        # N = 8, s = 1: (1/64) * 8 = 0.125
        assert consensus_mse_bound(np.ones(8)) == pytest.approx(0.125)

    def test_mixed_budgets(self):
        # N = 2, s = {1, 4}: (1 + 1/4) / 4 = 0.3125
        assert consensus_mse_bound(np.array([1.0, 4.0])) == pytest.approx(0.3125)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            consensus_mse_bound(np.array([1.0, 0.0]))


def _block_diag(mats):
    total = sum(m.shape[0] for m in mats)
    out = np.zeros((total, total))
    at = 0
    for m in mats:
        k = m.shape[0]
        out[at : at + k, at : at + k] = m
        at += k
    return out
