"""Estimation-error lower bounds under an information budget.

The central object: for y = H theta + w released through any mechanism whose
Fisher information about y is capped by S, the error covariance of every
unbiased estimator built from the release is bounded below by

    Sigma = (H^T S^(1/2) (S^(1/2) I_y^(-1) S^(1/2) + I)^(-1) S^(1/2) H)^(-1)

with I_y the Fisher information of the raw measurement about its location.
The inner matrix (before the outer inverse) adds across independent sensor
blocks, which is what makes distributed computation possible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError
from .fisher import FisherMatrix, Gaussian, fisher_of_noise
from .linalg import as_psd, robust_inverse

# Relative eigenvalue threshold of the identifiability rank test.
RANK_TOL = 1e-10


def identifiable_under_privacy(H, S) -> bool:
    """Whether theta is identifiable from a release with budget S.

    Tests invertibility of H^T S H by a relative rank criterion: the
    smallest eigenvalue must exceed RANK_TOL times the largest.
    """
    h = np.asarray(H, float)
    s = as_psd(S, dim=h.shape[0], name="S").entries
    gram = h.T @ s @ h
    w = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    return bool(w[0] > RANK_TOL * max(w[-1], 0.0))


def joint_identifiable(blocks) -> bool:
    """Identifiability from the pooled releases of several sensor blocks.

    `blocks` is an iterable of (H_i, S_i); the test is invertibility of
    the summed Gram matrix sum_i H_i^T S_i H_i.
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("blocks must be non-empty")
    n = np.asarray(blocks[0][0], float).shape[1]
    total = np.zeros((n, n))
    for h, s in blocks:
        h = np.asarray(h, float)
        if h.shape[1] != n:
            raise ValueError("all blocks must share the parameter dimension")
        s = as_psd(s, dim=h.shape[0], name="S").entries
        total += h.T @ s @ h
    w = np.linalg.eigvalsh(0.5 * (total + total.T))
    return bool(w[0] > RANK_TOL * max(w[-1], 0.0))


@dataclass(frozen=True)
class PpcrResult:
    """Privacy-constrained bound for one measurement block.

    pp_fisher is always defined; sigma is None when theta is not
    identifiable.  `attainable` records whether a mechanism/estimator
    pair meeting the bound with equality exists (true for Gaussian
    measurement noise).
    """

    pp_fisher: np.ndarray
    sigma: np.ndarray | None
    identifiable: bool
    attainable: bool

    @property
    def trace(self) -> float:
        if self.sigma is None:
            raise SingularMatrixError("the bound is infinite: theta is not identifiable")
        return float(np.trace(self.sigma))


def pp_fisher_block(H, S, fisher_y: FisherMatrix) -> np.ndarray:
    """Information about theta retained by a budget-S release of one block."""
    h = np.asarray(H, float)
    s = as_psd(S, dim=h.shape[0], name="S")
    root = s.sqrt()
    inner = root @ robust_inverse(fisher_y.matrix) @ root + np.eye(h.shape[0])
    rh = root @ h
    return rh.T @ robust_inverse(inner) @ rh


def ppcr_bound(H, S, fisher_y: FisherMatrix, attainable=False) -> PpcrResult:
    """Lower bound on the error covariance of estimators using the release.

    fisher_y is the Fisher information of y about its location (for
    Gaussian w this is the inverse noise covariance).  When H^T S H is
    rank-deficient the parameter is not identifiable and sigma is None.
    """
    h = np.asarray(H, float)
    ident = identifiable_under_privacy(h, S)
    info = pp_fisher_block(h, S, fisher_y)
    if not ident:
        return PpcrResult(pp_fisher=info, sigma=None, identifiable=False, attainable=False)
    # identifiability of H^T S H implies the information matrix is invertible
    sigma = robust_inverse(info)
    return PpcrResult(pp_fisher=info, sigma=sigma, identifiable=True, attainable=attainable)


def ppcr_bound_for_model(model, S) -> PpcrResult:
    """Bound for a measurement model, taking I_y from its noise family."""
    fisher_y = fisher_of_noise(model.noise)
    return ppcr_bound(
        model.H, S, fisher_y, attainable=isinstance(model.noise, Gaussian)
    )


def pp_fisher_additive(blocks) -> np.ndarray:
    """Total information from independent sensor blocks: the per-block sum.

    `blocks` is an iterable of (H_i, S_i, Sigma_w_i) with Gaussian block
    noise; independence across blocks is what makes information add.
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("blocks must be non-empty")
    n = np.asarray(blocks[0][0], float).shape[1]
    total = np.zeros((n, n))
    for h, s, sigma_w in blocks:
        h = np.asarray(h, float)
        if h.shape[1] != n:
            raise ValueError("all blocks must share the parameter dimension")
        cov = as_psd(sigma_w, dim=h.shape[0], name="Sigma_w").entries
        total += pp_fisher_block(h, s, FisherMatrix(robust_inverse(cov)))
    return total


def multi_sensor_bound(blocks) -> PpcrResult:
    """Bound on estimators pooling the releases of all blocks."""
    blocks = list(blocks)
    info = pp_fisher_additive(blocks)
    ident = joint_identifiable([(h, s) for h, s, _ in blocks])
    if not ident:
        return PpcrResult(pp_fisher=info, sigma=None, identifiable=False, attainable=False)
    return PpcrResult(
        pp_fisher=info, sigma=robust_inverse(info), identifiable=True, attainable=True
    )


def consensus_mse_bound(levels) -> float:
    """Lower bound on the variance of a private average-consensus output.

    For N agents with scalar budgets s_i, no admissible obfuscation lets
    the network estimate the average of the y_i with variance below
    (1/N^2) sum_i 1/s_i beyond the raw measurement noise floor.
    """
    levels = np.asarray(levels, float)
    if levels.ndim != 1 or levels.size == 0:
        raise ValueError("levels must be a non-empty vector of budgets")
    if np.any(levels <= 0):
        raise ValueError("budgets must be > 0")
    return float(np.sum(1.0 / levels) / levels.size**2)
