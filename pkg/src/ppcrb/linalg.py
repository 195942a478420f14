"""Symmetric and positive semidefinite matrix helpers.

All routines work on the symmetric eigendecomposition rather than Cholesky
factors so that semidefinite (rank-deficient) operands are handled uniformly.
"""
from __future__ import annotations

import numpy as np

from .errors import SingularMatrixError

# Relative floor below which an eigenvalue of a nominally PSD matrix is
# treated as rounding noise and clamped to zero.
PSD_TOL = 1e-10

# Condition-number ceiling for robust_inverse at ridge = 0.
COND_LIMIT = 1e12


def _as_square(entries, name="matrix"):
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


class SymMatrix:
    """A real square matrix stored in symmetrized form (A + A^T)/2."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = _as_square(entries, "SymMatrix")
        self.entries = 0.5 * (a + a.T)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.entries.astype(dtype)
        return self.entries

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class PsdMatrix(SymMatrix):
    """A symmetric positive semidefinite matrix.

    Construction validates the spectrum: the smallest eigenvalue must be
    >= -PSD_TOL * max(1, largest eigenvalue).  Eigenvalues inside that
    tolerance band below zero are clamped to zero, so downstream square
    roots and inverses never see a negative eigenvalue.
    """

    __slots__ = ("eigenvalues", "eigenvectors")

    def __init__(self, entries):
        super().__init__(entries)
        w, v = np.linalg.eigh(self.entries)
        floor = -PSD_TOL * max(1.0, float(w[-1]))
        if w[0] < floor:
            raise ValueError(
                f"matrix is not positive semidefinite: min eigenvalue {w[0]:.3e}"
            )
        w = np.clip(w, 0.0, None)
        self.eigenvalues = w
        self.eigenvectors = v
        self.entries = (v * w) @ v.T

    def sqrt(self) -> np.ndarray:
        return (self.eigenvectors * np.sqrt(self.eigenvalues)) @ self.eigenvectors.T


def as_psd(value, dim=None, name="matrix") -> PsdMatrix:
    """Coerce a PsdMatrix, array, or scalar (dim required) to PsdMatrix."""
    if isinstance(value, PsdMatrix):
        m = value
    elif np.isscalar(value):
        if dim is None:
            raise ValueError(f"{name}: scalar given without a dimension")
        m = PsdMatrix(float(value) * np.eye(dim))
    else:
        m = PsdMatrix(value)
    if dim is not None and m.dim != dim:
        raise ValueError(f"{name} has dimension {m.dim}, expected {dim}")
    return m


def psd_sqrt(a) -> np.ndarray:
    """Principal square root of a PSD matrix.

    Uses the symmetric eigendecomposition with negative eigenvalues clamped
    to zero, so slightly indefinite inputs (within PSD_TOL) are accepted.
    """
    return as_psd(a).sqrt()


def spectral_norm(a) -> float:
    w = np.linalg.eigvalsh(SymMatrix(a).entries)
    return float(max(abs(w[0]), abs(w[-1])))


def loewner_leq(a, b, tol=1e-9) -> bool:
    """Whether A <= B in the Loewner (PSD) order, up to tolerance.

    True iff the smallest eigenvalue of B - A is >= -tol * max(1, ||B - A||_2).
    """
    a = _as_square(a, "A")
    b = _as_square(b, "B")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = SymMatrix(b - a).entries
    w = np.linalg.eigvalsh(diff)
    scale = max(1.0, max(abs(w[0]), abs(w[-1])))
    return bool(w[0] >= -tol * scale)


def is_matrix_supremum(candidate, family, tol=1e-9) -> bool:
    """Whether `candidate` is a least upper bound of `family` in Loewner order.

    Requires the candidate to dominate every member and to lie within `tol`
    (entrywise) of at least one member.  A family whose members are not
    mutually comparable has no supremum inside the family, in which case
    this returns False for every candidate drawn from it.
    """
    family = list(family)
    if not family:
        raise ValueError("family must be non-empty")
    cand = _as_square(candidate, "candidate")
    member = any(np.max(np.abs(np.asarray(f, float) - cand)) <= tol for f in family)
    if not member:
        return False
    return all(loewner_leq(f, cand, tol) for f in family)


def robust_inverse(a, ridge=0.0) -> np.ndarray:
    """Inverse of a symmetric matrix through its eigendecomposition.

    With ridge > 0 the inverse of A + ridge*I is returned.  At ridge = 0 a
    singular or ill-conditioned operand (condition number above COND_LIMIT)
    raises SingularMatrixError rather than returning an unstable result.
    """
    a = SymMatrix(a).entries
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    w, v = np.linalg.eigh(a)
    w = w + ridge
    mags = np.abs(w)
    if mags.min() == 0.0 or mags.max() / mags.min() > COND_LIMIT:
        raise SingularMatrixError(
            f"matrix is singular at ridge={ridge:g} "
            f"(|eigenvalue| range [{mags.min():.3e}, {mags.max():.3e}])"
        )
    return (v / w) @ v.T
