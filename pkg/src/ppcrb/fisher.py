"""Noise families and Fisher information.

Families are location families: the measurement model places them around
H @ theta, mechanisms place them around the transmitted signal.  Each family
exposes sampling, componentwise log-density and score where defined, and a
closed-form Fisher information.  `fisher_quadrature` recomputes the scalar
Fisher by numerical integration and is deliberately independent of the
closed forms: it differentiates the log-density by central differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import UnsupportedFamilyError
from .linalg import as_psd, robust_inverse


def _size_tuple(size):
    if size is None:
        return ()
    if np.isscalar(size):
        return (int(size),)
    return tuple(int(s) for s in size)


@dataclass(frozen=True)
class Gaussian:
    """Multivariate normal noise with arbitrary mean and PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    kind = "gaussian"

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, float))
        cov = as_psd(self.cov, dim=mean.shape[0], name="cov")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov.entries)
        object.__setattr__(self, "_sqrt", cov.sqrt())

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def mean_vector(self):
        return self.mean.copy()

    def cov_matrix(self):
        return self.cov.copy()

    def sample(self, rng, size=None):
        shape = _size_tuple(size) + (self.dim,)
        return self.mean + rng.standard_normal(shape) @ self._sqrt.T

    def location_score(self, x):
        # gradient of log density in x; x offset by the mean internally
        inv = robust_inverse(self.cov)
        return -(np.asarray(x, float) - self.mean) @ inv.T


@dataclass(frozen=True)
class LaplaceIID:
    """IID Laplace noise, scale b per component, centered at zero."""

    scale: float
    dim: int

    kind = "laplace"

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def mean_vector(self):
        return np.zeros(self.dim)

    def cov_matrix(self):
        return 2.0 * self.scale**2 * np.eye(self.dim)

    def sample(self, rng, size=None):
        return rng.laplace(0.0, self.scale, _size_tuple(size) + (self.dim,))

    def component_logpdf(self, x):
        return -np.log(2.0 * self.scale) - np.abs(x) / self.scale

    def location_score(self, x):
        return -np.sign(x) / self.scale


@dataclass(frozen=True)
class CauchyIID:
    """IID Cauchy noise, scale gamma per component, centered at zero."""

    scale: float
    dim: int

    kind = "cauchy"

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def mean_vector(self):
        raise UnsupportedFamilyError("Cauchy noise has no mean")

    def cov_matrix(self):
        raise UnsupportedFamilyError("Cauchy noise has no covariance")

    def sample(self, rng, size=None):
        return self.scale * rng.standard_cauchy(_size_tuple(size) + (self.dim,))

    def component_logpdf(self, x):
        return np.log(self.scale / np.pi) - np.log(self.scale**2 + np.square(x))

    def location_score(self, x):
        x = np.asarray(x, float)
        return -2.0 * x / (self.scale**2 + np.square(x))


@dataclass(frozen=True)
class Cos2Bounded:
    """IID noise with density (2/L) cos^2(pi (x - mid)/L) on [lower, upper]."""

    lower: float
    upper: float
    dim: int

    kind = "cos2"

    def __post_init__(self):
        if not self.upper > self.lower:
            raise ValueError("upper must exceed lower")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def mean_vector(self):
        return np.full(self.dim, self.mid)

    def cov_matrix(self):
        # Var = L^2 (1/12 - 1/(2 pi^2)) for the cos^2 hump
        var = self.width**2 * (1.0 / 12.0 - 0.5 / np.pi**2)
        return var * np.eye(self.dim)

    def component_logpdf(self, x):
        u = (np.asarray(x, float) - self.mid) / self.width
        inside = np.abs(u) < 0.5
        with np.errstate(divide="ignore"):
            val = np.where(
                inside,
                np.log(2.0 / self.width) + 2.0 * np.log(np.abs(np.cos(np.pi * u)) + 1e-300),
                -np.inf,
            )
        return val

    def location_score(self, x):
        u = (np.asarray(x, float) - self.mid) / self.width
        return -(2.0 * np.pi / self.width) * np.tan(np.pi * u)

    def component_cdf(self, x):
        u = np.clip((np.asarray(x, float) - self.mid) / self.width, -0.5, 0.5)
        return u + 0.5 + np.sin(2.0 * np.pi * u) / (2.0 * np.pi)

    def component_ppf(self, p, tol=1e-12):
        """Inverse CDF by bisection, vectorized, to absolute tolerance tol*L."""
        p = np.asarray(p, float)
        lo = np.full(p.shape, self.lower)
        hi = np.full(p.shape, self.upper)
        # 50 halvings shrink the bracket below 1e-12 relative to the width
        for _ in range(60):
            midpt = 0.5 * (lo + hi)
            below = self.component_cdf(midpt) < p
            lo = np.where(below, midpt, lo)
            hi = np.where(below, hi, midpt)
            if np.max(hi - lo) <= tol * self.width:
                break
        return 0.5 * (lo + hi)

    def sample(self, rng, size=None):
        u = rng.uniform(0.0, 1.0, _size_tuple(size) + (self.dim,))
        return self.component_ppf(u)


@dataclass(frozen=True)
class TwinUniform:
    """Two-sided uniform magnitude noise for multiplicative obfuscation.

    Mixture of U(center - hw, center + hw) and U(-center - hw, -center + hw)
    with equal weights; hw may vary per component.  E|D| = center exactly.
    """

    center: float
    half_width: np.ndarray
    dim: int

    kind = "twin_uniform"

    def __post_init__(self):
        hw = np.broadcast_to(np.asarray(self.half_width, float), (self.dim,)).copy()
        if self.center <= 0:
            raise ValueError("center must be > 0")
        if np.any(hw <= 0) or np.any(hw >= self.center):
            raise ValueError("half_width must lie in (0, center)")
        object.__setattr__(self, "half_width", hw)

    def mean_vector(self):
        return np.zeros(self.dim)

    def abs_mean(self) -> float:
        return self.center

    def cov_matrix(self):
        return np.diag(self.center**2 + self.half_width**2 / 3.0)

    def sample(self, rng, size=None):
        shape = _size_tuple(size) + (self.dim,)
        mag = self.center + self.half_width * rng.uniform(-1.0, 1.0, shape)
        sign = np.where(rng.uniform(0.0, 1.0, shape) < 0.5, -1.0, 1.0)
        return sign * mag


NOISE_FAMILIES = (Gaussian, LaplaceIID, CauchyIID, Cos2Bounded, TwinUniform)


@dataclass(frozen=True)
class FisherMatrix:
    """Fisher information with a label naming the variable it refers to."""

    matrix: np.ndarray
    wrt: str = "y"

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, float))


def fisher_of_noise(family) -> FisherMatrix:
    """Closed-form location Fisher information of a noise family."""
    if isinstance(family, Gaussian):
        return FisherMatrix(robust_inverse(family.cov))
    if isinstance(family, LaplaceIID):
        return FisherMatrix(np.eye(family.dim) / family.scale**2)
    if isinstance(family, CauchyIID):
        return FisherMatrix(np.eye(family.dim) / (2.0 * family.scale**2))
    if isinstance(family, Cos2Bounded):
        return FisherMatrix(np.eye(family.dim) * 4.0 * np.pi**2 / family.width**2)
    if isinstance(family, TwinUniform):
        raise UnsupportedFamilyError(
            "twin-uniform magnitude noise has no location Fisher information"
        )
    raise UnsupportedFamilyError(f"unknown noise family {type(family).__name__}")


def fisher_affine_pushforward(a, fisher: FisherMatrix, wrt=None) -> FisherMatrix:
    """Fisher information of x given the Fisher of u = A x + const: A^T I A."""
    a = np.asarray(a, float)
    inner = fisher.matrix
    if a.shape[0] != inner.shape[0]:
        raise ValueError(f"A has {a.shape[0]} rows, Fisher is {inner.shape[0]}-dim")
    return FisherMatrix(a.T @ inner @ a, wrt=wrt or fisher.wrt)


def fisher_quadrature(family, endpoint_trim=1e-12) -> float:
    """Scalar per-component Fisher by adaptive quadrature.

    Independent check of the closed forms: evaluates integral of
    (d/dx log f)^2 f with the score taken by central differences of the
    log-density.  Bounded supports are trimmed by `endpoint_trim`
    (relative to the width) to avoid 0/0 at the boundary.
    """
    if isinstance(family, Gaussian):
        sig = float(np.sqrt(family.cov[0, 0]))
        if sig <= 0:
            raise ValueError("component variance must be > 0")
        logf = lambda x: -0.5 * ((x - family.mean[0]) / sig) ** 2 - np.log(
            sig * np.sqrt(2 * np.pi)
        )
        lo, hi = family.mean[0] - 40 * sig, family.mean[0] + 40 * sig
        points = None
    elif isinstance(family, LaplaceIID):
        logf = family.component_logpdf
        lo, hi = -45 * family.scale, 45 * family.scale
        points = [0.0]
    elif isinstance(family, CauchyIID):
        logf = family.component_logpdf
        lo, hi = -np.inf, np.inf
        points = None
    elif isinstance(family, Cos2Bounded):
        logf = family.component_logpdf
        pad = endpoint_trim * family.width
        lo, hi = family.lower + pad, family.upper - pad
        points = None
    elif isinstance(family, TwinUniform):
        raise UnsupportedFamilyError(
            "twin-uniform magnitude noise has no location Fisher information"
        )
    else:
        raise UnsupportedFamilyError(f"unknown noise family {type(family).__name__}")

    h = 1e-6

    def integrand(x):
        score = (logf(x + h) - logf(x - h)) / (2.0 * h)
        return score * score * np.exp(logf(x))

    value, _ = integrate.quad(integrand, lo, hi, points=points, limit=400)
    return float(value)


@dataclass(frozen=True)
class MonteCarloMoment:
    """A Monte Carlo estimate with its elementwise standard error."""

    value: np.ndarray
    stderr: np.ndarray
    n_samples: int


def empirical_score_mean(mech, model, n_samples, seed, y=None) -> MonteCarloMoment:
    """Monte Carlo mean of the conditional score d/dy log p(z | y).

    The score of a regular conditional density integrates to zero; this
    estimates it at a fixed y and reports elementwise standard errors.
    """
    rng = np.random.default_rng(seed)
    if y is None:
        y = model.H @ np.full(model.n, 0.5) + model.noise_mean()
    y = np.asarray(y, float)
    z = mech.sample(y, rng, size=n_samples)
    scores = mech.conditional_score_y(z, y)
    mean = scores.mean(axis=0)
    stderr = scores.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return MonteCarloMoment(mean, stderr, n_samples)


def admissibility_cross_term(mech, model, n_samples, seed, theta=None) -> MonteCarloMoment:
    """Monte Carlo estimate of E[score(z|d) score(z|w)^T] at a fixed theta.

    Both scores are taken with respect to theta.  For an admissible
    mechanism the expectation is the zero matrix; the estimate comes with
    elementwise standard errors so tests can band it.
    """
    rng = np.random.default_rng(seed)
    n = model.n
    if theta is None:
        theta = np.linspace(0.2, 1.0, n)
    theta = np.asarray(theta, float)
    w = model.noise.sample(rng, size=n_samples)
    if hasattr(mech, "draw_noise_given_w"):
        # mechanisms whose noise law depends on the realized measurement
        # noise must expose that coupling to the auditor
        d = mech.draw_noise_given_w(w, rng)
    else:
        d = mech.draw_noise(rng, size=n_samples)
    y = model.H @ theta + w
    z = mech.apply(y, d)
    s_d = mech.theta_score_given_noise(z, d, theta, model)
    s_w = mech.theta_score_given_meas(z, w, theta, model)
    prod = np.einsum("ri,rj->rij", s_d, s_w)
    value = prod.mean(axis=0)
    stderr = prod.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return MonteCarloMoment(value, stderr, n_samples)
