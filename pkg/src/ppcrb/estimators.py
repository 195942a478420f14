"""Estimators matched to the obfuscation mechanisms.

The linear estimator attains the error-covariance bound when the release
comes from the Gaussian-optimal mechanism.  The maximum-likelihood decoders
for the Laplace and Cauchy data perturbations work on the exact convolution
densities: Gaussian + Laplace has a closed form in the scaled complementary
error function, Gaussian + Cauchy is the Voigt profile.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import erfcx, voigt_profile, wofz

from .errors import NotIdentifiableError, UnsupportedFamilyError
from .fisher import Gaussian
from .linalg import as_psd, robust_inverse
from .mechanisms import MeasurementModel, TwinUniformMechanism, _diag_sigmas
from .bounds import ppcr_bound_for_model

_SQRT_PI = np.sqrt(np.pi)
_LOG2 = np.log(2.0)


@dataclass
class Estimate:
    theta: np.ndarray
    estimator: str
    converged: bool = True
    iterations: int = 0
    grad_norm: float = field(default=np.nan)


def least_squares_estimate(z, model: MeasurementModel) -> Estimate:
    """Ordinary least squares on a (possibly perturbed) measurement vector."""
    theta, *_ = np.linalg.lstsq(model.H, np.asarray(z, float), rcond=None)
    return Estimate(theta=theta, estimator="least-squares")


def _weighted_ls(z, model):
    sig = _diag_sigmas(model.noise_cov())
    if np.any(sig == 0):
        theta, *_ = np.linalg.lstsq(model.H, np.asarray(z, float), rcond=None)
        return theta
    hw = model.H / sig[:, None]
    zw = (np.asarray(z, float) - model.noise_mean()) / sig
    theta, *_ = np.linalg.lstsq(hw, zw, rcond=None)
    return theta


def optimal_linear_coefficient(model: MeasurementModel, S) -> np.ndarray:
    """Matrix W with theta_hat = W z for the Gaussian-optimal release.

    W = Sigma H^T S^(1/2) (S^(1/2) Sigma_w S^(1/2) + I)^(-1) where Sigma is
    the error-covariance bound; the release is centered so that
    E[z] = S^(1/2) H theta, making W z unbiased with covariance Sigma.
    """
    bound = ppcr_bound_for_model(model, S)
    if not bound.identifiable:
        raise NotIdentifiableError(
            "theta is not identifiable under this budget; no unbiased linear "
            "estimator exists"
        )
    root = as_psd(S, dim=model.m, name="S").sqrt()
    inner = robust_inverse(root @ model.noise_cov() @ root + np.eye(model.m))
    return bound.sigma @ model.H.T @ root @ inner


def optimal_linear_estimate(z, model: MeasurementModel, S) -> Estimate:
    """Unbiased linear decoder of the Gaussian-optimal release."""
    w = optimal_linear_coefficient(model, S)
    return Estimate(theta=w @ np.asarray(z, float), estimator="optimal-linear")


def output_perturbation_estimate(z, model: MeasurementModel | None = None) -> Estimate:
    """The released vector of an output-perturbation mechanism is the estimate."""
    z = np.asarray(z, float)
    if model is not None and z.shape[-1] != model.n:
        raise ValueError(f"release has dimension {z.shape[-1]}, expected {model.n}")
    return Estimate(theta=z.copy(), estimator="output-perturbation")


def twin_uniform_central_estimate(
    z, model: MeasurementModel, mech: TwinUniformMechanism
) -> Estimate:
    """Decode the multiplicative release: undo |D| by its mean, restore signs.

    Valid when the calibration region is sign-definite; the sign of each
    measurement is taken from the region, and E|D| = center makes the
    reconstructed measurement unbiased there.
    """
    lo, hi = mech.region
    if np.any((lo <= 0) & (hi >= 0)):
        raise UnsupportedFamilyError("the calibration region must be sign-definite")
    signs = np.sign(lo + hi)
    y_hat = signs * np.abs(np.asarray(z, float)) / mech.center
    theta, *_ = np.linalg.lstsq(model.H, y_hat, rcond=None)
    return Estimate(theta=theta, estimator="twin-uniform-central")


# ---------------------------------------------------------------------------
# Gaussian (+) Laplace convolution

def _log_erfcx(u):
    u = np.asarray(u, float)
    out = np.empty_like(u)
    small = u > -6.0
    out[small] = np.log(erfcx(u[small]))
    # erfcx(u) = 2 exp(u^2) - erfcx(-u); for u <= -6 the correction is < 1e-16
    out[~small] = np.square(u[~small]) + _LOG2
    return out


def gauss_laplace_logpdf(v, sigma, b):
    """Log-density of G + L with G ~ N(0, sigma^2), L ~ Laplace(b)."""
    v = np.asarray(v, float)
    lam = 1.0 / b
    rt = np.sqrt(2.0) * sigma
    u1 = (sigma**2 * lam - v) / rt
    u2 = (sigma**2 * lam + v) / rt
    return (
        np.log(lam / 4.0)
        - np.square(v) / (2.0 * sigma**2)
        + np.logaddexp(_log_erfcx(u1), _log_erfcx(u2))
    )


def gauss_laplace_score(v, sigma, b):
    """d/dv of the log-density above, in an overflow-free ratio form."""
    v = np.asarray(v, float)
    lam = 1.0 / b
    rt = np.sqrt(2.0) * sigma
    u1 = (sigma**2 * lam - v) / rt
    u2 = (sigma**2 * lam + v) / rt
    l1, l2 = _log_erfcx(u1), _log_erfcx(u2)
    lmax = np.maximum(l1, l2)
    t1 = np.exp(l1 - lmax)
    t2 = np.exp(l2 - lmax)
    # d/dv log(e1 + e2) = (2 u2 e2 - 2 u1 e1) / (rt (e1 + e2)); the -2/sqrt(pi)
    # terms of d/du erfcx cancel between the two branches
    ratio = (2.0 * u2 * t2 - 2.0 * u1 * t1) / (t1 + t2)
    return -v / sigma**2 + ratio / rt


def mle_laplace_data(z, model: MeasurementModel, b, max_iter=500) -> Estimate:
    """Maximum likelihood for z = H theta + w + d, w Gaussian, d Laplace(b).

    Quasi-Newton with the analytic gradient; seeded at least squares.
    b = 0 reduces exactly to (weighted) least squares.
    """
    z = np.asarray(z, float)
    if b < 0:
        raise ValueError("b must be >= 0")
    if not isinstance(model.noise, Gaussian):
        raise UnsupportedFamilyError("the Laplace decoder assumes Gaussian measurement noise")
    if b == 0.0:
        return Estimate(theta=_weighted_ls(z, model), estimator="mle-laplace", grad_norm=0.0)
    sig = _diag_sigmas(model.noise_cov())
    if np.any(sig == 0):
        raise ValueError("measurement noise must have positive variance when b > 0")
    mu = model.noise_mean()

    def neg_loglik(theta):
        v = z - model.H @ theta - mu
        return -float(np.sum(gauss_laplace_logpdf(v, sig, b)))

    def grad(theta):
        v = z - model.H @ theta - mu
        return model.H.T @ gauss_laplace_score(v, sig, b)

    x0 = _weighted_ls(z, model)
    res = optimize.minimize(
        neg_loglik,
        x0,
        jac=grad,
        method="BFGS",
        options={"gtol": 1e-8, "maxiter": max_iter},
    )
    gnorm = float(np.linalg.norm(grad(res.x)))
    return Estimate(
        theta=res.x,
        estimator="mle-laplace",
        converged=bool(res.success or gnorm <= 1e-6),
        iterations=int(res.nit),
        grad_norm=gnorm,
    )


# ---------------------------------------------------------------------------
# Gaussian (+) Cauchy convolution (Voigt profile)

def gauss_cauchy_logpdf(v, sigma, gamma):
    """Log-density of G + C with G ~ N(0, sigma^2), C ~ Cauchy(gamma)."""
    v = np.asarray(v, float)
    return np.log(voigt_profile(v, sigma, gamma))


def gauss_cauchy_score(v, sigma, gamma):
    """d/dv log of the Voigt profile via the Faddeeva function derivative."""
    v = np.asarray(v, float)
    sigma = np.broadcast_to(np.asarray(sigma, float), v.shape)
    out = np.empty_like(v)
    pure = sigma == 0.0
    if np.any(pure):
        vv = v[pure]
        out[pure] = -2.0 * vv / (gamma**2 + np.square(vv))
    if np.any(~pure):
        vv, ss = v[~pure], sigma[~pure]
        zeta = (vv + 1j * gamma) / (ss * np.sqrt(2.0))
        w = wofz(zeta)
        dw = -2.0 * zeta * w + 2.0j / _SQRT_PI
        out[~pure] = (dw / (ss * np.sqrt(2.0))).real / w.real
    return out


def mle_cauchy_data(
    z, model: MeasurementModel, gamma, max_iter=500, n_starts=5
) -> Estimate:
    """Maximum likelihood for z = H theta + w + d, w Gaussian, d Cauchy(gamma).

    The likelihood is multimodal for heavy-tailed releases, so the search
    runs from a least-squares seed plus deterministic perturbations of it
    and keeps the best mode.  gamma = 0 reduces to (weighted) least squares.
    """
    z = np.asarray(z, float)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if not isinstance(model.noise, Gaussian):
        raise UnsupportedFamilyError("the Cauchy decoder assumes Gaussian measurement noise")
    if gamma == 0.0:
        return Estimate(theta=_weighted_ls(z, model), estimator="mle-cauchy", grad_norm=0.0)
    sig = _diag_sigmas(model.noise_cov())
    mu = model.noise_mean()

    def neg_loglik(theta):
        v = z - model.H @ theta - mu
        return -float(np.sum(gauss_cauchy_logpdf(v, sig, gamma)))

    def grad(theta):
        v = z - model.H @ theta - mu
        return model.H.T @ gauss_cauchy_score(v, sig, gamma)

    x0 = _weighted_ls(z, model)
    spread = max(1.0, float(np.linalg.norm(x0))) * gamma
    start_rng = np.random.default_rng(0)
    starts = [x0] + [
        x0 + spread * start_rng.standard_normal(x0.shape) for _ in range(n_starts - 1)
    ]
    best = None
    best_val = np.inf
    for s0 in starts:
        res = optimize.minimize(
            neg_loglik,
            s0,
            jac=grad,
            method="BFGS",
            options={"gtol": 1e-8, "maxiter": max_iter},
        )
        if res.fun < best_val:
            best, best_val = res, float(res.fun)
    gnorm = float(np.linalg.norm(grad(best.x)))
    return Estimate(
        theta=best.x,
        estimator="mle-cauchy",
        converged=bool(best.success or gnorm <= 1e-6),
        iterations=int(best.nit),
        grad_norm=gnorm,
    )
