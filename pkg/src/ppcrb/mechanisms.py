"""Stochastic obfuscation mechanisms and their information-budget calibration.

A mechanism maps a measurement vector y to a released vector z using fresh
internal noise d.  Every calibrated mechanism carries a certified bound S on
the Fisher information that z retains about y: either globally in y, or on a
stated region of y values for the multiplicative mechanism, whose information
leakage grows without bound as y approaches zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from .errors import CalibrationError, ScenarioError, UnsupportedFamilyError
from .fisher import (
    CauchyIID,
    Cos2Bounded,
    Gaussian,
    LaplaceIID,
    TwinUniform,
    fisher_of_noise,
)
from .linalg import as_psd, robust_inverse, spectral_norm


@dataclass(frozen=True)
class MeasurementModel:
    """Linear measurement y = H theta + w with additive noise w."""

    H: np.ndarray
    noise: object

    def __post_init__(self):
        h = np.asarray(self.H, dtype=float)
        if h.ndim != 2:
            raise ValueError(f"H must be a matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("H contains non-finite entries")
        if self.noise.dim != h.shape[0]:
            raise ValueError(
                f"noise dimension {self.noise.dim} != number of measurements {h.shape[0]}"
            )
        object.__setattr__(self, "H", h)

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    def noise_mean(self):
        return self.noise.mean_vector()

    def noise_cov(self):
        return self.noise.cov_matrix()

    def sample_y(self, theta, rng, size=None):
        theta = np.asarray(theta, float)
        return self.H @ theta + self.noise.sample(rng, size=size)


def _diag_sigmas(cov, what="covariance"):
    cov = np.asarray(cov, float)
    if np.any(np.abs(cov - np.diag(np.diag(cov))) > 1e-12 * max(1.0, np.abs(cov).max())):
        raise UnsupportedFamilyError(f"{what} must be diagonal for this operation")
    return np.sqrt(np.diag(cov))


@dataclass(frozen=True)
class AffineMechanism:
    """Release z = A y + offset + d with additive noise d.

    certified_bound is the matrix S in I_z(y) <= S; for every affine
    mechanism built by the calibrators in this module the certificate
    holds for all y (scope "global").
    """

    kind: str
    A: np.ndarray
    offset: np.ndarray
    noise: object
    certified_bound: np.ndarray
    budget_s: float | None = None
    scope: str = "global"

    def __post_init__(self):
        a = np.asarray(self.A, float)
        off = np.broadcast_to(np.asarray(self.offset, float), (a.shape[0],)).copy()
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "certified_bound", np.asarray(self.certified_bound, float))
        if self.noise.dim != a.shape[0]:
            raise ValueError("noise dimension must match the released dimension")

    @property
    def input_dim(self) -> int:
        return self.A.shape[1]

    @property
    def output_dim(self) -> int:
        return self.A.shape[0]

    def draw_noise(self, rng, size=None):
        return self.noise.sample(rng, size=size)

    def apply(self, y, d):
        y = np.asarray(y, float)
        return y @ self.A.T + self.offset + d

    def sample(self, y, rng, size=None):
        return self.apply(y, self.draw_noise(rng, size=size))

    def conditional_score_y(self, z, y):
        """Score d/dy log p(z | y), vectorized over leading axes of z."""
        resid = np.asarray(z, float) - np.asarray(y, float) @ self.A.T - self.offset
        return -self.noise.location_score(resid) @ self.A

    def theta_score_given_noise(self, z, d, theta, model):
        """Score d/dtheta log p(z | d, theta) for y = H theta + w."""
        ah = self.A @ model.H
        mu_w = model.noise_mean()
        resid = (
            np.asarray(z, float)
            - ah @ np.asarray(theta, float)
            - self.offset
            - np.asarray(d, float)
            - self.A @ mu_w
        )
        if isinstance(model.noise, Gaussian):
            m_inv = robust_inverse(self.A @ model.noise_cov() @ self.A.T)
            return resid @ m_inv @ ah
        if self.A.shape[0] == self.A.shape[1] and np.allclose(self.A, np.eye(self.A.shape[0])):
            return -model.noise.location_score(resid) @ model.H
        raise UnsupportedFamilyError(
            "theta score given d needs Gaussian measurement noise or an identity A"
        )

    def theta_score_given_meas(self, z, w, theta, model):
        """Score d/dtheta log p(z | w, theta) for y = H theta + w."""
        ah = self.A @ model.H
        y = model.H @ np.asarray(theta, float) + np.asarray(w, float)
        resid = np.asarray(z, float) - y @ self.A.T - self.offset
        return -self.noise.location_score(resid) @ ah


@dataclass(frozen=True)
class TwinUniformMechanism:
    """Multiplicative release z_j = D_j y_j with two-sided uniform D_j.

    The certificate I_z(y) <= S holds only on the stated region of y;
    the mechanism itself is defined for every y.
    """

    kind: str
    center: float
    half_width: np.ndarray
    region: tuple
    certified_bound: np.ndarray
    budget_s: float
    smoothing: float = 0.25
    scope: str = "region"

    def __post_init__(self):
        hw = np.asarray(self.half_width, float)
        lo = np.asarray(self.region[0], float)
        hi = np.asarray(self.region[1], float)
        object.__setattr__(self, "half_width", hw)
        object.__setattr__(self, "region", (lo, hi))
        object.__setattr__(self, "certified_bound", np.asarray(self.certified_bound, float))

    @property
    def input_dim(self) -> int:
        return self.half_width.shape[0]

    @property
    def output_dim(self) -> int:
        return self.half_width.shape[0]

    @property
    def noise(self):
        return TwinUniform(self.center, self.half_width, self.input_dim)

    def draw_noise(self, rng, size=None):
        return self.noise.sample(rng, size=size)

    def apply(self, y, d):
        return np.asarray(y, float) * np.asarray(d, float)

    def sample(self, y, rng, size=None):
        return self.apply(y, self.draw_noise(rng, size=size))

    def conditional_score_y(self, z, y):
        raise UnsupportedFamilyError(
            "the multiplicative release has a piecewise-constant conditional density; "
            "its score in y is not defined"
        )

    def theta_score_given_noise(self, z, d, theta, model):
        raise UnsupportedFamilyError(
            "theta scores are not defined for the multiplicative release"
        )

    theta_score_given_meas = theta_score_given_noise


@dataclass(frozen=True)
class NoiseRecyclingMechanism:
    """Deliberately coupled release z = y + d with d = rho * w + e.

    The obfuscation reuses a fraction of the very measurement noise it is
    meant to mask, so the noise-given and measurement-given scores about
    theta stay correlated: their cross moment is -c / Var[w | d] per unit
    of H with c = rho sigma^2 / (rho^2 sigma^2 + extra^2).  Kept as a
    negative control for the admissibility audit; it certifies nothing.
    """

    rho: float
    extra: float
    kind: str = "noise-recycled"
    certified_bound: np.ndarray = field(default_factory=lambda: np.full((1, 1), np.nan))
    budget_s: float | None = None
    scope: str = "none"

    def __post_init__(self):
        if self.extra <= 0:
            raise ValueError("the fresh-noise scale 'extra' must be > 0")

    def _iso_sigma2(self, model):
        cov = model.noise_cov()
        sig2 = float(cov[0, 0])
        if not np.allclose(cov, sig2 * np.eye(cov.shape[0]), atol=1e-12):
            raise UnsupportedFamilyError(
                "the recycling control needs isotropic Gaussian measurement noise"
            )
        return sig2

    def draw_noise_given_w(self, w, rng):
        w = np.asarray(w, float)
        return self.rho * w + self.extra * rng.standard_normal(w.shape)

    def draw_noise(self, rng, size=None):
        raise UnsupportedFamilyError(
            "the recycled noise cannot be drawn without the measurement noise"
        )

    def apply(self, y, d):
        return np.asarray(y, float) + np.asarray(d, float)

    def sample(self, y, rng, size=None):
        raise UnsupportedFamilyError(
            "the release law depends on theta beyond y; it is not a channel in y"
        )

    def conditional_score_y(self, z, y):
        raise UnsupportedFamilyError(
            "the release law depends on theta beyond y; it is not a channel in y"
        )

    def theta_score_given_noise(self, z, d, theta, model):
        # z | d is Gaussian: w | d has mean c d and variance sigma^2 extra^2 / v
        sig2 = self._iso_sigma2(model)
        v = self.rho**2 * sig2 + self.extra**2
        c = self.rho * sig2 / v
        var = sig2 * self.extra**2 / v
        resid = np.asarray(z, float) - model.H @ np.asarray(theta, float) - (1.0 + c) * d
        return (resid / var) @ model.H

    def theta_score_given_meas(self, z, w, theta, model):
        # z | w is Gaussian with mean H theta + (1 + rho) w and variance extra^2
        resid = np.asarray(z, float) - model.H @ np.asarray(theta, float) - (1.0 + self.rho) * w
        return (resid / self.extra**2) @ model.H


def sample(mech, y, rng, size=None):
    """Draw one release (or `size` releases) of mechanism `mech` at y."""
    return mech.sample(y, rng, size=size)


def budget_level(S, dim=None) -> float:
    """Extract s from a scaled-identity budget S = s I; reject anything else."""
    if np.isscalar(S):
        s = float(S)
    else:
        mat = as_psd(S, dim=dim, name="S").entries
        s = float(mat[0, 0])
        if not np.allclose(mat, s * np.eye(mat.shape[0]), atol=1e-12 * max(1.0, abs(s))):
            raise CalibrationError(
                "this calibration supports only scaled-identity budgets S = s I"
            )
    if s <= 0:
        raise CalibrationError("the budget level s must be > 0")
    return s


def gaussian_optimal_mechanism(model: MeasurementModel, S) -> AffineMechanism:
    """Release z = S^(1/2) (y - E[w]) + d with standard normal d.

    Attains the certified information budget with equality: the Fisher
    information of z about y equals S exactly.
    """
    s_mat = as_psd(S, dim=model.m, name="S")
    root = s_mat.sqrt()
    mu_w = model.noise_mean()
    budget = None
    diag = np.diag(s_mat.entries)
    if np.allclose(s_mat.entries, diag[0] * np.eye(model.m)):
        budget = float(diag[0])
    return AffineMechanism(
        kind="gaussian-optimal",
        A=root,
        offset=-root @ mu_w,
        noise=Gaussian(np.zeros(model.m), np.eye(model.m)),
        certified_bound=s_mat.entries,
        budget_s=budget,
    )


def calibrate_laplace_data_perturbation(model: MeasurementModel, S) -> AffineMechanism:
    """Release z = y + d with iid Laplace d, scale b = 1/sqrt(s)."""
    s = budget_level(S, dim=model.m)
    b = 1.0 / np.sqrt(s)
    return AffineMechanism(
        kind="laplace-data",
        A=np.eye(model.m),
        offset=np.zeros(model.m),
        noise=LaplaceIID(b, model.m),
        certified_bound=s * np.eye(model.m),
        budget_s=s,
    )


def calibrate_laplace_output_perturbation(model: MeasurementModel, S) -> AffineMechanism:
    """Release the perturbed least-squares map z = (H^T H)^-1 H^T y + d.

    The Laplace scale is set from the top eigenvalue of A^T A so that the
    released Fisher information (1/b^2) A^T A stays below s I, with
    equality along the top eigenvector.
    """
    s = budget_level(S, dim=model.m)
    a = robust_inverse(model.H.T @ model.H) @ model.H.T
    lam_max = spectral_norm(a.T @ a)
    b = np.sqrt(lam_max / s)
    return AffineMechanism(
        kind="laplace-output",
        A=a,
        offset=np.zeros(model.n),
        noise=LaplaceIID(b, model.n),
        certified_bound=s * np.eye(model.m),
        budget_s=s,
    )


def calibrate_cauchy_data_perturbation(model: MeasurementModel, S) -> AffineMechanism:
    """Release z = y + d with iid Cauchy d, scale gamma = 1/sqrt(2 s)."""
    s = budget_level(S, dim=model.m)
    gamma = 1.0 / np.sqrt(2.0 * s)
    return AffineMechanism(
        kind="cauchy-data",
        A=np.eye(model.m),
        offset=np.zeros(model.m),
        noise=CauchyIID(gamma, model.m),
        certified_bound=s * np.eye(model.m),
        budget_s=s,
    )


def calibrate_cos2_mechanism(model: MeasurementModel, S) -> AffineMechanism:
    """Release z = y + d with iid cosine-squared d of width L = 2 pi/sqrt(s)."""
    s = budget_level(S, dim=model.m)
    width = 2.0 * np.pi / np.sqrt(s)
    return AffineMechanism(
        kind="cos2-data",
        A=np.eye(model.m),
        offset=np.zeros(model.m),
        noise=Cos2Bounded(-0.5 * width, 0.5 * width, model.m),
        certified_bound=s * np.eye(model.m),
        budget_s=s,
    )


def twin_uniform_scale_fisher(delta, center=1.0, smoothing=0.25, npts=6001):
    """Numeric Fisher of the multiplicative release at y = 1.

    The exact release z = D y has a conditional density that is piecewise
    constant in z with support edges moving in y, so its raw Fisher
    information is unbounded.  The numeric value used for calibration is
    the scale-family Fisher of the Gaussian-smoothed magnitude
    V = D + smoothing*delta*eta with standard normal eta, computed on a
    grid in units of delta so all half-widths resolve equally.  It is
    finite, strictly decreasing in delta, and diverges as delta -> 0.
    """
    delta = float(delta)
    if not 0 < delta < center:
        raise ValueError("delta must lie in (0, center)")
    sig = smoothing * delta
    reach = delta + 12.0 * sig
    if center - reach > 0:
        # humps at +-center are disjoint: integrate the positive one, double it
        t = np.linspace(center - reach, center + reach, npts)
        fold = 2.0
    else:
        t = np.linspace(0.0, center + reach, npts)
        fold = 2.0  # density is even, so the t > 0 half still carries half the mass
    a1, b1 = center - delta, center + delta
    q = (
        ndtr((t - a1) / sig)
        - ndtr((t - b1) / sig)
        + ndtr((t + b1) / sig)
        - ndtr((t + a1) / sig)
    ) / (4.0 * delta)
    phi = lambda u: np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    dq = (
        phi((t - a1) / sig)
        - phi((t - b1) / sig)
        + phi((t + b1) / sig)
        - phi((t + a1) / sig)
    ) / (4.0 * delta * sig)
    mask = q > 1e-300
    sc = np.zeros_like(t)
    sc[mask] = 1.0 + t[mask] * dq[mask] / q[mask]
    return fold * float(np.trapezoid(sc * sc * q, t))


def twin_uniform_fisher_at(y, delta, center=1.0, smoothing=0.25) -> float:
    """Numeric Fisher of the multiplicative release at measurement value y."""
    y = float(y)
    if y == 0.0:
        return np.inf
    return twin_uniform_scale_fisher(delta, center, smoothing) / y**2


def calibrate_twin_uniform_multiplicative(
    model: MeasurementModel, S, y_region, center=1.0, smoothing=0.25
) -> TwinUniformMechanism:
    """Pick per-component half-widths so sup of I_z(y) over the region is s.

    y_region is a (low, high) pair of vectors.  The numeric Fisher scales
    as 1/y^2, so the supremum over a sign-definite interval sits at the
    endpoint of smallest magnitude; bisection on delta matches it to s.
    Regions containing zero, or budgets below the value reached as
    delta -> center, raise CalibrationError.
    """
    s = budget_level(S, dim=model.m)
    lo = np.broadcast_to(np.asarray(y_region[0], float), (model.m,))
    hi = np.broadcast_to(np.asarray(y_region[1], float), (model.m,))
    if np.any(lo >= hi):
        raise CalibrationError("y_region must satisfy low < high componentwise")
    if np.any((lo <= 0) & (hi >= 0)):
        raise CalibrationError(
            "y_region touches zero: the multiplicative release cannot bound "
            "its information there"
        )
    ystar = np.minimum(np.abs(lo), np.abs(hi))

    cache = {}

    def i0(delta):
        if delta not in cache:
            cache[delta] = twin_uniform_scale_fisher(delta, center, smoothing)
        return cache[delta]

    d_hi = center * (1.0 - 1e-9)
    floor = i0(d_hi)
    deltas = np.empty(model.m)
    for j in range(model.m):
        target = s * ystar[j] ** 2
        if target < floor * (1.0 - 1e-12):
            raise CalibrationError(
                f"budget s={s:g} is unreachable on component {j}: the numeric "
                f"Fisher cannot go below {floor / ystar[j]**2:.6g} there"
            )
        d_lo = d_hi / 2.0
        while i0(d_lo) < target and d_lo > 1e-12:
            d_lo /= 2.0
        if i0(d_lo) < target:
            deltas[j] = d_hi
            continue
        deltas[j] = optimize.brentq(
            lambda d: i0(d) - target, d_lo, d_hi, xtol=1e-13, rtol=1e-12
        )
    return TwinUniformMechanism(
        kind="twin-uniform-mult",
        center=center,
        half_width=deltas,
        region=(lo.copy(), hi.copy()),
        certified_bound=s * np.eye(model.m),
        budget_s=s,
        smoothing=smoothing,
    )


MECHANISM_KINDS = (
    "gaussian-optimal",
    "laplace-data",
    "laplace-output",
    "cauchy-data",
    "cos2-data",
    "twin-uniform-mult",
    "noise-recycled",
)


def make_mechanism(model: MeasurementModel, descriptor: dict, y_region=None):
    """Build a mechanism from a serializable descriptor {kind, budget_s, ...}."""
    if "kind" not in descriptor:
        raise ScenarioError("mechanism descriptor is missing the field 'kind'")
    kind = descriptor["kind"]
    if kind not in MECHANISM_KINDS:
        raise ScenarioError(f"mechanism 'kind' must be one of {MECHANISM_KINDS}, got {kind!r}")
    if kind == "noise-recycled":
        return NoiseRecyclingMechanism(
            rho=float(descriptor.get("rho", 0.5)),
            extra=float(descriptor.get("extra", 0.2)),
        )
    if "budget_s" not in descriptor:
        raise ScenarioError(f"mechanism descriptor for {kind!r} is missing 'budget_s'")
    s = float(descriptor["budget_s"])
    if kind == "gaussian-optimal":
        return gaussian_optimal_mechanism(model, s)
    if kind == "laplace-data":
        return calibrate_laplace_data_perturbation(model, s)
    if kind == "laplace-output":
        return calibrate_laplace_output_perturbation(model, s)
    if kind == "cauchy-data":
        return calibrate_cauchy_data_perturbation(model, s)
    if kind == "cos2-data":
        return calibrate_cos2_mechanism(model, s)
    region = descriptor.get("region", y_region)
    if region is None:
        raise ScenarioError("twin-uniform-mult needs a 'region' (low/high vectors)")
    return calibrate_twin_uniform_multiplicative(model, s, region)


def certified_information(mech, model: MeasurementModel):
    """Numeric estimate of the released Fisher information about y.

    Used to audit the certificates: for additive mechanisms this is the
    pushforward A^T I_d A with I_d from quadrature-checked closed forms;
    for the multiplicative mechanism it is the numeric Fisher at the
    region endpoint of smallest magnitude.
    """
    if isinstance(mech, AffineMechanism):
        i_d = fisher_of_noise(mech.noise).matrix
        return mech.A.T @ i_d @ mech.A
    if isinstance(mech, TwinUniformMechanism):
        lo, hi = mech.region
        ystar = np.minimum(np.abs(lo), np.abs(hi))
        vals = [
            twin_uniform_fisher_at(ystar[j], mech.half_width[j], mech.center, mech.smoothing)
            for j in range(len(ystar))
        ]
        return np.diag(vals)
    raise UnsupportedFamilyError(f"no certificate audit for {type(mech).__name__}")
