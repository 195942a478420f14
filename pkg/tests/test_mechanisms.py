"""Tests for the release mechanisms and their budget calibrations."""

import numpy as np
import pytest

from ppcrb.errors import CalibrationError, ScenarioError, UnsupportedFamilyError
from ppcrb.fisher import (
    Gaussian,
    admissibility_cross_term,
    empirical_score_mean,
    fisher_of_noise,
)
from ppcrb.linalg import loewner_leq
from ppcrb.mechanisms import (
    MECHANISM_KINDS,
    MeasurementModel,
    NoiseRecyclingMechanism,
    budget_level,
    calibrate_cauchy_data_perturbation,
    calibrate_cos2_mechanism,
    calibrate_laplace_data_perturbation,
    calibrate_laplace_output_perturbation,
    calibrate_twin_uniform_multiplicative,
    certified_information,
    gaussian_optimal_mechanism,
    make_mechanism,
    twin_uniform_fisher_at,
    twin_uniform_scale_fisher,
)


@pytest.fixture
def model():
    h = np.array([[1.0, 0.2], [0.3, 1.0], [0.5, -0.5]])
    return MeasurementModel(h, Gaussian(np.zeros(3), 0.04 * np.eye(3)))


class TestBudgetLevel:
    def test_scalar(self):
        assert budget_level(2.5, dim=3) == 2.5

    def test_scaled_identity(self):
        assert budget_level(2.5 * np.eye(3)) == 2.5

    def test_general_matrix_rejected(self):
        with pytest.raises(CalibrationError):
            budget_level(np.diag([1.0, 2.0]))


class TestGaussianOptimal:
    def test_certificate_met_with_equality(self, model):
        mech = gaussian_optimal_mechanism(model, 2.0)
        info = certified_information(mech, model)
        assert np.allclose(info, 2.0 * np.eye(3), atol=1e-12)

    def test_released_mean_centered(self, model):
        # offset removes the noise mean: E[z] = S^(1/2) H theta
        noisy = MeasurementModel(
            model.H, Gaussian(np.array([0.5, -0.2, 0.1]), 0.04 * np.eye(3))
        )
        mech = gaussian_optimal_mechanism(noisy, 1.0)
        rng = np.random.default_rng(0)
        theta = np.array([0.4, -0.3])
        y = noisy.sample_y(theta, rng, size=200_000)
        z = mech.apply(y, mech.draw_noise(rng, size=200_000))
        expected = mech.A @ noisy.H @ theta
        assert np.allclose(z.mean(axis=0), expected, atol=0.01)

    def test_general_budget_matrix(self, model):
        s = np.diag([1.0, 2.0, 3.0])
        mech = gaussian_optimal_mechanism(model, s)
        assert mech.budget_s is None
        assert np.allclose(certified_information(mech, model), s)


class TestAdditiveCalibrations:
    def test_laplace_data_scale(self, model):
        mech = calibrate_laplace_data_perturbation(model, 4.0)
        assert mech.noise.scale == 0.5  # b = 1/sqrt(s)
        assert np.allclose(certified_information(mech, model), 4.0 * np.eye(3))

    def test_cauchy_scale(self, model):
        mech = calibrate_cauchy_data_perturbation(model, 2.0)
        assert mech.noise.scale == 0.5  # gamma = 1/sqrt(2 s)
        assert np.allclose(certified_information(mech, model), 2.0 * np.eye(3))

    def test_cos2_width(self, model):
        mech = calibrate_cos2_mechanism(model, 4.0)
        assert np.isclose(mech.noise.width, np.pi)  # L = 2 pi / sqrt(s)
        assert np.allclose(certified_information(mech, model), 4.0 * np.eye(3))

    def test_output_certificate_below_budget(self, model):
        mech = calibrate_laplace_output_perturbation(model, 3.0)
        info = certified_information(mech, model)
        assert loewner_leq(info, 3.0 * np.eye(3), tol=1e-9)
        # tight along the top eigenvector
        assert np.isclose(np.linalg.eigvalsh(info)[-1], 3.0)

    def test_all_additive_respect_budget(self, model):
        for s in (0.5, 1.0, 4.0):
            for cal in (
                calibrate_laplace_data_perturbation,
                calibrate_cauchy_data_perturbation,
                calibrate_cos2_mechanism,
                calibrate_laplace_output_perturbation,
            ):
                mech = cal(model, s)
                info = certified_information(mech, model)
                assert loewner_leq(info, s * np.eye(3), tol=1e-9)

    def test_more_budget_means_less_noise(self, model):
        b = [calibrate_laplace_data_perturbation(model, s).noise.scale for s in (1, 2, 4)]
        assert b[0] > b[1] > b[2]


class TestTwinUniformFisher:
    def test_monotone_decreasing_in_delta(self):
        vals = [twin_uniform_scale_fisher(d) for d in (0.05, 0.1, 0.3, 0.5, 0.9)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_frozen_values(self):
        # grid-quadrature values, pinned to guard against regressions
        assert twin_uniform_scale_fisher(0.1) == pytest.approx(365.4, rel=1e-2)
        assert twin_uniform_scale_fisher(0.5) == pytest.approx(18.53, rel=1e-2)
        assert twin_uniform_scale_fisher(0.9) == pytest.approx(8.46, rel=1e-2)

    def test_scales_inverse_square_in_y(self):
        i0 = twin_uniform_scale_fisher(0.3)
        assert twin_uniform_fisher_at(2.0, 0.3) == pytest.approx(i0 / 4.0)
        assert twin_uniform_fisher_at(0.0, 0.3) == np.inf


class TestTwinUniformCalibration:
    def test_feasible_region(self, model):
        region = (np.full(3, 1.0), np.full(3, 2.0))
        mech = calibrate_twin_uniform_multiplicative(model, 9.0, region)
        # worst point of the region is y* = 1, so I0(delta) = s exactly
        assert twin_uniform_scale_fisher(mech.half_width[0]) == pytest.approx(9.0, rel=1e-9)
        info = certified_information(mech, model)
        assert loewner_leq(info, 9.0 * np.eye(3) + 1e-9 * np.eye(3))

    def test_wider_region_needs_wider_noise(self, model):
        near = calibrate_twin_uniform_multiplicative(model, 12.0, (np.full(3, 1.0), np.full(3, 2.0)))
        far = calibrate_twin_uniform_multiplicative(model, 12.0, (np.full(3, 2.0), np.full(3, 3.0)))
        # with the worst point farther from zero, less smoothing noise is needed
        assert np.all(far.half_width < near.half_width)

    def test_region_touching_zero_raises(self, model):
        with pytest.raises(CalibrationError, match="zero"):
            calibrate_twin_uniform_multiplicative(model, 9.0, (np.full(3, -1.0), np.full(3, 2.0)))

    def test_budget_below_floor_raises(self, model):
        with pytest.raises(CalibrationError, match="unreachable"):
            calibrate_twin_uniform_multiplicative(model, 0.5, (np.full(3, 1.0), np.full(3, 2.0)))

    def test_inverted_region_raises(self, model):
        with pytest.raises(CalibrationError, match="low < high"):
            calibrate_twin_uniform_multiplicative(model, 9.0, (np.full(3, 2.0), np.full(3, 1.0)))

    def test_release_multiplies(self, model):
        region = (np.full(3, 1.0), np.full(3, 2.0))
        mech = calibrate_twin_uniform_multiplicative(model, 9.0, region)
        y = np.array([1.5, 1.2, 1.8])
        d = np.array([1.1, -0.9, 1.0])
        assert np.allclose(mech.apply(y, d), y * d)


class TestMakeMechanism:
    def test_all_kinds_constructible(self, model):
        region = (np.full(3, 1.0), np.full(3, 2.0))
        for kind in MECHANISM_KINDS:
            desc = {"kind": kind, "budget_s": 9.0}
            mech = make_mechanism(model, desc, y_region=region)
            assert mech.kind == kind

    def test_missing_kind(self, model):
        with pytest.raises(ScenarioError, match="kind"):
            make_mechanism(model, {"budget_s": 1.0})

    def test_unknown_kind(self, model):
        with pytest.raises(ScenarioError, match="must be one of"):
            make_mechanism(model, {"kind": "subtract-everything"})

    def test_missing_budget(self, model):
        with pytest.raises(ScenarioError, match="budget_s"):
            make_mechanism(model, {"kind": "laplace-data"})

    def test_twin_needs_region(self, model):
        with pytest.raises(ScenarioError, match="region"):
            make_mechanism(model, {"kind": "twin-uniform-mult", "budget_s": 9.0})


class TestAdmissibilityAudit:
    """The information-processing view requires the released scores about
    theta given the obfuscation noise and given the measurement noise to be
    uncorrelated; admissible mechanisms pass, the planted control fails."""

    samples = 100_000

    def test_affine_mechanisms_pass(self, model):
        for i, cal in enumerate(
            (
                gaussian_optimal_mechanism,
                calibrate_laplace_data_perturbation,
                calibrate_cauchy_data_perturbation,
                calibrate_cos2_mechanism,
            )
        ):
            mech = cal(model, 1.0)
            est = admissibility_cross_term(mech, model, self.samples, seed=100 + i)
            assert np.all(np.abs(est.value) <= 5.0 * np.maximum(est.stderr, 1e-12))

    def test_score_mean_zero(self, model):
        for i, cal in enumerate(
            (gaussian_optimal_mechanism, calibrate_laplace_data_perturbation)
        ):
            mech = cal(model, 1.0)
            est = empirical_score_mean(mech, model, self.samples, seed=200 + i)
            assert np.all(np.abs(est.value) <= 5.0 * est.stderr)

    def test_recycling_control_fails(self, model):
        mech = NoiseRecyclingMechanism(rho=0.5, extra=0.2)
        est = admissibility_cross_term(mech, model, self.samples, seed=300)
        assert np.any(np.abs(est.value) > 5.0 * est.stderr)

    def test_recycling_cross_term_matches_closed_form(self, model):
        # E[s_d s_w^T] = -(c / Var[w|d]) H^T H with c = rho sig^2/(rho^2 sig^2 + extra^2)
        rho, extra, sig2 = 0.5, 0.2, 0.04
        v = rho**2 * sig2 + extra**2
        c = rho * sig2 / v
        var = sig2 * extra**2 / v
        expected = -(c / var) * model.H.T @ model.H
        mech = NoiseRecyclingMechanism(rho=rho, extra=extra)
        est = admissibility_cross_term(mech, model, 400_000, seed=301)
        assert np.all(np.abs(est.value - expected) <= 5.0 * est.stderr)

    def test_recycling_is_not_a_channel(self, model):
        mech = NoiseRecyclingMechanism(rho=0.5, extra=0.2)
        with pytest.raises(UnsupportedFamilyError):
            mech.sample(np.zeros(3), np.random.default_rng(0))
        with pytest.raises(UnsupportedFamilyError):
            mech.conditional_score_y(np.zeros(3), np.zeros(3))

    def test_twin_uniform_not_auditable(self, model):
        region = (np.full(3, 1.0), np.full(3, 2.0))
        mech = calibrate_twin_uniform_multiplicative(model, 9.0, region)
        with pytest.raises(UnsupportedFamilyError):
            admissibility_cross_term(mech, model, 100, seed=0)


class TestCertificates:
    def test_affine_pushforward_route_agrees(self, model):
        # certificate audit = A^T I_d A straight from the noise Fisher
        mech = calibrate_laplace_data_perturbation(model, 2.0)
        direct = fisher_of_noise(mech.noise).matrix
        assert np.allclose(certified_information(mech, model), direct)
