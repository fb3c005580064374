"""Unit tests for prior calibration."""

import logging
import math

import numpy as np
import pytest

from pgxselect.calibration import (
    MIN_PRIOR_DRAWS,
    calibrate_global_scale,
    calibrate_sparsity,
    effective_model_size,
    expected_effective_size,
    gaussian_two_sided_tail,
    hier_lasso_tail_proxy,
    l1ball_active_tail,
    l1ball_expected_k,
    prior_mc_summary,
    sample_prior_effects,
    shrinkage_kappa,
    ss_expected_k,
)
from pgxselect.exceptions import DomainError, InfeasibleTargetError
from pgxselect.schemas.prior_schema import (
    R2D2,
    HierLasso,
    L1Ball,
    RegHorseshoe,
    SpikeSlab,
)
from pgxselect.schemas.run_schema import CalibrationTarget


@pytest.fixture
def target() -> CalibrationTarget:
    return CalibrationTarget()


class TestClosedForms:
    """Tests for the closed-form sparsity and tail expressions."""

    def test_spike_slab_expected_size(self) -> None:
        assert ss_expected_k(134, 1.0, 30.0) == pytest.approx(4.3226, abs=1e-4)
        assert ss_expected_k(134, 2.0, 70.0) == pytest.approx(3.7222, abs=1e-4)
        assert ss_expected_k(10, 1.0, 1.0) == 5.0

    def test_spike_slab_rejects_nonpositive_shapes(self) -> None:
        with pytest.raises(DomainError):
            ss_expected_k(10, 0.0, 1.0)

    def test_gaussian_tail(self) -> None:
        assert gaussian_two_sided_tail(0.13, 0.1) == pytest.approx(0.1936, abs=1e-4)
        assert gaussian_two_sided_tail(0.0, 0.1) == 1.0
        assert gaussian_two_sided_tail(0.7, 0.7) == pytest.approx(0.31731, abs=1e-5)
        with pytest.raises(DomainError):
            gaussian_two_sided_tail(0.1, 0.0)

    def test_l1_ball_expected_size(self) -> None:
        assert l1ball_expected_k(0.4, 0.5) == pytest.approx(5.0)
        assert l1ball_expected_k(1.0, 1.0) == 1.0
        assert l1ball_expected_k(1.6, 0.30) == pytest.approx(2.0833, abs=1e-4)

    def test_l1_ball_active_tail(self) -> None:
        assert l1ball_active_tail(0.0, 0.3, 0.3) == 1.0
        assert l1ball_active_tail(0.1, 0.30, 0.30) == pytest.approx(0.3292, abs=1e-4)

    def test_doubling_omega_halves_the_rate(self) -> None:
        single = math.log(l1ball_active_tail(0.1, 0.3, 0.3))
        doubled = math.log(l1ball_active_tail(0.1, 0.3, 0.6))
        assert doubled == pytest.approx(single / 2.0)

    def test_hier_lasso_proxy_is_gaussian_tail(self) -> None:
        expected = gaussian_two_sided_tail(0.13, 0.3 * 0.35 * math.sqrt(2.0) / 70.0)
        assert hier_lasso_tail_proxy(0.13, 0.35, 70.0, 0.3) == pytest.approx(expected)


class TestShrinkage:
    """Tests for shrinkage factors and effective model size."""

    def test_reference_values(self) -> None:
        assert shrinkage_kappa(1.0, 1.0, 1.0) == 0.5
        assert shrinkage_kappa(400, 0.01, 0.0) == 1.0
        assert shrinkage_kappa(400, 0.01, 1.0) == pytest.approx(0.96154, abs=1e-5)

    def test_strictly_decreasing(self) -> None:
        base = shrinkage_kappa(400, 0.01, 1.0)
        assert shrinkage_kappa(500, 0.01, 1.0) < base
        assert shrinkage_kappa(400, 0.02, 1.0) < base
        assert shrinkage_kappa(400, 0.01, 2.0) < base

    def test_broadcasts_over_local_weights(self) -> None:
        kappas = shrinkage_kappa(100, 0.1, np.array([0.0, 1.0, 3.0]))
        np.testing.assert_allclose(kappas, [1.0, 0.5, 0.25])

    def test_effective_model_size(self) -> None:
        assert effective_model_size(np.ones(10)) == 0.0
        assert effective_model_size(np.zeros(10)) == 10.0
        assert effective_model_size([0.2, 0.5, 0.9]) == pytest.approx(0.8 + 0.5 + 0.1)


class TestCalibrateGlobalScale:
    """Tests for calibrate_global_scale and calibrate_sparsity."""

    def test_hier_lasso(self, target: CalibrationTarget) -> None:
        result = calibrate_global_scale("hier_lasso", target, 70.0)
        assert result.hyperparameters["tau0"] == pytest.approx(0.4872, abs=1e-3)

    def test_classical_horseshoe(
        self, target: CalibrationTarget, caplog: pytest.LogCaptureFixture
    ) -> None:
        """Without a slab scale the classical formula is used, with a warning."""
        with caplog.at_level(logging.WARNING, logger="pgxselect.calibration"):
            result = calibrate_global_scale("reg_horseshoe", target)
        assert result.hyperparameters["tau0"] == pytest.approx(0.001938, abs=1e-6)
        assert "classical" in caplog.text

    def test_regularized_horseshoe_with_slab(self, target: CalibrationTarget) -> None:
        result = calibrate_global_scale("reg_horseshoe", target, 1.0)
        b = 1.0 / 401.0
        expected = 5.0 / ((1.0 - b) * 134 - 5.0) / 20.0
        assert result.hyperparameters["tau0"] == pytest.approx(expected)
        assert result.hyperparameters["b"] == pytest.approx(b)

    def test_narrow_slab_is_infeasible(self, target: CalibrationTarget) -> None:
        with pytest.raises(InfeasibleTargetError):
            calibrate_global_scale("reg_horseshoe", target, 0.001)

    def test_r2d2(self, target: CalibrationTarget) -> None:
        result = calibrate_global_scale("r2d2", target)
        params = result.hyperparameters
        assert params["mean_r2"] == pytest.approx(0.01282, abs=1e-5)
        assert params["a"] + params["b"] == pytest.approx(400.0)
        mean_r2 = params["a"] / (params["a"] + params["b"])
        assert mean_r2 == pytest.approx(params["mean_r2"])

    def test_r2d2_rejects_nonpositive_concentration(
        self, target: CalibrationTarget
    ) -> None:
        with pytest.raises(DomainError):
            calibrate_global_scale("r2d2", target, 0.0)

    def test_unknown_prior(self, target: CalibrationTarget) -> None:
        with pytest.raises(ValueError):
            calibrate_global_scale("spike_slab", target)  # type: ignore[arg-type]

    def test_sparsity_targets_reach_model_size(self, target: CalibrationTarget) -> None:
        ss = calibrate_sparsity("spike_slab", target).hyperparameters
        assert ss_expected_k(134, ss["gamma_a"], ss["gamma_b"]) == pytest.approx(5.0)
        l1 = calibrate_sparsity("l1_ball", target).hyperparameters
        assert l1ball_expected_k(l1["lambda_r"], l1["b_xi"]) == pytest.approx(5.0)

    @pytest.mark.parametrize("kind", ["hier_lasso", "reg_horseshoe"])
    def test_round_trip_recovers_model_size(
        self, kind: str, target: CalibrationTarget
    ) -> None:
        """Monte Carlo E[m_eff] at the returned tau0 is within 25% of the target."""
        if kind == "hier_lasso":
            result = calibrate_global_scale("hier_lasso", target, 70.0)
            tau0 = result.hyperparameters["tau0"]
            spec: HierLasso | RegHorseshoe = HierLasso(tau0=tau0, rho=70.0)
        else:
            result = calibrate_global_scale("reg_horseshoe", target)
            tau0 = result.hyperparameters["tau0"]
            spec = RegHorseshoe(tau0=tau0)
        m_eff = expected_effective_size(spec, 400, 134, n_draws=20_000, seed=3)
        assert m_eff == pytest.approx(5.0, rel=0.25)


class TestPriorMonteCarlo:
    """Tests for prior draws and the prior summary table."""

    @pytest.mark.parametrize(
        "spec", [SpikeSlab(), L1Ball(), HierLasso(), RegHorseshoe(), R2D2()]
    )
    def test_effect_draw_shapes(self, spec: object, rng: np.random.Generator) -> None:
        draws = sample_prior_effects(spec, 50, 12, 0.3, rng)  # type: ignore[arg-type]
        assert draws.beta.shape == (50, 12)
        assert np.all(np.isfinite(draws.beta))

    def test_l1_ball_draws_are_exactly_sparse(self, rng: np.random.Generator) -> None:
        draws = sample_prior_effects(L1Ball(), 200, 134, 0.3, rng)
        assert draws.active is not None
        assert np.all((draws.beta == 0) == ~draws.active)
        assert 0 < draws.active.mean() < 0.5

    def test_too_few_draws(self) -> None:
        with pytest.raises(DomainError):
            prior_mc_summary(SpikeSlab(), 0.3, MIN_PRIOR_DRAWS - 1, seed=0)

    def test_nonpositive_omega(self) -> None:
        with pytest.raises(DomainError):
            prior_mc_summary(SpikeSlab(), 0.0, MIN_PRIOR_DRAWS, seed=0)

    def test_same_seed_same_table(self) -> None:
        first = prior_mc_summary(HierLasso(), 0.3, MIN_PRIOR_DRAWS, seed=4, n_snps=10)
        second = prior_mc_summary(HierLasso(), 0.3, MIN_PRIOR_DRAWS, seed=4, n_snps=10)
        assert first == second
        assert first.effective_size.quantity == "m_eff"
        assert first.p_above_1e1_given_nonzero is None

    def test_row_flattens_effective_size(self) -> None:
        table = prior_mc_summary(L1Ball(), 0.3, MIN_PRIOR_DRAWS, seed=1, n_snps=10)
        row = table.as_row()
        assert row["prior"] == "l1_ball"
        assert "effective_mean" in row
        assert "effective_size" not in row

    @pytest.mark.parametrize(
        "spec", [SpikeSlab(), L1Ball(), HierLasso(), RegHorseshoe(), R2D2()]
    )
    def test_complementary_bands_sum_to_one(self, spec: object) -> None:
        """Bands split at the same threshold cover every coordinate."""
        n_snps = 10
        table = prior_mc_summary(
            spec, 0.3, MIN_PRIOR_DRAWS, seed=2, n_snps=n_snps  # type: ignore[arg-type]
        )
        n_values = MIN_PRIOR_DRAWS * n_snps
        p = table.p_above_1e2
        mcse = math.sqrt(p * (1 - p) / n_values)
        assert table.p_below_1e2 + p == pytest.approx(1.0, abs=3 * mcse + 1e-12)
        split = table.p_below_1e2 + table.p_between_1e2_1e1 + table.p_above_1e1
        assert split == pytest.approx(1.0, abs=3 * mcse + 1e-12)

    @pytest.mark.slow
    def test_spike_slab_reference_table(self) -> None:
        table = prior_mc_summary(SpikeSlab(), 0.3, 200_000, seed=0)
        assert table.p_below_1e3 == pytest.approx(0.972, abs=0.01)
        assert table.p_above_1e1 == pytest.approx(0.008, abs=0.004)
        assert table.p_spike_above_1e2 == pytest.approx(0.0, abs=1e-12)
        assert table.effective_size.quantity == "K"

    @pytest.mark.slow
    def test_l1_ball_reference_table(self) -> None:
        table = prior_mc_summary(L1Ball(), 0.3, 200_000, seed=0)
        assert table.p_above_1e1_given_nonzero == pytest.approx(0.311, abs=0.015)
