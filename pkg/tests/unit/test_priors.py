"""Unit tests for the sparsity priors."""

import math

import jax
import jax.numpy as jnp
import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import beta as beta_dist
from scipy.stats import ks_2samp, norm

from pgxselect.calibration import sample_prior_effects
from pgxselect.model.priors import (
    HorseshoeLatents,
    build_genetic_prior,
    hier_lasso_beta,
    hier_lasso_logprior,
    l1_ball_logprior,
    l1_ball_project,
    r2d2_beta,
    r2d2_logprior,
    reg_horseshoe_beta,
    reg_horseshoe_logprior,
    regularized_local_scale_sq,
    spike_slab_logprior,
    spike_slab_pip,
    stick_breaking_shapes,
    stick_breaking_weights,
)
from pgxselect.model.space import ModelSpace
from pgxselect.schemas.prior_schema import (
    PRIOR_CLASSES,
    R2D2,
    HierLasso,
    L1Ball,
    RegHorseshoe,
    SpikeSlab,
)


def bisection_projection(xi: np.ndarray, r: float) -> np.ndarray:
    """Projection oracle: soft-threshold at the delta solving sum = r."""
    if np.abs(xi).sum() <= r:
        return xi.copy()

    def excess(delta: float) -> float:
        return float(np.maximum(np.abs(xi) - delta, 0.0).sum() - r)

    delta = brentq(excess, 0.0, float(np.abs(xi).max()), xtol=1e-15, rtol=1e-15)
    return np.sign(xi) * np.maximum(np.abs(xi) - delta, 0.0)


class TestSpikeSlab:
    """Tests for the spike-and-slab density and inclusion probability."""

    def test_equal_components_collapse_to_one_gaussian(self) -> None:
        """With equal SDs the mixture is a single Gaussian whatever gamma is."""
        spec = SpikeSlab.model_construct(
            sigma_spike=0.5, sigma_slab=0.5, gamma_a=2.0, gamma_b=70.0
        )
        beta = jnp.array([0.3, -0.1])
        for gamma in (0.1, 0.7):
            value = spike_slab_logprior(beta, gamma, spec, 1.0)
            beta_prior = beta_dist.logpdf(gamma, 2.0, 70.0)
            expected = norm.logpdf([0.3, -0.1], scale=0.5).sum() + beta_prior
            assert float(value) == pytest.approx(float(expected), rel=1e-12)

    def test_density_at_zero(self) -> None:
        """beta = 0, gamma = 0.5 matches the direct mixture density."""
        spec = SpikeSlab(sigma_spike=0.1, sigma_slab=1.0, gamma_a=1.0, gamma_b=1.0)
        value = spike_slab_logprior(jnp.array([0.0]), 0.5, spec, 1.0)
        expected = math.log(0.5 * norm.pdf(0, scale=1.0) + 0.5 * norm.pdf(0, scale=0.1))
        assert float(value) == pytest.approx(expected, rel=1e-12)

    def test_log_sum_exp_matches_naive_sum(self) -> None:
        """Moderate effects give the same value as summing densities directly."""
        spec = SpikeSlab(sigma_spike=0.1, sigma_slab=1.0, gamma_a=1.0, gamma_b=1.0)
        beta = np.array([0.05, -0.4, 0.9])
        value = spike_slab_logprior(jnp.asarray(beta), 0.3, spec, 1.0)
        mixture = 0.3 * norm.pdf(beta, scale=1.0) + 0.7 * norm.pdf(beta, scale=0.1)
        naive = np.log(mixture)
        assert float(value) == pytest.approx(float(naive.sum()), rel=1e-12)

    def test_pip_at_zero(self) -> None:
        """Density-ratio oracle at beta = 0."""
        spec = SpikeSlab(sigma_spike=0.1, sigma_slab=1.0)
        assert float(spike_slab_pip(0.0, 0.5, spec)) == pytest.approx(0.0909, abs=1e-4)

    def test_pip_equals_gamma_for_equal_components(self) -> None:
        """Equal densities leave the prior inclusion probability."""
        spec = SpikeSlab.model_construct(sigma_spike=0.3, sigma_slab=0.3)
        pips = spike_slab_pip(np.array([-1.0, 0.0, 2.0]), 0.25, spec)
        np.testing.assert_allclose(pips, 0.25)

    def test_pip_grows_to_one(self) -> None:
        """Larger effects are ever more likely to come from the slab."""
        spec = SpikeSlab(sigma_spike=0.1, sigma_slab=1.0)
        pips = spike_slab_pip(np.linspace(0.0, 3.0, 31), 0.5, spec)
        assert np.all(np.diff(pips) >= 0)
        assert pips[-1] > 0.999999

    @pytest.mark.parametrize("gamma", [0.01, 0.2, 0.5, 0.9])
    def test_pip_monotone_in_absolute_effect(self, gamma: float) -> None:
        """The slab probability rises with |beta| on both sides of zero."""
        spec = SpikeSlab(sigma_spike=0.05, sigma_slab=0.5)
        magnitudes = np.linspace(0.0, 2.0, 81)
        for sign in (1.0, -1.0):
            pips = spike_slab_pip(sign * magnitudes, gamma, spec, 0.3)
            assert np.all(np.diff(pips) >= 0)
            assert pips[0] < gamma < pips[-1]

    def test_pip_monotone_in_gamma(self) -> None:
        spec = SpikeSlab(sigma_spike=0.05, sigma_slab=0.5)
        pips = spike_slab_pip(0.03, np.linspace(0.01, 0.99, 50), spec, 0.3)
        assert np.all(np.diff(pips) > 0)


class TestL1BallProjection:
    """Tests for l1_ball_project."""

    def test_inside_ball_is_identity(self) -> None:
        np.testing.assert_allclose(
            l1_ball_project(jnp.array([0.5, -0.2]), 1.0), [0.5, -0.2]
        )

    @pytest.mark.parametrize(
        ("xi", "r", "expected"),
        [([3.0, 1.0], 2.0, [2.0, 0.0]), ([1.0, 1.0, 1.0], 1.5, [0.5, 0.5, 0.5])],
    )
    def test_known_projections(
        self, xi: list[float], r: float, expected: list[float]
    ) -> None:
        """Hand-checked projections."""
        np.testing.assert_allclose(
            l1_ball_project(jnp.array(xi), r), expected, atol=1e-14
        )

    def test_matches_bisection_oracle(self, rng: np.random.Generator) -> None:
        """Random instances agree with the bisection oracle and stay in the ball."""
        for _ in range(1000):
            xi = rng.normal(size=20) * rng.uniform(0.1, 3.0)
            r = rng.uniform(0.0, 1.2 * np.abs(xi).sum())
            projected = np.asarray(l1_ball_project(jnp.asarray(xi), r))
            np.testing.assert_allclose(
                projected, bisection_projection(xi, r), atol=1e-10
            )
            assert np.abs(projected).sum() <= r + 1e-12

    def test_idempotent(self, rng: np.random.Generator) -> None:
        xi = rng.normal(size=15)
        once = l1_ball_project(jnp.asarray(xi), 2.0)
        twice = l1_ball_project(once, 2.0)
        np.testing.assert_allclose(twice, once, atol=1e-14)

    def test_zero_count_decreases_with_radius(self, rng: np.random.Generator) -> None:
        """A larger ball never zeroes more coordinates."""
        xi = jnp.asarray(rng.normal(size=30))
        radii = np.linspace(0.1, 20, 40)
        zeros = [int(jnp.sum(l1_ball_project(xi, r) == 0)) for r in radii]
        assert all(a >= b for a, b in zip(zeros, zeros[1:], strict=False))

    def test_batched_projection(self, rng: np.random.Generator) -> None:
        """Rows project independently with their own radius."""
        xi = rng.normal(size=(4, 6))
        radii = np.array([0.5, 1.0, 2.0, 100.0])
        batched = np.asarray(l1_ball_project(jnp.asarray(xi), jnp.asarray(radii)))
        for row, r, result in zip(xi, radii, batched, strict=True):
            np.testing.assert_allclose(result, bisection_projection(row, r), atol=1e-10)


class TestL1BallLogprior:
    """Tests for l1_ball_logprior."""

    def test_density_at_origin(self) -> None:
        """xi = 0, r = 1 gives the Laplace and Exponential normalizers."""
        spec = L1Ball(b_xi=0.3, lambda_r=1.6)
        omega = 0.3
        b_eff, rate = 0.3 * omega, 1.6 / omega
        value = l1_ball_logprior(jnp.zeros(5), 1.0, spec, omega, include_jacobian=False)
        expected = 5 * math.log(1 / (2 * b_eff)) + math.log(rate) - rate
        assert float(value) == pytest.approx(expected, rel=1e-12)

    def test_symmetric_in_xi(self, rng: np.random.Generator) -> None:
        xi = jnp.asarray(rng.normal(size=8))
        spec = L1Ball()
        assert float(l1_ball_logprior(xi, 0.7, spec, 0.3)) == pytest.approx(
            float(l1_ball_logprior(-xi, 0.7, spec, 0.3))
        )


class TestHierLasso:
    """Tests for the hierarchical Lasso effect map."""

    def test_zero_latent_gives_zero(self) -> None:
        beta = hier_lasso_beta(jnp.zeros(3), jnp.ones(3), 1.0, HierLasso(), 0.3)
        np.testing.assert_array_equal(beta, 0.0)

    def test_unit_latents(self) -> None:
        """z = lambda = tau_raw = 1 gives tau0 * omega."""
        beta = hier_lasso_beta(jnp.ones(1), jnp.ones(1), 1.0, HierLasso(tau0=0.35), 0.3)
        assert float(beta[0]) == pytest.approx(0.105)

    def test_marginal_variance(self, rng: np.random.Generator) -> None:
        """Var(beta) = omega^2 tau0^2 E[tau_raw^2] E[lambda^2]."""
        spec = HierLasso(tau0=0.35, rho=2.0)
        n = 1_000_000
        z = rng.standard_normal(n)
        lam = rng.exponential(1 / spec.rho, n)
        tau_raw = np.abs(rng.standard_normal(n))
        beta = np.asarray(hier_lasso_beta(z, lam, tau_raw, spec, 0.3))
        expected = 0.3**2 * spec.tau0**2 * 1.0 * 2 / spec.rho**2
        assert beta.var() == pytest.approx(expected, rel=0.02)


class TestRegHorseshoe:
    """Tests for the regularized horseshoe."""

    def test_unit_scales(self) -> None:
        assert float(regularized_local_scale_sq(1.0, 1.0, 1.0)) == pytest.approx(0.5)

    def test_classical_limit(self) -> None:
        """Small tau * lambda leaves lambda unchanged."""
        lam_sq = regularized_local_scale_sq(2.0, 1e-6, 1.0)
        assert float(lam_sq) == pytest.approx(4.0, rel=1e-9)

    def test_slab_cap(self) -> None:
        """Large tau * lambda caps the effective scale at c."""
        lam_sq = regularized_local_scale_sq(1e6, 1.0, 0.7)
        assert math.sqrt(float(lam_sq)) == pytest.approx(0.7, rel=1e-6)

    def test_effects_scale_with_omega(self) -> None:
        """Doubling omega doubles every effect."""
        latents = HorseshoeLatents(
            z=jnp.array([0.5, -1.0]),
            r1_local=jnp.array([1.0, 2.0]),
            r2_local=jnp.array([1.0, 0.5]),
            r1_global=1.0,
            r2_global=1.0,
            caux=1.0,
        )
        spec = RegHorseshoe()
        small = reg_horseshoe_beta(latents, spec, 0.3)
        large = reg_horseshoe_beta(latents, spec, 0.6)
        np.testing.assert_allclose(large, 2 * small, rtol=1e-12)


class TestStickBreaking:
    """Tests for the R2-D2 simplex construction."""

    def test_weights_form_a_simplex(self, rng: np.random.Generator) -> None:
        weights = np.asarray(stick_breaking_weights(rng.uniform(size=(50, 9))))
        assert np.all(weights >= 0)
        np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-12)

    def test_two_components(self) -> None:
        """p = 2 gives (v, 1 - v) with symmetric Beta(alpha/2, alpha/2) shapes."""
        np.testing.assert_allclose(stick_breaking_weights(jnp.array([0.3])), [0.3, 0.7])
        shape_a, shape_b = stick_breaking_shapes(4.0, 2)
        np.testing.assert_allclose(shape_a, [2.0])
        np.testing.assert_allclose(shape_b, [2.0])

    def test_dirichlet_moments(self, rng: np.random.Generator) -> None:
        """Stick-breaking draws reproduce symmetric Dirichlet moments."""
        p, alpha = 10, 4.0
        shape_a, shape_b = stick_breaking_shapes(alpha, p)
        sticks = rng.beta(shape_a, shape_b, size=(400_000, p - 1))
        weights = np.asarray(stick_breaking_weights(sticks))
        expected_var = (1 / p) * (1 - 1 / p) / (alpha + 1)
        np.testing.assert_allclose(weights.mean(axis=0), 1 / p, rtol=0.01)
        np.testing.assert_allclose(weights.var(axis=0), expected_var, rtol=0.02)


class TestGeneticPriorLayouts:
    """Tests for the unconstrained-space prior classes."""

    @pytest.mark.parametrize("name", sorted(PRIOR_CLASSES))
    def test_density_and_effects_are_finite(
        self, name: str, rng: np.random.Generator
    ) -> None:
        """Every prior gives finite log-densities and p effects at its start region."""
        prior = build_genetic_prior(PRIOR_CLASSES[name](), 7)
        space = ModelSpace(prior.blocks())
        raw = space.unpack(jnp.asarray(space.initial_position(rng)))
        values = space.constrain(raw)
        log_density = prior.log_density(raw, values, jnp.asarray(0.3))
        effects = prior.effects(raw, values, jnp.asarray(0.3))
        assert np.isfinite(float(log_density))
        assert effects.shape == (7,)
        assert np.all(np.isfinite(np.asarray(effects)))

    def test_r2d2_effects_match_stick_breaking_map(
        self, rng: np.random.Generator
    ) -> None:
        """The log-space effect map equals sqrt(tau^2 phi) z."""
        spec = R2D2()
        prior = build_genetic_prior(spec, 5)
        space = ModelSpace(prior.blocks())
        raw = space.unpack(jnp.asarray(space.initial_position(rng)))
        values = space.constrain(raw)
        sticks = jax.nn.sigmoid(raw["phi"])
        direct = r2d2_beta(sticks, values["z"], values["r2"][0], spec, 0.3)
        np.testing.assert_allclose(
            prior.effects(raw, values, jnp.asarray(0.3)), direct, rtol=1e-10
        )


class TestScaleInvariance:
    """beta / omega_CL has the same prior law at every omega_CL."""

    @pytest.mark.parametrize("name", sorted(PRIOR_CLASSES))
    def test_same_stream_scales_exactly(self, name: str) -> None:
        spec = PRIOR_CLASSES[name]()
        small = sample_prior_effects(spec, 500, 6, 0.3, np.random.default_rng(11))
        large = sample_prior_effects(spec, 500, 6, 0.6, np.random.default_rng(11))
        np.testing.assert_allclose(
            small.beta / 0.3, large.beta / 0.6, rtol=1e-10, atol=1e-12
        )

    @pytest.mark.parametrize("name", sorted(PRIOR_CLASSES))
    def test_two_sample_scaled_effects(self, name: str) -> None:
        """Independent draws at two omegas pass a two-sample KS test."""
        spec = PRIOR_CLASSES[name]()
        small = sample_prior_effects(spec, 20_000, 6, 0.3, np.random.default_rng(1))
        large = sample_prior_effects(spec, 20_000, 6, 0.6, np.random.default_rng(2))
        result = ks_2samp(small.beta[:, 0] / 0.3, large.beta[:, 0] / 0.6)
        assert result.pvalue > 0.001


class TestLatentTails:
    """Log-densities fall to -inf along every Gaussian or Laplace latent."""

    STEPS = np.array([1.0, 10.0, 100.0, 1000.0])

    @staticmethod
    def assert_falls_away(values: list[float]) -> None:
        assert all(np.isfinite(values[:1]))
        assert all(a > b for a, b in zip(values, values[1:], strict=False))
        assert values[-1] < -1e4

    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_spike_slab_effect(self, sign: float) -> None:
        spec = SpikeSlab()
        values = [
            float(spike_slab_logprior(jnp.array([sign * t, 0.0]), 0.3, spec, 0.3))
            for t in self.STEPS
        ]
        self.assert_falls_away(values)

    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_l1_ball_latent(self, sign: float) -> None:
        spec = L1Ball()
        values = [
            float(l1_ball_logprior(jnp.array([0.0, sign * t]), 1.0, spec, 0.3))
            for t in self.STEPS
        ]
        self.assert_falls_away(values)

    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_hier_lasso_latent(self, sign: float) -> None:
        spec = HierLasso()
        values = [
            float(
                hier_lasso_logprior(jnp.array([sign * t, 0.0]), jnp.ones(2), 1.0, spec)
            )
            for t in self.STEPS
        ]
        self.assert_falls_away(values)

    @pytest.mark.parametrize("field", ["z", "r1_local"])
    def test_horseshoe_latents(self, field: str) -> None:
        spec = RegHorseshoe()
        values = []
        for t in self.STEPS:
            latents = HorseshoeLatents(
                z=jnp.zeros(2),
                r1_local=jnp.ones(2),
                r2_local=jnp.ones(2),
                r1_global=1.0,
                r2_global=1.0,
                caux=1.0,
            )
            latents = latents._replace(**{field: jnp.array([t, 0.0])})
            values.append(float(reg_horseshoe_logprior(latents, spec)))
        self.assert_falls_away(values)

    def test_horseshoe_global_latent(self) -> None:
        spec = RegHorseshoe()
        values = [
            float(
                reg_horseshoe_logprior(
                    HorseshoeLatents(
                        z=jnp.zeros(2),
                        r1_local=jnp.ones(2),
                        r2_local=jnp.ones(2),
                        r1_global=-t,
                        r2_global=1.0,
                        caux=1.0,
                    ),
                    spec,
                )
            )
            for t in self.STEPS
        ]
        self.assert_falls_away(values)

    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_r2d2_latent(self, sign: float) -> None:
        spec = R2D2()
        sticks = jnp.full(2, 0.4)
        values = [
            float(r2d2_logprior(sticks, jnp.array([0.0, sign * t, 0.0]), 0.3, spec))
            for t in self.STEPS
        ]
        self.assert_falls_away(values)
