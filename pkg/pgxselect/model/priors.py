"""Sparsity priors on SNP effects.

Every prior is scaled by the current inter-individual SD of clearance, so
the induced distribution of beta / omega_CL does not depend on omega_CL.
The module has two layers: plain functions for each prior's density and
effect map, and ``GeneticPrior`` classes that lay the latents out in the
unconstrained space used by the sampler.
"""

from abc import ABC, abstractmethod
from typing import Any, NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
import numpyro.distributions as dist
from jax import Array
from jax.scipy.special import betaln
from numpy.typing import NDArray
from scipy.special import expit, logit
from scipy.stats import norm

from pgxselect.model.space import Block, Transform, log_stick_breaking_weights
from pgxselect.schemas.prior_schema import (
    R2D2,
    HierLasso,
    L1Ball,
    PriorSpec,
    RegHorseshoe,
    SpikeSlab,
)

# --------------------------------------------------------------------------
# Spike-and-Slab
# --------------------------------------------------------------------------


def _spike_slab_mixture(
    beta: Any, log_gamma: Any, log1m_gamma: Any, spec: SpikeSlab, omega_cl: Any
) -> Array:
    spike = dist.Normal(0.0, omega_cl * spec.sigma_spike).log_prob(beta) + log1m_gamma
    slab = dist.Normal(0.0, omega_cl * spec.sigma_slab).log_prob(beta) + log_gamma
    return jnp.sum(jnp.logaddexp(spike, slab))


def spike_slab_logprior(beta: Any, gamma: Any, spec: SpikeSlab, omega_cl: Any) -> Array:
    """Marginal spike-and-slab log-density of beta plus the Beta prior on gamma.

    Args:
        beta: Effects, shape (p,)
        gamma: Inclusion probability in (0, 1)
        spec: Prior hyperparameters
        omega_cl: Clearance inter-individual SD scaling both components

    Returns:
        Scalar log-density
    """
    gamma = jnp.asarray(gamma)
    mixture = _spike_slab_mixture(
        jnp.asarray(beta), jnp.log(gamma), jnp.log1p(-gamma), spec, omega_cl
    )
    return mixture + dist.Beta(spec.gamma_a, spec.gamma_b).log_prob(gamma)


def spike_slab_pip(
    beta_j: Any, gamma: Any, spec: SpikeSlab, omega_cl: Any = 1.0
) -> NDArray[np.float64]:
    """Conditional probability that beta_j came from the slab.

    Broadcasts over draws; evaluated as a logistic of the log density ratio.
    """
    beta_j = np.asarray(beta_j, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    omega_cl = np.asarray(omega_cl, dtype=float)
    log_slab = np.log(gamma) + norm.logpdf(beta_j, scale=omega_cl * spec.sigma_slab)
    spike_sd = omega_cl * spec.sigma_spike
    log_spike = np.log1p(-gamma) + norm.logpdf(beta_j, scale=spike_sd)
    return np.asarray(expit(log_slab - log_spike))


# --------------------------------------------------------------------------
# l1-ball
# --------------------------------------------------------------------------


def l1_ball_project(xi: Any, r: Any) -> Array:
    """Euclidean projection onto the l1 ball of radius r.

    Works on the last axis, so a batch of vectors (n, p) with radii (n,)
    is projected in one call. Coordinates at or below the threshold are set
    to exactly zero; their derivative is zero as well.
    """
    xi = jnp.asarray(xi)
    r = jnp.asarray(r)
    magnitude = jnp.abs(xi)
    ordered = -jnp.sort(-magnitude, axis=-1)
    cumulative = jnp.cumsum(ordered, axis=-1)
    rank = jnp.arange(1, xi.shape[-1] + 1)
    active = ordered - (cumulative - r[..., None]) / rank > 0
    count = jnp.maximum(jnp.sum(active, axis=-1), 1)
    reached = jnp.take_along_axis(cumulative, (count - 1)[..., None], axis=-1)[..., 0]
    threshold = jnp.maximum((reached - r) / count, 0.0)
    shrunk = jnp.where(
        magnitude > threshold[..., None], magnitude - threshold[..., None], 0.0
    )
    return jnp.sign(xi) * shrunk


def l1_ball_logprior(
    xi: Any,
    r: Any,
    spec: L1Ball,
    omega_cl: Any,
    include_jacobian: bool = True,
) -> Array:
    """Laplace density of the latent vector and Exponential density of the radius.

    Args:
        xi: Latent vector, Laplace(0, b_xi * omega_cl)
        r: Radius, Exponential(rate = lambda_r / omega_cl)
        spec: Prior hyperparameters
        omega_cl: Clearance inter-individual SD
        include_jacobian: Add log r for a radius sampled on the log scale

    Returns:
        Scalar log-density
    """
    r = jnp.asarray(r)
    value = jnp.sum(dist.Laplace(0.0, spec.b_xi * omega_cl).log_prob(jnp.asarray(xi)))
    value = value + jnp.sum(dist.Exponential(spec.lambda_r / omega_cl).log_prob(r))
    if include_jacobian:
        value = value + jnp.sum(jnp.log(r))
    return value


# --------------------------------------------------------------------------
# Hierarchical Lasso
# --------------------------------------------------------------------------


def hier_lasso_beta(
    z: Any, lam: Any, tau_raw: Any, spec: HierLasso, omega_cl: Any
) -> Array:
    """beta_j = z_j * lambda_j * tau0 * tau_raw * omega_cl."""
    return jnp.asarray(z) * jnp.asarray(lam) * (spec.tau0 * tau_raw * omega_cl)


def hier_lasso_logprior(z: Any, lam: Any, tau_raw: Any, spec: HierLasso) -> Array:
    return (
        jnp.sum(dist.Normal(0.0, 1.0).log_prob(z))
        + jnp.sum(dist.Exponential(spec.rho).log_prob(lam))
        + jnp.sum(dist.HalfNormal(1.0).log_prob(tau_raw))
    )


# --------------------------------------------------------------------------
# Regularized Horseshoe
# --------------------------------------------------------------------------


class HorseshoeLatents(NamedTuple):
    """Normal x inverse-gamma decomposition of the half-t scales."""

    z: Any
    r1_local: Any
    r2_local: Any
    r1_global: Any
    r2_global: Any
    caux: Any


def regularized_local_scale_sq(lam: Any, tau: Any, c: Any) -> Array:
    """Slab-regularized squared local scale c^2 lambda^2 / (c^2 + tau^2 lambda^2)."""
    lam_sq = jnp.square(lam)
    c_sq = jnp.square(c)
    return c_sq * lam_sq / (c_sq + jnp.square(tau) * lam_sq)


def horseshoe_scales(
    latents: HorseshoeLatents, spec: RegHorseshoe, omega_cl: Any
) -> tuple[Array, Array, Array]:
    """Global scale tau, slab width c and local scales lambda."""
    tau = latents.r1_global * jnp.sqrt(latents.r2_global) * spec.tau0 * omega_cl
    c = spec.slab_sd * jnp.sqrt(latents.caux) * omega_cl
    lam = latents.r1_local * jnp.sqrt(latents.r2_local)
    return tau, c, lam


def reg_horseshoe_beta(
    latents: HorseshoeLatents, spec: RegHorseshoe, omega_cl: Any
) -> Array:
    tau, c, lam = horseshoe_scales(latents, spec, omega_cl)
    lam_tilde = jnp.sqrt(regularized_local_scale_sq(lam, tau, c))
    return jnp.asarray(latents.z) * lam_tilde * tau


def reg_horseshoe_logprior(latents: HorseshoeLatents, spec: RegHorseshoe) -> Array:
    std_normal = dist.Normal(0.0, 1.0)
    half_nu_local = spec.nu_local / 2.0
    half_nu_global = spec.nu_global / 2.0
    half_nu_slab = spec.nu_slab / 2.0
    return (
        jnp.sum(std_normal.log_prob(latents.z))
        + jnp.sum(std_normal.log_prob(latents.r1_local))
        + jnp.sum(
            dist.InverseGamma(half_nu_local, half_nu_local).log_prob(latents.r2_local)
        )
        + jnp.sum(std_normal.log_prob(latents.r1_global))
        + jnp.sum(
            dist.InverseGamma(half_nu_global, half_nu_global).log_prob(
                latents.r2_global
            )
        )
        + jnp.sum(dist.InverseGamma(half_nu_slab, half_nu_slab).log_prob(latents.caux))
    )


# --------------------------------------------------------------------------
# R2-D2
# --------------------------------------------------------------------------


def stick_breaking_shapes(
    alpha: float, p: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Beta shapes of the p-1 stick fractions giving Dirichlet(alpha/p, ...)."""
    concentration = alpha / p
    k = np.arange(p - 1)
    return np.full(p - 1, concentration), concentration * (p - 1 - k)


def stick_breaking_weights(v: Any) -> Array:
    """Simplex weights from stick fractions along the last axis."""
    v = jnp.asarray(v)
    if v.shape[-1] == 0:
        return jnp.ones(v.shape[:-1] + (1,))
    rest = jnp.cumprod(1.0 - v, axis=-1)
    lead = jnp.concatenate([v[..., :1], v[..., 1:] * rest[..., :-1]], axis=-1)
    return jnp.concatenate([lead, rest[..., -1:]], axis=-1)


def r2d2_beta(sticks: Any, z: Any, r2: Any, spec: R2D2, omega_cl: Any) -> Array:
    """beta_j = sqrt(tau^2 phi_j) z_j with tau^2 = R2 / (1 - R2) * omega_cl^2."""
    del spec  # shapes only enter the density
    weights = stick_breaking_weights(sticks)
    tau_sq = r2 / (1.0 - r2) * jnp.square(omega_cl)
    return jnp.sqrt(tau_sq * weights) * jnp.asarray(z)


def r2d2_logprior(sticks: Any, z: Any, r2: Any, spec: R2D2) -> Array:
    sticks = jnp.asarray(sticks)
    p = sticks.shape[-1] + 1
    shape_a, shape_b = stick_breaking_shapes(spec.alpha, p)
    return (
        dist.Beta(spec.a, spec.b).log_prob(r2)
        + jnp.sum(dist.Beta(shape_a, shape_b).log_prob(sticks))
        + jnp.sum(dist.Normal(0.0, 1.0).log_prob(z))
    )


# --------------------------------------------------------------------------
# Unconstrained-space priors used by the posterior
# --------------------------------------------------------------------------


def _beta_logpdf_from_logit(x: Any, a: Any, b: Any) -> Array:
    # Beta density of sigmoid(x) without forming 1 - v
    return (
        (a - 1.0) * jax.nn.log_sigmoid(x)
        + (b - 1.0) * jax.nn.log_sigmoid(-x)
        - betaln(a, b)
    )


class GeneticPrior(ABC):
    """Latent layout, log-density and effect map of one sparsity prior.

    Densities exclude transform Jacobians; ``ModelSpace`` adds those.
    """

    def __init__(self, spec: PriorSpec, n_snps: int):
        self.spec = spec
        self.n_snps = n_snps

    @property
    def name(self) -> str:
        return self.spec.name

    @abstractmethod
    def blocks(self) -> list[Block]:
        """Unconstrained blocks owned by this prior."""

    @abstractmethod
    def log_density(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        """Log prior of the latents on their constrained scale."""

    @abstractmethod
    def effects(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        """SNP effects on log clearance."""

    def derived(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> dict[str, Array]:
        """Scalar summaries worth keeping in the draws."""
        del raw, values, omega_cl
        return {}


class SpikeSlabPrior(GeneticPrior):
    spec: SpikeSlab

    def blocks(self) -> list[Block]:
        mean = self.spec.gamma_a / (self.spec.gamma_a + self.spec.gamma_b)
        return [
            Block("beta", self.n_snps, Transform.IDENTITY, 0.0, 0.01),
            Block("gamma", 1, Transform.LOGISTIC, float(logit(mean)), 0.5),
        ]

    def log_density(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        x = raw["gamma"][0]
        return _spike_slab_mixture(
            values["beta"],
            jax.nn.log_sigmoid(x),
            jax.nn.log_sigmoid(-x),
            self.spec,
            omega_cl,
        ) + _beta_logpdf_from_logit(x, self.spec.gamma_a, self.spec.gamma_b)

    def effects(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        return values["beta"]


class L1BallPrior(GeneticPrior):
    spec: L1Ball

    def blocks(self) -> list[Block]:
        return [
            Block("xi", self.n_snps, Transform.IDENTITY, 0.0, 0.1),
            Block("r", 1, Transform.EXP, float(np.log(0.3 / self.spec.lambda_r)), 0.5),
        ]

    def log_density(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        return l1_ball_logprior(
            values["xi"], values["r"][0], self.spec, omega_cl, include_jacobian=False
        )

    def effects(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        return l1_ball_project(values["xi"], values["r"][0])


class HierLassoPrior(GeneticPrior):
    spec: HierLasso

    def blocks(self) -> list[Block]:
        log_mean_lambda = -float(np.log(self.spec.rho))
        return [
            Block("z", self.n_snps, Transform.IDENTITY, 0.0, 0.5),
            Block("lambda", self.n_snps, Transform.EXP, log_mean_lambda, 0.5),
            Block("tau_raw", 1, Transform.EXP, 0.0, 0.5),
        ]

    def log_density(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        return hier_lasso_logprior(
            values["z"], values["lambda"], values["tau_raw"][0], self.spec
        )

    def effects(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        return hier_lasso_beta(
            values["z"], values["lambda"], values["tau_raw"][0], self.spec, omega_cl
        )

    def derived(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> dict[str, Array]:
        return {"tau": self.spec.tau0 * values["tau_raw"][0] * omega_cl}


class RegHorseshoePrior(GeneticPrior):
    spec: RegHorseshoe

    def blocks(self) -> list[Block]:
        p = self.n_snps
        return [
            Block("z", p, Transform.IDENTITY, 0.0, 0.5),
            Block("r1_local", p, Transform.IDENTITY, 0.0, 0.5),
            Block("r2_local", p, Transform.EXP, 0.0, 0.5),
            Block("r1_global", 1, Transform.IDENTITY, 1.0, 0.5),
            Block("r2_global", 1, Transform.EXP, 0.0, 0.5),
            Block("caux", 1, Transform.EXP, 0.0, 0.5),
        ]

    def _latents(self, values: dict[str, Array]) -> HorseshoeLatents:
        return HorseshoeLatents(
            z=values["z"],
            r1_local=values["r1_local"],
            r2_local=values["r2_local"],
            r1_global=values["r1_global"][0],
            r2_global=values["r2_global"][0],
            caux=values["caux"][0],
        )

    def log_density(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        return reg_horseshoe_logprior(self._latents(values), self.spec)

    def effects(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        return reg_horseshoe_beta(self._latents(values), self.spec, omega_cl)

    def derived(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> dict[str, Array]:
        tau, c, _ = horseshoe_scales(self._latents(values), self.spec, omega_cl)
        return {"tau": tau, "c": c}


class R2D2Prior(GeneticPrior):
    spec: R2D2

    def blocks(self) -> list[Block]:
        p = self.n_snps
        stick_means = 1.0 / (p - np.arange(p - 1))
        r2_mean = self.spec.a / (self.spec.a + self.spec.b)
        return [
            Block("z", p, Transform.IDENTITY, 0.0, 0.5),
            Block(
                "phi", p - 1, Transform.STICK_BREAKING, tuple(logit(stick_means)), 0.5
            ),
            Block("r2", 1, Transform.LOGISTIC, float(logit(r2_mean)), 0.5),
        ]

    def log_density(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        shape_a, shape_b = stick_breaking_shapes(self.spec.alpha, self.n_snps)
        return (
            jnp.sum(dist.Normal(0.0, 1.0).log_prob(values["z"]))
            + jnp.sum(_beta_logpdf_from_logit(raw["phi"], shape_a, shape_b))
            + _beta_logpdf_from_logit(raw["r2"][0], self.spec.a, self.spec.b)
        )

    def effects(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> Array:
        # log tau^2 = logit(R2) + 2 log omega; stays finite for any logits
        log_weights = log_stick_breaking_weights(raw["phi"])
        scale = jnp.exp(0.5 * (raw["r2"][0] + log_weights)) * omega_cl
        return scale * values["z"]

    def derived(
        self, raw: dict[str, Array], values: dict[str, Array], omega_cl: Array
    ) -> dict[str, Array]:
        return {"tau": jnp.exp(0.5 * raw["r2"][0]) * omega_cl}


_PRIOR_IMPLEMENTATIONS: dict[str, type[GeneticPrior]] = {
    "spike_slab": SpikeSlabPrior,
    "l1_ball": L1BallPrior,
    "hier_lasso": HierLassoPrior,
    "reg_horseshoe": RegHorseshoePrior,
    "r2d2": R2D2Prior,
}


def build_genetic_prior(spec: PriorSpec, n_snps: int) -> GeneticPrior:
    """Instantiate the unconstrained-space prior for ``spec``."""
    return _PRIOR_IMPLEMENTATIONS[spec.name](spec, n_snps)
