"""Joint log-posterior of the NLME PK model with genetic effects on clearance."""

import logging
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np
import numpyro.distributions as dist
from jax import Array
from numpy.typing import NDArray

from pgxselect.exceptions import DimensionError
from pgxselect.model.pk import log_clearance, steady_state_bateman
from pgxselect.model.priors import GeneticPrior, build_genetic_prior
from pgxselect.model.space import Block, ModelSpace, Transform
from pgxselect.schemas.dataset_schema import Dataset
from pgxselect.schemas.prior_schema import PkPriorConfig, PriorSpec
from pgxselect.simulate import standardize_snps

logger = logging.getLogger(__name__)

PK_PARAMETERS = ("ka", "cl", "v")

# Per-SNP latents that are summarized through beta instead of stored
_UNREPORTED_BLOCKS = frozenset(
    {"beta", "z", "r1_local", "r2_local", "lambda", "xi", "phi"}
)
# Scalars reported after the effects, per prior
DERIVED_KEYS: dict[str, list[str]] = {
    "hier_lasso": ["tau"],
    "reg_horseshoe": ["tau", "c"],
    "r2d2": ["tau"],
}


class PosteriorModel:
    """Log-posterior over the unconstrained position vector.

    Layout: ``mu`` (3), ``sigma`` (log), ``omega`` (3, log), optional
    ``psi_cl`` (log) and ``kappa`` (one standard-normal latent per
    subject-occasion), ``u`` (N x 3 standard-normal latents, row-major),
    then the blocks of the selected sparsity prior.

    Instances are picklable; compiled functions are rebuilt lazily in
    each process.
    """

    def __init__(
        self,
        dataset: Dataset,
        prior: PriorSpec | None,
        pk_prior: PkPriorConfig | None = None,
        occasions: bool = False,
    ):
        self.dataset = dataset
        self.prior_spec = prior
        self.pk_prior = pk_prior or PkPriorConfig()
        self.occasions = occasions
        self.n_subjects = dataset.n_subjects
        self.genetic: GeneticPrior | None = (
            build_genetic_prior(prior, dataset.n_snps) if prior is not None else None
        )

        subject_index: list[int] = []
        occasion_index: list[int] = []
        times: list[float] = []
        doses: list[float] = []
        concentrations: list[float] = []
        self.occasion_keys: list[tuple[str, int]] = []
        for i, subject in enumerate(dataset.subjects):
            first = len(self.occasion_keys)
            labels = subject.occasions
            self.occasion_keys.extend((subject.id, label) for label in labels)
            for obs in subject.observations:
                subject_index.append(i)
                occasion_index.append(first + labels.index(obs.occasion))
                times.append(obs.time_h)
                doses.append(subject.dose)
                concentrations.append(obs.concentration)

        self._subject_index = np.asarray(subject_index)
        self._occasion_index = np.asarray(occasion_index)
        self._time = np.asarray(times)
        self._dose = np.asarray(doses)
        self._concentration = np.asarray(concentrations)
        if self.genetic is not None:
            self._genotypes = standardize_snps(dataset.snp_matrix, dataset.snp_ids)
        else:
            self._genotypes = np.zeros((self.n_subjects, 0))

        self.space = ModelSpace(self._blocks())
        self._value_and_grad: Any = None
        self._value: Any = None

    # -- layout ---------------------------------------------------------------

    def _blocks(self) -> list[Block]:
        pk = self.pk_prior
        blocks = [
            Block("mu", 3, Transform.IDENTITY, pk.mu_means, 0.25),
            Block("sigma", 1, Transform.EXP, pk.log_sigma_mean, 0.5),
            Block("omega", 3, Transform.EXP, float(np.log(0.3)), 0.5),
        ]
        if self.occasions:
            blocks.append(Block("psi_cl", 1, Transform.EXP, float(np.log(0.1)), 0.5))
            blocks.append(Block("kappa", len(self.occasion_keys), Transform.IDENTITY))
        blocks.append(Block("u", 3 * self.n_subjects, Transform.IDENTITY, 0.0, 0.5))
        if self.genetic is not None:
            blocks.extend(self.genetic.blocks())
        return blocks

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def initial_position(self, rng: np.random.Generator) -> NDArray[np.float64]:
        return self.space.initial_position(rng)

    # -- density --------------------------------------------------------------

    def _effects(self, raw: dict[str, Array], values: dict[str, Array]) -> Array:
        if self.genetic is None:
            return jnp.zeros(0)
        return self.genetic.effects(raw, values, values["omega"][1])

    def log_density(self, position: Any) -> Array:
        """Traceable log-posterior (no NaN guard)."""
        if position.shape[-1] != self.dim:
            raise DimensionError(
                f"position has length {position.shape[-1]}, expected {self.dim}"
            )
        pk = self.pk_prior
        raw = self.space.unpack(position)
        values = self.space.constrain(raw)
        mu = values["mu"]
        sigma = values["sigma"][0]
        omega = values["omega"]
        u = values["u"].reshape(self.n_subjects, 3)
        eta = u * omega

        beta = self._effects(raw, values)
        log_cl = log_clearance(mu[1], self._genotypes, beta, eta[:, 1])
        log_cl_obs = log_cl[self._subject_index]
        if self.occasions:
            kappa = values["psi_cl"][0] * values["kappa"]
            log_cl_obs = log_cl_obs + kappa[self._occasion_index]
        ka = jnp.exp(mu[0] + eta[:, 0])[self._subject_index]
        volume = jnp.exp(mu[2] + eta[:, 2])[self._subject_index]
        predicted = steady_state_bateman(
            ka,
            jnp.exp(log_cl_obs),
            volume,
            self._time,
            self._dose,
            self.dataset.dose_interval_h,
        )
        log_likelihood = jnp.sum(
            dist.Normal(predicted, sigma).log_prob(self._concentration)
        )

        log_prior = (
            jnp.sum(dist.Normal(jnp.asarray(pk.mu_means), pk.mu_sd).log_prob(mu))
            + dist.LogNormal(pk.log_sigma_mean, pk.log_sigma_sd).log_prob(sigma)
            + jnp.sum(dist.HalfNormal(pk.omega_scale).log_prob(omega))
            + jnp.sum(dist.Normal(0.0, 1.0).log_prob(values["u"]))
        )
        if self.occasions:
            log_prior = (
                log_prior
                + dist.HalfNormal(pk.psi_scale).log_prob(values["psi_cl"][0])
                + jnp.sum(dist.Normal(0.0, 1.0).log_prob(values["kappa"]))
            )
        if self.genetic is not None:
            log_prior = log_prior + self.genetic.log_density(raw, values, omega[1])

        return log_likelihood + log_prior + self.space.log_jacobian(raw)

    def _compile(self) -> None:
        self._value = jax.jit(self.log_density)
        self._value_and_grad = jax.jit(jax.value_and_grad(self.log_density))

    def value(self, position: Any) -> float:
        """Log-posterior at ``position``; NaN is reported as -inf."""
        if self._value is None:
            self._compile()
        result = float(self._value(jnp.asarray(position, dtype=jnp.float64)))
        return result if not np.isnan(result) else -np.inf

    def value_and_grad(self, position: Any) -> tuple[float, NDArray[np.float64]]:
        """Log-posterior and its gradient; NaN values are reported as -inf."""
        if self._value_and_grad is None:
            self._compile()
        value, grad = self._value_and_grad(jnp.asarray(position, dtype=jnp.float64))
        value = float(value)
        if np.isnan(value):
            value = -np.inf
        return value, np.asarray(grad, dtype=float)

    # -- draws ----------------------------------------------------------------

    def constrained_names(self) -> list[str]:
        """Column names of a constrained draw."""
        names = ["mu[ka]", "mu[cl]", "mu[v]", "sigma"]
        names += [f"omega[{p}]" for p in PK_PARAMETERS]
        if self.occasions:
            names.append("psi_cl")
            names += [f"kappa[{sid}:{occ}]" for sid, occ in self.occasion_keys]
        names += [
            f"eta_{p}[{sid}]" for sid in self.dataset.subject_ids for p in PK_PARAMETERS
        ]
        if self.genetic is not None:
            for block in self.genetic.blocks():
                if block.name not in _UNREPORTED_BLOCKS:
                    names.append(block.name)
            names += [f"beta[{snp}]" for snp in self.dataset.snp_ids]
            names += self._derived_keys()
        return names

    def _derived_keys(self) -> list[str]:
        if self.genetic is None:
            return []
        return DERIVED_KEYS.get(self.genetic.name, [])

    def constrain_draw(self, position: Any) -> NDArray[np.float64]:
        """Map one unconstrained position to the row named by ``constrained_names``.

        Random effects are reported as eta = omega * u and kappa as psi * latent,
        per-SNP latents other than beta are omitted.
        """
        position = jnp.asarray(position, dtype=jnp.float64)
        raw = self.space.unpack(position)
        values = self.space.constrain(raw)
        omega = values["omega"]
        parts: list[Any] = [values["mu"], values["sigma"], omega]
        if self.occasions:
            parts += [values["psi_cl"], values["psi_cl"][0] * values["kappa"]]
        parts.append((values["u"].reshape(self.n_subjects, 3) * omega).reshape(-1))
        if self.genetic is not None:
            for block in self.genetic.blocks():
                if block.name not in _UNREPORTED_BLOCKS:
                    parts.append(values[block.name])
            parts.append(self._effects(raw, values))
            derived = self.genetic.derived(raw, values, omega[1])
            parts += [jnp.atleast_1d(derived[key]) for key in self._derived_keys()]
        flat = jnp.concatenate([jnp.atleast_1d(p) for p in parts])
        return np.asarray(flat, dtype=float)

    def __getstate__(self) -> dict[str, Any]:
        state = self.__dict__.copy()
        state["_value"] = None
        state["_value_and_grad"] = None
        return state


def log_posterior(
    position: Any,
    dataset: Dataset,
    prior_spec: PriorSpec | None,
    pk_prior: PkPriorConfig | None = None,
    occasions: bool = False,
) -> float:
    """Evaluate the joint log-posterior at an unconstrained position."""
    return PosteriorModel(dataset, prior_spec, pk_prior, occasions).value(position)


def log_posterior_gradient(
    position: Any,
    dataset: Dataset,
    prior_spec: PriorSpec | None,
    pk_prior: PkPriorConfig | None = None,
    occasions: bool = False,
) -> NDArray[np.float64]:
    """Gradient of ``log_posterior`` with respect to the unconstrained position."""
    model = PosteriorModel(dataset, prior_spec, pk_prior, occasions)
    return model.value_and_grad(position)[1]
