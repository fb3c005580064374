"""Differentiable NLME PK model and sparsity priors."""

import jax

# Calibration and gradient checks need double precision
jax.config.update("jax_enable_x64", True)
