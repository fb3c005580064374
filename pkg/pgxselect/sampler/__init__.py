"""No-U-Turn sampler, warm-up adaptation and convergence diagnostics."""

import jax

jax.config.update("jax_enable_x64", True)
