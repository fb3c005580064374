"""One-compartment steady-state PK model with first-order absorption."""

from typing import Any

import jax.numpy as jnp
import numpy as np
from jax import Array
from numpy.typing import ArrayLike

from pgxselect.exceptions import DimensionError, DomainError

LIMIT_RELATIVE_GAP = 1e-8


def steady_state_bateman(
    ka: Any, cl: Any, v: Any, t: Any, dose: Any, interval: Any
) -> Array:
    """Steady-state Bateman curve without argument validation.

    Traceable by jax; the ka = k singularity is replaced by its analytic
    limit whenever ``|ka - k| < 1e-8 * ka``.
    """
    k = cl / v
    gap = ka - k
    near = jnp.abs(gap) < LIMIT_RELATIVE_GAP * ka
    safe_gap = jnp.where(near, 1.0, gap)

    decay_k = jnp.exp(-k * t)
    accum_k = -jnp.expm1(-interval * k)
    accum_ka = -jnp.expm1(-interval * ka)
    general = (
        dose / v * ka / safe_gap * (decay_k / accum_k - jnp.exp(-ka * t) / accum_ka)
    )
    limit = (
        dose
        / v
        * k
        * decay_k
        * (t * accum_k + interval * jnp.exp(-interval * k))
        / accum_k**2
    )
    return jnp.where(near, limit, general)


def bateman_concentration(
    phi: tuple[ArrayLike, ArrayLike, ArrayLike],
    t: ArrayLike,
    dose: ArrayLike,
    interval: ArrayLike = 12.0,
) -> Any:
    """Steady-state concentration after repeated oral dosing.

    Args:
        phi: Individual parameters (ka, CL, V)
        t: Time since the last dose in hours
        dose: Dose amount per interval
        interval: Dosing interval in hours

    Returns:
        Concentration, a float for scalar inputs or an array otherwise

    Raises:
        DomainError: If ka, CL, V or the interval is nonpositive, or t < 0
    """
    ka, cl, v = (np.asarray(value, dtype=float) for value in phi)
    t_arr = np.asarray(t, dtype=float)
    interval_arr = np.asarray(interval, dtype=float)
    for label, value in (("ka", ka), ("CL", cl), ("V", v), ("interval", interval_arr)):
        if np.any(~(value > 0)):
            raise DomainError(f"{label} must be positive")
    if np.any(~(t_arr >= 0)):
        raise DomainError("t must be nonnegative")
    if np.any(np.asarray(dose, dtype=float) < 0):
        raise DomainError("dose must be nonnegative")

    result = np.asarray(
        steady_state_bateman(
            ka, cl, v, t_arr, np.asarray(dose, dtype=float), interval_arr
        )
    )
    return float(result) if result.ndim == 0 else result


def log_clearance(
    mu_cl: Any,
    x_row: Any,
    beta: Any,
    eta_cl: Any,
    kappa_cl: Any | None = None,
) -> Array:
    """Individual log clearance with additive genetic effects.

    ``x_row`` may be one standardized genotype row or an N x p matrix, in
    which case ``eta_cl`` (and ``kappa_cl``) broadcast per subject.

    Raises:
        DimensionError: If the genotype width differs from len(beta)
    """
    x = jnp.asarray(x_row)
    b = jnp.asarray(beta)
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise DimensionError(
            f"genotype width {x.shape[-1] if x.ndim else 0} does not match "
            f"{b.shape[0] if b.ndim else 0} effects"
        )
    value = mu_cl + x @ b + eta_cl
    if kappa_cl is not None:
        value = value + kappa_cl
    return value
