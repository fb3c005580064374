"""Convergence diagnostics over (chains, draws) arrays."""

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.fft import irfft, next_fast_len, rfft
from scipy.stats import norm, rankdata

from pgxselect.exceptions import DimensionError

Draws = NDArray[np.float64]


def _as_chains(x: Draws) -> Draws:
    array = np.asarray(x, dtype=float)
    if array.ndim == 1:
        array = array[None, :]
    if array.ndim != 2:
        raise DimensionError(f"expected (chains, draws), got shape {array.shape}")
    return array


def _split(x: Draws) -> Draws:
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half :]], axis=0)


def _is_constant(x: Draws) -> bool:
    return bool(np.ptp(x) == 0) or not np.all(np.isfinite(x))


def _rank_normalize(x: Draws) -> Draws:
    ranks = rankdata(x, method="average").reshape(x.shape)
    return np.asarray(norm.ppf((ranks - 0.375) / (x.size + 0.25)))


def _rhat(x: Draws) -> float:
    n = x.shape[1]
    chain_means = x.mean(axis=1)
    within = x.var(axis=1, ddof=1).mean()
    between = n * chain_means.var(ddof=1)
    if within == 0:
        return float("nan")
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def split_rhat(x: Draws) -> float:
    """Potential scale reduction over chains split in half.

    Constant or non-finite input returns 1.0 when every value agrees,
    NaN otherwise.
    """
    chains = _as_chains(x)
    if chains.shape[1] < 4:
        raise DimensionError("split R-hat needs at least 4 draws per chain")
    if _is_constant(chains):
        return 1.0 if np.all(np.isfinite(chains)) else float("nan")
    return _rhat(_split(chains))


def rank_normalized_split_rhat(x: Draws) -> float:
    """Rank-normalized folded split R-hat; the larger of bulk and tail versions."""
    chains = _as_chains(x)
    if _is_constant(chains):
        return 1.0 if np.all(np.isfinite(chains)) else float("nan")
    split = _split(chains)
    bulk = _rhat(_rank_normalize(split))
    folded = np.abs(split - np.median(split))
    tail = _rhat(_rank_normalize(folded)) if np.ptp(folded) > 0 else 1.0
    return float(max(bulk, tail))


def _autocovariance(x: Draws) -> Draws:
    n = x.shape[-1]
    size = next_fast_len(2 * n)
    centered = x - x.mean(axis=-1, keepdims=True)
    spectrum = rfft(centered, n=size, axis=-1)
    acov = irfft(spectrum * np.conjugate(spectrum), n=size, axis=-1)[..., :n]
    return np.asarray(acov / n)


def _ess(x: Draws) -> float:
    """ESS from combined autocorrelations with Geyer's initial monotone sequence."""
    n_chains, n_draws = x.shape
    acov = _autocovariance(x)
    chain_var = acov[:, 0] * n_draws / (n_draws - 1.0)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n_draws - 1.0) / n_draws
    if n_chains > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float(x.size)

    rho_hat = np.zeros(n_draws)
    rho_hat[0] = 1.0
    rho_hat_even = 1.0
    rho_hat_odd = (
        1.0 - (mean_var - acov[:, 1].mean()) / var_plus if n_draws > 1 else 0.0
    )
    if n_draws > 1:
        rho_hat[1] = rho_hat_odd

    t = 1
    while t < n_draws - 3 and rho_hat_even + rho_hat_odd > 0.0:
        rho_hat_even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        rho_hat_odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if rho_hat_even + rho_hat_odd >= 0:
            rho_hat[t + 1] = rho_hat_even
            rho_hat[t + 2] = rho_hat_odd
        t += 2
    max_t = t - 2
    if rho_hat_even > 0:
        rho_hat[max_t + 1] = rho_hat_even

    # initial monotone sequence
    t = 1
    while t <= max_t - 2:
        pair = rho_hat[t + 1] + rho_hat[t + 2]
        previous = rho_hat[t - 1] + rho_hat[t]
        if pair > previous:
            rho_hat[t + 1] = previous / 2.0
            rho_hat[t + 2] = previous / 2.0
        t += 2

    tau_hat = -1.0 + 2.0 * rho_hat[: max_t + 1].sum() + rho_hat[max_t + 1]
    tau_hat = max(tau_hat, 1.0 / np.log10(x.size))
    return float(x.size / tau_hat)


def ess_basic(x: Draws) -> float:
    """ESS of the raw values over split chains."""
    chains = _as_chains(x)
    if _is_constant(chains):
        return float(chains.size)
    return _ess(_split(chains))


def ess_bulk(x: Draws) -> float:
    """ESS of the rank-normalized split chains."""
    chains = _as_chains(x)
    if _is_constant(chains):
        return float(chains.size)
    return _ess(_rank_normalize(_split(chains)))


def ess_tail(x: Draws) -> float:
    """Smaller of the ESS of the 5% and 95% quantile indicators."""
    chains = _as_chains(x)
    if _is_constant(chains):
        return float(chains.size)
    estimates = []
    for q in (0.05, 0.95):
        indicator = (chains <= np.quantile(chains, q)).astype(float)
        estimates.append(ess_basic(indicator))
    return float(min(estimates))


def mcse_mean(x: Draws) -> float:
    """Monte Carlo standard error of the posterior mean."""
    chains = _as_chains(x)
    return float(chains.std(ddof=1) / np.sqrt(ess_basic(chains)))


def summarize(names: list[str], draws: Draws) -> pd.DataFrame:
    """Per-parameter summary table of a (chains, draws, parameters) array.

    Returns:
        DataFrame indexed by parameter with mean, sd, q05, q50, q95, mcse,
        rhat, rhat_rank, ess_bulk and ess_tail columns
    """
    array = np.asarray(draws, dtype=float)
    if array.ndim != 3 or array.shape[2] != len(names):
        raise DimensionError(
            f"draws of shape {array.shape} do not match {len(names)} parameter names"
        )
    flat = array.reshape(-1, array.shape[2])
    quantiles = np.quantile(flat, [0.05, 0.5, 0.95], axis=0)
    rows = []
    for j, name in enumerate(names):
        column = array[:, :, j]
        rows.append(
            {
                "parameter": name,
                "mean": flat[:, j].mean(),
                "sd": flat[:, j].std(ddof=1) if flat.shape[0] > 1 else 0.0,
                "q05": quantiles[0, j],
                "q50": quantiles[1, j],
                "q95": quantiles[2, j],
                "mcse": mcse_mean(column) if flat.shape[0] > 1 else float("nan"),
                "rhat": split_rhat(column) if column.shape[1] >= 4 else float("nan"),
                "rhat_rank": (
                    rank_normalized_split_rhat(column)
                    if column.shape[1] >= 4
                    else float("nan")
                ),
                "ess_bulk": ess_bulk(column) if column.shape[1] >= 4 else float("nan"),
                "ess_tail": ess_tail(column) if column.shape[1] >= 4 else float("nan"),
            }
        )
    return pd.DataFrame(rows).set_index("parameter")
