"""Posterior-predictive replication and normalized prediction discrepancies.

Each observation is compared with S posterior-predictive replicates; its
mid-rank percentile (R + 0.5) / (S + 1), with R the number of replicates
strictly below the observation, is mapped through the standard normal
quantile function. Under a well-calibrated model the scores are roughly
N(0, 1), whatever the sampling time.
"""

import logging
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from numpy.typing import NDArray
from scipy.stats import kstest, norm

from pgxselect.exceptions import DimensionError
from pgxselect.model.pk import steady_state_bateman
from pgxselect.sampler.runner import PosteriorDraws
from pgxselect.schemas.dataset_schema import Dataset
from pgxselect.simulate import standardize_snps

logger = logging.getLogger(__name__)

GroupBy = Literal["scheme", "occasion", "none"]
PERCENTILES = (10, 50, 90)
DEFAULT_REPLICATES = 1000
DEFAULT_BINS = 6


def posterior_predictive(
    draws: PosteriorDraws,
    dataset: Dataset,
    n_replicates: int,
    rng: np.random.Generator,
) -> NDArray[np.float64]:
    """Replicate every observation from posterior draws with fresh residual noise.

    Draws are picked at random from the pooled chains, with replacement only
    when more replicates are requested than there are draws.

    Returns:
        Array of shape (observations, replicates) in ``observation_frame`` order
    """
    frame = dataset.observation_frame()
    flat = draws.draws.reshape(-1, draws.draws.shape[2])
    total = flat.shape[0]
    picks = rng.choice(total, size=n_replicates, replace=n_replicates > total)
    sample = flat[picks]
    index = {name: j for j, name in enumerate(draws.names)}

    def column(name: str) -> NDArray[np.float64]:
        return np.asarray(sample[:, index[name]])

    def per_subject(prefix: str) -> NDArray[np.float64]:
        return np.stack(
            [column(f"{prefix}[{sid}]") for sid in dataset.subject_ids], axis=1
        )

    position = {sid: i for i, sid in enumerate(dataset.subject_ids)}
    subject_index = frame["subject_id"].map(position).to_numpy()

    log_ka = column("mu[ka]")[:, None] + per_subject("eta_ka")
    log_cl = column("mu[cl]")[:, None] + per_subject("eta_cl")
    log_v = column("mu[v]")[:, None] + per_subject("eta_v")
    snp_ids = draws.snp_ids
    if snp_ids:
        genotypes = standardize_snps(
            dataset.select_snps(snp_ids).snp_matrix, snp_ids
        )
        beta = np.stack([column(f"beta[{snp}]") for snp in snp_ids], axis=1)
        log_cl = log_cl + beta @ genotypes.T

    log_cl_obs = log_cl[:, subject_index]
    kappa_names = [
        f"kappa[{sid}:{occ}]"
        for sid, occ in zip(frame["subject_id"], frame["occasion"], strict=True)
    ]
    if all(name in index for name in kappa_names):
        log_cl_obs = log_cl_obs + np.stack(
            [column(name) for name in kappa_names], axis=1
        )

    predicted = np.asarray(
        steady_state_bateman(
            np.exp(log_ka[:, subject_index]),
            np.exp(log_cl_obs),
            np.exp(log_v[:, subject_index]),
            frame["time_h"].to_numpy()[None, :],
            frame["dose"].to_numpy()[None, :],
            dataset.dose_interval_h,
        )
    )
    noise = column("sigma")[:, None] * rng.standard_normal(predicted.shape)
    return np.asarray((predicted + noise).T)


def npd(observed: Any, replicates: Any) -> NDArray[np.float64]:
    """Normalized prediction discrepancy of each observation.

    Args:
        observed: (observations,) values
        replicates: (observations, S) posterior-predictive replicates

    Returns:
        Inverse-normal transform of the mid-rank percentiles
    """
    y = np.asarray(observed, dtype=float)
    reps = np.asarray(replicates, dtype=float)
    if reps.ndim != 2 or reps.shape[0] != y.shape[0]:
        raise DimensionError(
            f"replicates of shape {reps.shape} do not match {y.shape[0]} observations"
        )
    below = np.sum(reps < y[:, None], axis=1)
    return np.asarray(norm.ppf((below + 0.5) / (reps.shape[1] + 1)))


def npd_summaries(
    scores: Any,
    times: Any,
    bins: int = DEFAULT_BINS,
    n_bootstrap: int = 1000,
    rng: np.random.Generator | None = None,
    confidence: float = 0.95,
) -> pd.DataFrame:
    """Observed 10th/50th/90th NPD percentiles per quantile-based time bin.

    Each percentile comes with a bootstrap band obtained by resampling the
    scores of the bin with replacement.

    Returns:
        One row per bin: time range, median time, count, ``p10``/``p50``/``p90``
        and their ``_lo``/``_hi`` band limits
    """
    values = np.asarray(scores, dtype=float)
    t = np.asarray(times, dtype=float)
    if values.shape != t.shape:
        raise DimensionError("need one time per score")
    rng = rng or np.random.default_rng(0)
    codes = pd.qcut(t, q=bins, labels=False, duplicates="drop")
    alpha = (1.0 - confidence) / 2.0
    rows = []
    for code in np.unique(codes):
        members = codes == code
        bin_scores = values[members]
        boot = rng.choice(bin_scores, size=(n_bootstrap, bin_scores.size), replace=True)
        boot_pct = np.percentile(boot, PERCENTILES, axis=1)
        row: dict[str, float] = {
            "bin": int(code),
            "time_lo": float(t[members].min()),
            "time_hi": float(t[members].max()),
            "time_mid": float(np.median(t[members])),
            "n": int(members.sum()),
        }
        observed = np.percentile(bin_scores, PERCENTILES)
        for k, pct in enumerate(PERCENTILES):
            row[f"p{pct}"] = float(observed[k])
            row[f"p{pct}_lo"] = float(np.quantile(boot_pct[k], alpha))
            row[f"p{pct}_hi"] = float(np.quantile(boot_pct[k], 1.0 - alpha))
        rows.append(row)
    return pd.DataFrame(rows)


def ks_normal(scores: Any) -> tuple[float, float]:
    """Kolmogorov-Smirnov statistic and p-value of the scores against N(0, 1)."""
    result = kstest(np.asarray(scores, dtype=float), "norm")
    return float(result.statistic), float(result.pvalue)


def sampling_scheme(dataset: Dataset, group_by: GroupBy = "scheme") -> pd.Series:
    """Group label of every observation, in ``observation_frame`` order.

    ``scheme`` labels subjects sampled on a single occasion by that occasion
    and subjects with several occasions as ``multi``; ``occasion`` uses each
    observation's own occasion; ``none`` puts everything in one group.
    """
    frame = dataset.observation_frame()
    if group_by == "none":
        return pd.Series("all", index=frame.index, name="group")
    if group_by == "occasion":
        return ("occ" + frame["occasion"].astype(str)).rename("group")
    if group_by != "scheme":
        raise ValueError(f"unknown grouping {group_by!r}")
    labels = {}
    for subject in dataset.subjects:
        occasions = subject.occasions
        labels[subject.id] = f"occ{occasions[0]}" if len(occasions) == 1 else "multi"
    return frame["subject_id"].map(labels).rename("group")


def render_npd_panel(
    summary: pd.DataFrame,
    path: Path,
    title: str,
    scores: Any | None = None,
    times: Any | None = None,
) -> Path:
    """Draw binned NPD percentiles with bootstrap bands and N(0, 1) references.

    Args:
        summary: Output of ``npd_summaries`` for one group
        path: SVG file to write
        title: Panel title
        scores: Optional individual scores drawn as points
        times: Times of ``scores``

    Returns:
        The written path
    """
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.subplots()
    x = summary["time_mid"].to_numpy()
    if scores is not None and times is not None:
        ax.scatter(times, scores, s=6, color="0.6", alpha=0.5, label="NPD")
    colors = {10: "tab:blue", 50: "tab:red", 90: "tab:blue"}
    for pct in PERCENTILES:
        ax.fill_between(
            x,
            summary[f"p{pct}_lo"],
            summary[f"p{pct}_hi"],
            color=colors[pct],
            alpha=0.2,
            linewidth=0,
        )
        ax.plot(x, summary[f"p{pct}"], color=colors[pct], marker="o", label=f"{pct}th")
        ax.axhline(
            float(norm.ppf(pct / 100.0)), color=colors[pct], linestyle="--", linewidth=1
        )
    ax.set_xlabel("Time after dose (h)")
    ax.set_ylabel("NPD")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg")
    logger.debug("Wrote NPD panel %s", path)
    return path
