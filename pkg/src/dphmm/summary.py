"""Posterior summaries emitted as plot-ready tables.

Densities use a Gaussian kernel with Scott's plug-in bandwidth; the bandwidth
actually used is recorded alongside each table so a figure can state it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import gaussian_kde

from .errors import DomainError

PARAM_NAMES = ("pi", "gamma_hh", "gamma_aa")
_GRID_POINTS = 512
_MAX_KDE_SAMPLES = 200_000


def kde_density(values, grid=None, max_samples=_MAX_KDE_SAMPLES):
    """Gaussian KDE evaluated on a grid; returns (grid, density, bandwidth)."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2 or np.ptp(values) == 0.0:
        # degenerate stream: a unit spike at the single value
        center = values[0]
        grid = np.array([center]) if grid is None else np.asarray(grid)
        dens = np.where(grid == center, np.inf, 0.0)
        return grid, dens, 0.0
    if values.size > max_samples:
        idx = np.random.default_rng(0).choice(
            values.size, max_samples, replace=False
        )
        values = values[idx]
    kde = gaussian_kde(values)
    bw = float(kde.factor * values.std(ddof=1))
    if grid is None:
        lo, hi = values.min() - 3 * bw, values.max() + 3 * bw
        grid = np.linspace(lo, hi, _GRID_POINTS)
    return np.asarray(grid), kde(np.asarray(grid)), bw


def local_maxima(density: np.ndarray) -> list[int]:
    """Indices of strict interior local maxima (plus dominating endpoints)."""
    d = np.asarray(density, dtype=float)
    idx = []
    for i in range(d.size):
        left = d[i - 1] if i > 0 else -np.inf
        right = d[i + 1] if i < d.size - 1 else -np.inf
        if d[i] > left and d[i] > right:
            idx.append(i)
    return idx


def secondary_mode_ratio(density: np.ndarray) -> float:
    """Height of the largest secondary local maximum relative to the
    principal mode; 0 when the density is unimodal on the grid."""
    peaks = sorted((density[i] for i in local_maxima(density)), reverse=True)
    if len(peaks) < 2 or peaks[0] == 0:
        return 0.0
    return float(peaks[1] / peaks[0])


@dataclass
class Summary:
    k_table: pd.DataFrame
    log_alpha_density: pd.DataFrame
    pooled_density: pd.DataFrame
    individual_summary: pd.DataFrame
    bandwidths: dict = field(default_factory=dict)


def _stack(samples, name):
    return np.stack([getattr(s, name) for s in samples])


def summarize(samples, ids=None) -> Summary:
    """Build the four summary tables from a retained-sample stream."""
    if not samples:
        raise DomainError("empty sample stream")
    n = samples[0].pi.size
    if ids is None:
        ids = [f"ind_{i:03d}" for i in range(n)]

    k_rows = []
    la_rows = []
    pooled_rows = []
    ind_rows = []
    bandwidths = {}
    for name in PARAM_NAMES:
        ks = np.array([s.dp[name].k for s in samples])
        counts = np.bincount(ks)
        for k in np.nonzero(counts)[0]:
            k_rows.append((name, int(k), int(counts[k]), counts[k] / ks.size))

        log_alpha = np.log([s.dp[name].alpha for s in samples])
        grid, dens, bw = kde_density(log_alpha)
        bandwidths[f"log_alpha_{name}"] = bw
        la_rows.append(
            pd.DataFrame({"parameter": name, "log_alpha": grid, "density": dens})
        )

        values = _stack(samples, name)
        grid = np.linspace(0.0, 1.0, _GRID_POINTS)
        _, dens, bw = kde_density(values.ravel(), grid=grid)
        bandwidths[f"pooled_{name}"] = bw
        pooled_rows.append(
            pd.DataFrame({"parameter": name, "value": grid, "density": dens})
        )

        med = np.median(values, axis=0)
        lo, hi = np.percentile(values, [2.5, 97.5], axis=0)
        mean = values.mean(axis=0)
        for i in range(n):
            ind_rows.append((name, ids[i], med[i], lo[i], hi[i], mean[i]))

    return Summary(
        k_table=pd.DataFrame(
            k_rows, columns=["parameter", "k", "count", "frequency"]
        ),
        log_alpha_density=pd.concat(la_rows, ignore_index=True),
        pooled_density=pd.concat(pooled_rows, ignore_index=True),
        individual_summary=pd.DataFrame(
            ind_rows,
            columns=["parameter", "unit_id", "median", "q2.5", "q97.5", "mean"],
        ),
        bandwidths=bandwidths,
    )
