"""Batched samplers and counters used inside the MCMC loop.

The forward-filter backward-sampler is compiled with numba and runs over all
individuals at once; randomness enters only through a pre-drawn array of
uniforms, one per individual per occasion, so results are reproducible from
the caller's generator. Observation matrices are padded with -1 before each
individual's first sighting.

These kernels mirror the reference routines in `hmm` step for step; the test
suite checks exact agreement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .hmm import AWAY, DEAD, HERE, OFF_SEASON_WEEKS


@njit(cache=True)
def _ffbs_two_state(obs, starts, ghh, gaa, pi, u, paths, loglik):
    n, t_total = obs.shape
    for i in range(n):
        t0 = starts[i]
        length = t_total - t0
        a = np.empty((length, 2))
        a[0, 0] = 1.0
        a[0, 1] = 0.0
        phh = ghh[i]
        paa = gaa[i]
        p = pi[i]
        ll = 0.0
        for t in range(1, length):
            prior_h = a[t - 1, 0] * phh + a[t - 1, 1] * (1.0 - paa)
            prior_a = a[t - 1, 0] * (1.0 - phh) + a[t - 1, 1] * paa
            if obs[i, t0 + t] == 1:
                f0 = prior_h * p
                f1 = 0.0
            else:
                f0 = prior_h * (1.0 - p)
                f1 = prior_a
            c = f0 + f1
            a[t, 0] = f0 / c
            a[t, 1] = f1 / c
            ll += np.log(c)
        loglik[i] = ll

        s = 0 if u[i, t_total - 1] < a[length - 1, 0] else 1
        paths[i, t_total - 1] = s
        for t in range(length - 2, -1, -1):
            if s == 0:
                w0 = a[t, 0] * phh
                w1 = a[t, 1] * (1.0 - paa)
            else:
                w0 = a[t, 0] * (1.0 - phh)
                w1 = a[t, 1] * paa
            c = w0 + w1
            s = 0 if u[i, t0 + t] * c < w0 else 1
            paths[i, t0 + t] = s


@njit(cache=True)
def _ffbs_three_state(
    obs, starts, season_of, ghh_by_season, gaa, gamma_d, q, pi, u, paths, loglik
):
    n, t_total = obs.shape
    p_surv = (1.0 - gamma_d) ** OFF_SEASON_WEEKS
    for i in range(n):
        t0 = starts[i]
        length = t_total - t0
        a = np.empty((length, 3))
        a[0, 0] = 1.0
        a[0, 1] = 0.0
        a[0, 2] = 0.0
        paa = gaa[i]
        p = pi[i]
        ll = 0.0
        for t in range(1, length):
            g = t0 + t
            if season_of[g] != season_of[g - 1]:
                alive = a[t - 1, 0] + a[t - 1, 1]
                prior_h = alive * q * p_surv
                prior_a = alive * (1.0 - q) * p_surv
                prior_d = alive * (1.0 - p_surv) + a[t - 1, 2]
            else:
                phh = ghh_by_season[i, season_of[g]]
                surv = 1.0 - gamma_d
                prior_h = (a[t - 1, 0] * phh + a[t - 1, 1] * (1.0 - paa)) * surv
                prior_a = (a[t - 1, 0] * (1.0 - phh) + a[t - 1, 1] * paa) * surv
                prior_d = (a[t - 1, 0] + a[t - 1, 1]) * gamma_d + a[t - 1, 2]
            if obs[i, g] == 1:
                f0 = prior_h * p
                f1 = 0.0
                f2 = 0.0
            else:
                f0 = prior_h * (1.0 - p)
                f1 = prior_a
                f2 = prior_d
            c = f0 + f1 + f2
            a[t, 0] = f0 / c
            a[t, 1] = f1 / c
            a[t, 2] = f2 / c
            ll += np.log(c)
        loglik[i] = ll

        r = u[i, t_total - 1]
        if r < a[length - 1, 0]:
            s = 0
        elif r < a[length - 1, 0] + a[length - 1, 1]:
            s = 1
        else:
            s = 2
        paths[i, t_total - 1] = s
        for t in range(length - 2, -1, -1):
            g = t0 + t + 1
            if season_of[g] != season_of[g - 1]:
                if s == 0:
                    m0 = q * p_surv
                    m1 = q * p_surv
                    m2 = 0.0
                elif s == 1:
                    m0 = (1.0 - q) * p_surv
                    m1 = (1.0 - q) * p_surv
                    m2 = 0.0
                else:
                    m0 = 1.0 - p_surv
                    m1 = 1.0 - p_surv
                    m2 = 1.0
            else:
                phh = ghh_by_season[i, season_of[g]]
                surv = 1.0 - gamma_d
                if s == 0:
                    m0 = phh * surv
                    m1 = (1.0 - paa) * surv
                    m2 = 0.0
                elif s == 1:
                    m0 = (1.0 - phh) * surv
                    m1 = paa * surv
                    m2 = 0.0
                else:
                    m0 = gamma_d
                    m1 = gamma_d
                    m2 = 1.0
            w0 = a[t, 0] * m0
            w1 = a[t, 1] * m1
            w2 = a[t, 2] * m2
            r = u[i, t0 + t] * (w0 + w1 + w2)
            if r < w0:
                s = 0
            elif r < w0 + w1:
                s = 1
            else:
                s = 2
            paths[i, t0 + t] = s


def ffbs_two_state(obs, starts, ghh, gaa, pi, rng):
    """Sample latent paths for all individuals under the two-state model.

    Returns (paths, logliks); entries of paths before an individual's first
    sighting are left untouched (zero)."""
    n, t_total = obs.shape
    paths = np.zeros((n, t_total), dtype=np.int8)
    loglik = np.zeros(n)
    u = rng.random((n, t_total))
    _ffbs_two_state(
        obs,
        np.asarray(starts, dtype=np.int64),
        np.asarray(ghh, dtype=float),
        np.asarray(gaa, dtype=float),
        np.asarray(pi, dtype=float),
        u,
        paths,
        loglik,
    )
    return paths, loglik


def ffbs_three_state(
    obs, starts, season_of, ghh_by_season, gaa, gamma_d, q, pi, rng
):
    """Three-state FFBS with per-season Here-retention probabilities and
    year-boundary transitions at season changes."""
    n, t_total = obs.shape
    paths = np.zeros((n, t_total), dtype=np.int8)
    loglik = np.zeros(n)
    u = rng.random((n, t_total))
    _ffbs_three_state(
        obs,
        np.asarray(starts, dtype=np.int64),
        np.asarray(season_of, dtype=np.int64),
        np.asarray(ghh_by_season, dtype=float),
        np.asarray(gaa, dtype=float),
        float(gamma_d),
        float(q),
        np.asarray(pi, dtype=float),
        u,
        paths,
        loglik,
    )
    return paths, loglik


@dataclass
class BatchStats:
    """Per-individual success/trial counts for one sweep of sampled paths."""

    obs_successes: np.ndarray
    obs_trials: np.ndarray
    hh_successes: np.ndarray
    hh_trials: np.ndarray
    aa_successes: np.ndarray
    aa_trials: np.ndarray
    hh_successes_by_season: np.ndarray | None = None
    hh_trials_by_season: np.ndarray | None = None
    deaths: np.ndarray | None = None
    boundary_here: np.ndarray | None = None
    boundary_away: np.ndarray | None = None
    boundary_dead: np.ndarray | None = None


def batch_stats(obs, paths, starts, season_of=None, n_seasons=0) -> BatchStats:
    """Vectorized success/trial counting over the whole population."""
    n, t_total = obs.shape
    valid = np.arange(t_total)[None, :] >= np.asarray(starts)[:, None]
    tvalid = valid[:, :-1]

    here = (paths == HERE) & valid
    obs_trials = here.sum(axis=1)
    obs_successes = (here & (obs == 1)).sum(axis=1)

    prev, nxt = paths[:, :-1], paths[:, 1:]
    if season_of is None:
        same = np.ones(t_total - 1, dtype=bool)
    else:
        season_of = np.asarray(season_of)
        same = season_of[1:] == season_of[:-1]
    to_alive = nxt != DEAD
    hh_trial = tvalid & same[None, :] & (prev == HERE) & to_alive
    hh_succ = hh_trial & (nxt == HERE)
    aa_trial = tvalid & same[None, :] & (prev == AWAY) & to_alive
    aa_succ = aa_trial & (nxt == AWAY)

    stats = BatchStats(
        obs_successes=obs_successes,
        obs_trials=obs_trials,
        hh_successes=hh_succ.sum(axis=1),
        hh_trials=hh_trial.sum(axis=1),
        aa_successes=aa_succ.sum(axis=1),
        aa_trials=aa_trial.sum(axis=1),
    )
    if season_of is None:
        return stats

    onehot = (season_of[:-1, None] == np.arange(n_seasons)[None, :]).astype(
        np.int64
    )
    stats.hh_successes_by_season = hh_succ.astype(np.int64) @ onehot
    stats.hh_trials_by_season = hh_trial.astype(np.int64) @ onehot

    deaths_mask = tvalid & same[None, :] & (prev != DEAD) & (nxt == DEAD)
    crossing = tvalid & ~same[None, :] & (prev != DEAD)
    stats.deaths = deaths_mask.sum(axis=1)
    stats.boundary_here = (crossing & (nxt == HERE)).sum(axis=1)
    stats.boundary_away = (crossing & (nxt == AWAY)).sum(axis=1)
    stats.boundary_dead = (crossing & (nxt == DEAD)).sum(axis=1)
    return stats
