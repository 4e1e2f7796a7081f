"""The compiled batched kernels must agree with the reference routines in
`hmm` exactly: same log-likelihoods, and identical paths when both consume
the same uniform variates."""

import numpy as np
import pytest

from dphmm import kernels
from dphmm.hmm import (
    CaptureHistory,
    TransitionParams,
    backward_sample,
    build_transition_2state,
    forward_pass,
    seasonal_step_matrices,
    sufficient_stats,
)
from dphmm.simulate import SimDesign, GroupSpec, simulate


def _two_state_dataset(seed=0, n=6, t_total=14):
    rng = np.random.default_rng(seed)
    obs = np.full((n, t_total), -1, dtype=np.int8)
    starts = rng.integers(0, t_total - 2, n)
    for i in range(n):
        obs[i, starts[i]] = 1
        obs[i, starts[i] + 1 :] = rng.integers(0, 2, t_total - starts[i] - 1)
    return obs, starts


def test_two_state_kernel_matches_reference():
    obs, starts = _two_state_dataset()
    n, t_total = obs.shape
    rng = np.random.default_rng(123)
    ghh = rng.uniform(0.3, 0.95, n)
    gaa = rng.uniform(0.3, 0.95, n)
    pi = rng.uniform(0.2, 0.9, n)

    paths, lls = kernels.ffbs_two_state(
        obs, starts, ghh, gaa, pi, np.random.default_rng(7)
    )
    u = np.random.default_rng(7).random((n, t_total))
    for i in range(n):
        t0 = starts[i]
        g = build_transition_2state(TransitionParams(ghh[i], gaa[i]))
        f = forward_pass(obs[i, t0:], g, pi[i])
        assert lls[i] == pytest.approx(f.log_likelihood, abs=1e-10)
        ref = backward_sample(f, g, uniforms=u[i, t0:])
        assert (paths[i, t0:] == ref).all()


def test_three_state_kernel_matches_reference():
    rng = np.random.default_rng(1)
    n, n_seasons, weeks = 5, 3, 4
    season_of = np.repeat(np.arange(n_seasons), weeks)
    t_total = season_of.size
    obs = np.full((n, t_total), -1, dtype=np.int8)
    starts = rng.integers(0, t_total - 2, n)
    for i in range(n):
        obs[i, starts[i]] = 1
        obs[i, starts[i] + 1 :] = rng.integers(0, 2, t_total - starts[i] - 1)
    # everything after a death would be forced 0; keep histories feasible by
    # blanking sightings after a long gap is unnecessary: any pattern is
    # feasible while gamma_d < 1
    ghh = rng.uniform(0.4, 0.9, n)
    gaa = rng.uniform(0.4, 0.9, n)
    pi = rng.uniform(0.3, 0.9, n)
    beta = np.array([0.0, 0.4, -0.3])
    gamma_d, q = 0.01, 0.55
    from scipy.special import expit, logit

    ghh_by_season = expit(beta[None, :] + logit(ghh)[:, None])

    paths, lls = kernels.ffbs_three_state(
        obs,
        starts,
        season_of,
        ghh_by_season,
        gaa,
        gamma_d,
        q,
        pi,
        np.random.default_rng(99),
    )
    u = np.random.default_rng(99).random((n, t_total))
    for i in range(n):
        t0 = starts[i]
        mats = seasonal_step_matrices(
            season_of[t0:], TransitionParams(ghh[i], gaa[i], gamma_d), q, beta
        )
        f = forward_pass(obs[i, t0:], mats, pi[i])
        assert lls[i] == pytest.approx(f.log_likelihood, abs=1e-10)
        ref = backward_sample(f, mats, uniforms=u[i, t0:])
        assert (paths[i, t0:] == ref).all()


def test_batch_stats_matches_reference_two_state():
    obs, starts = _two_state_dataset(seed=4)
    n, t_total = obs.shape
    rng = np.random.default_rng(2)
    ghh = rng.uniform(0.3, 0.9, n)
    gaa = rng.uniform(0.3, 0.9, n)
    pi = rng.uniform(0.3, 0.9, n)
    paths, _ = kernels.ffbs_two_state(obs, starts, ghh, gaa, pi, rng)
    stats = kernels.batch_stats(obs, paths, starts)
    for i in range(n):
        t0 = starts[i]
        h = CaptureHistory(f"i{i}", obs[i, t0:])
        ref = sufficient_stats(paths[i, t0:], h)
        assert stats.obs_successes[i] == ref.obs_successes
        assert stats.obs_trials[i] == ref.obs_trials
        assert stats.hh_successes[i] == ref.hh_successes
        assert stats.hh_trials[i] == ref.hh_trials
        assert stats.aa_successes[i] == ref.aa_successes
        assert stats.aa_trials[i] == ref.aa_trials


def test_batch_stats_matches_reference_three_state():
    design = SimDesign(
        n_individuals=8,
        model="three-state",
        n_seasons=3,
        pi=GroupSpec((0.6,)),
        gamma_hh=GroupSpec((0.8,)),
        gamma_aa=GroupSpec((0.7,)),
        gamma_d=0.01,
        q=0.5,
        seed=3,
    )
    sim = simulate(design)
    ds = sim.dataset()
    paths = sim.paths
    stats = kernels.batch_stats(
        ds.obs, paths, ds.starts, ds.season_of, ds.n_seasons
    )
    for i, h in enumerate(ds.histories):
        t0 = ds.starts[i]
        ref = sufficient_stats(paths[i, t0:], h)
        assert stats.obs_successes[i] == ref.obs_successes
        assert stats.obs_trials[i] == ref.obs_trials
        assert stats.hh_successes[i] == ref.hh_successes
        assert stats.hh_trials[i] == ref.hh_trials
        assert stats.aa_successes[i] == ref.aa_successes
        assert stats.aa_trials[i] == ref.aa_trials
        assert stats.deaths[i] == ref.deaths
        assert stats.boundary_here[i] == ref.boundary_here
        assert stats.boundary_away[i] == ref.boundary_away
        assert stats.boundary_dead[i] == ref.boundary_dead
        by_season = {
            s: (
                int(stats.hh_successes_by_season[i, s]),
                int(stats.hh_trials_by_season[i, s]),
            )
            for s in range(ds.n_seasons)
            if stats.hh_trials_by_season[i, s] > 0
        }
        assert by_season == ref.hh_by_season
