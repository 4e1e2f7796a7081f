"""Five-step MCMC engine.

One iteration: (1) sample latent paths for all individuals, (2) extract
success/trial counts, (3) sweep the three Dirichlet-process states (detection,
Here-retention, Away-retention) and refresh their cluster values, (4a) update
the Beta base hyperparameters by Metropolis-Hastings, (4b) refresh each
concentration parameter through its auxiliary Beta variable, (5) update the
population-level fixed effects (three-state model only).

Chains are independent; their generators are spawned from the master seed
with numpy's SeedSequence, so a fixed seed fixes every sample bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import betaln, expit, logit

from . import dp, kernels
from .errors import DataError, DomainError
from .hmm import (
    HERE,
    OFF_SEASON_WEEKS,
    SEASON_WEEK_MAX,
    SEASON_WEEK_MIN,
)
from .proposals import AdaptiveProposal

log = logging.getLogger(__name__)

TWO_STATE = "two-state"
THREE_STATE = "three-state"
PARAM_NAMES = ("pi", "gamma_hh", "gamma_aa")

STEP_SAMPLE_PATHS = "sample_paths"
STEP_STATS = "sufficient_stats"
STEP_DP = "dp_updates"
STEP_BASE = "base_hyperparams"
STEP_ALPHA = "concentration"
STEP_FIXED = "fixed_effects"
ITERATION_STEPS = (
    STEP_SAMPLE_PATHS,
    STEP_STATS,
    STEP_DP,
    STEP_BASE,
    STEP_ALPHA,
    STEP_FIXED,
)


@dataclass
class Dataset:
    """Capture histories aligned onto one shared occasion grid.

    obs is (n, T) with -1 before each individual's first sighting; starts[i]
    is the grid index of individual i's first sighting. For the three-state
    model season_of maps each grid occasion to a contiguous season index.
    """

    histories: list
    model: str
    obs: np.ndarray
    starts: np.ndarray
    ids: list
    season_of: np.ndarray | None = None
    n_seasons: int = 0

    @property
    def n_individuals(self) -> int:
        return self.obs.shape[0]

    @property
    def n_occasions(self) -> int:
        return self.obs.shape[1]

    @classmethod
    def from_histories(cls, histories, model: str) -> "Dataset":
        if model not in (TWO_STATE, THREE_STATE):
            raise DomainError(f"unknown model {model!r}")
        if not histories:
            raise DataError("no capture histories")
        occ_key = _occasion_keys(histories, model)
        grid = sorted(set().union(*occ_key))
        index = {o: i for i, o in enumerate(grid)}
        t_total = len(grid)
        n = len(histories)
        obs = np.full((n, t_total), -1, dtype=np.int8)
        starts = np.empty(n, dtype=np.int64)
        for i, (h, occ) in enumerate(zip(histories, occ_key)):
            g0 = index[occ[0]]
            if occ != grid[g0:]:
                raise DataError(
                    f"individual {h.individual_id!r} does not follow the "
                    "shared occasion grid from its first sighting"
                )
            starts[i] = g0
            obs[i, g0:] = h.observations
        season_of = None
        n_seasons = 0
        if model == THREE_STATE:
            seasons = [o[0] for o in grid]
            uniq = sorted(set(seasons))
            smap = {s: i for i, s in enumerate(uniq)}
            season_of = np.array([smap[s] for s in seasons], dtype=np.int64)
            n_seasons = len(uniq)
            _check_week_contiguity(grid)
        return cls(
            histories=list(histories),
            model=model,
            obs=obs,
            starts=starts,
            ids=[h.individual_id for h in histories],
            season_of=season_of,
            n_seasons=n_seasons,
        )


def _occasion_keys(histories, model):
    keys = []
    for h in histories:
        if model == THREE_STATE:
            if h.occasions is None or h.occasions.ndim != 2:
                raise DataError(
                    f"individual {h.individual_id!r} lacks (season, week) "
                    "occasions required by the three-state model"
                )
            keys.append([tuple(map(int, row)) for row in h.occasions])
        else:
            if h.occasions is None:
                keys.append(list(range(len(h))))
            else:
                if h.occasions.ndim != 1:
                    raise DataError(
                        f"individual {h.individual_id!r} carries seasonal "
                        "occasions in a two-state dataset"
                    )
                keys.append([int(o) for o in h.occasions])
    return keys


def _check_week_contiguity(grid):
    for (s0, w0), (s1, w1) in zip(grid, grid[1:]):
        if s1 == s0 and w1 != w0 + 1:
            raise DataError(
                f"weeks within season {s0} must be consecutive "
                f"(found week {w1} after {w0})"
            )
        if s1 == s0 and not (SEASON_WEEK_MIN <= w1 <= SEASON_WEEK_MAX):
            raise DataError(f"week {w1} outside the in-season range")


@dataclass
class FixedEffects:
    """Population-level parameters of the three-state model.

    beta_yr holds one logit-scale Here-retention offset per season; the first
    entry is pinned to zero so the season effects and the individual levels
    stay jointly identified.
    """

    beta_yr: np.ndarray
    gamma_d: float
    q: float

    def __post_init__(self):
        self.beta_yr = np.asarray(self.beta_yr, dtype=float)
        if not np.isfinite(self.beta_yr).all():
            raise DomainError("beta_yr must be finite")
        if not 0.0 <= self.gamma_d < 1.0:
            raise DomainError(f"gamma_d must lie in [0, 1), got {self.gamma_d}")
        if not 0.0 < self.q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {self.q}")


@dataclass
class DpSummary:
    alpha: float
    k: int
    base_a: float
    base_b: float


@dataclass
class PosteriorSample:
    iteration: int
    chain: int
    pi: np.ndarray
    gamma_hh: np.ndarray
    gamma_aa: np.ndarray
    dp: dict
    fixed: FixedEffects | None
    log_likelihood: float


@dataclass
class McmcConfig:
    iterations: int
    burn_in: int = 0
    thin: int = 1
    chains: int = 1
    m: int = 3
    seed: int = 0
    model: str = TWO_STATE
    update_concentration: bool = True
    update_base: bool = True
    init_alpha: float = 1.0
    init_base_a: float = 1.0
    init_base_b: float = 1.0
    init_gamma_d: float = 0.005
    init_q: float = 0.5
    base_rw_scale: float = 0.35
    base_hyper_sd: float = 1.5
    beta_prior_sd: float = 1.5
    fixed_rw_beta: float = 0.2
    fixed_rw_gamma_d: float = 0.5
    fixed_rw_q: float = 0.3
    cluster_mh_scale: float = 0.4
    proposal_df: float = 4.0
    min_adapt_samples: int = 100

    def __post_init__(self):
        if self.iterations < 1:
            raise DomainError("iterations must be at least 1")
        if self.thin < 1:
            raise DomainError("thin must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.chains < 1:
            raise DomainError("chains must be at least 1")
        if self.m < 1:
            raise DomainError("m must be at least 1")
        if self.model not in (TWO_STATE, THREE_STATE):
            raise DomainError(f"unknown model {self.model!r}")

    def signature(self) -> tuple:
        """The fields that must agree for chains to be combinable."""
        return (
            self.iterations,
            self.burn_in,
            self.thin,
            self.m,
            self.model,
            self.update_concentration,
            self.update_base,
        )


def retained_count(iterations: int, burn_in: int, thin: int) -> int:
    return math.ceil((iterations - burn_in) / thin)


def is_retained(iteration: int, burn_in: int, thin: int) -> bool:
    return iteration > burn_in and (iteration - burn_in - 1) % thin == 0


def chain_seed_sequences(seed: int, chains: int):
    """Documented split: one child SeedSequence per chain, spawned in order."""
    return np.random.SeedSequence(seed).spawn(chains)


@dataclass
class ChainState:
    dp_pi: dp.DpState
    dp_hh: dp.DpState
    dp_aa: dp.DpState
    fixed: FixedEffects | None
    paths: np.ndarray
    iteration: int
    rng: np.random.Generator


@dataclass
class ChainTrace:
    """Structured per-step event log for one chain."""

    events: list = field(default_factory=list)

    def record(self, iteration: int, step: str, detail: str = ""):
        self.events.append((iteration, step, detail))
        if log.isEnabledFor(logging.DEBUG):
            log.debug("iter=%d step=%s %s", iteration, step, detail)

    def steps_for(self, iteration: int):
        return [e[1] for e in self.events if e[0] == iteration]

    def proposal_changes(self):
        return [e for e in self.events if e[1] == "proposal_update"]


@dataclass
class ChainResult:
    samples: list
    trace: ChainTrace
    config: McmcConfig
    chain_index: int


class ChainRunner:
    """Drives one chain: state initialization, iteration, sample retention."""

    def __init__(self, dataset: Dataset, config: McmcConfig, chain_index: int = 0):
        if dataset.model != config.model:
            raise DomainError(
                f"dataset model {dataset.model!r} does not match config "
                f"model {config.model!r}"
            )
        if not 0 <= chain_index < config.chains:
            raise DomainError("chain_index out of range")
        self.dataset = dataset
        self.config = config
        self.chain_index = chain_index
        self.trace = ChainTrace()
        seq = chain_seed_sequences(config.seed, config.chains)[chain_index]
        self.rng_seed = seq
        a_alpha, b_alpha = dp.murugiah_hyperparams(dataset.n_individuals)
        self.alpha_hyper = (a_alpha, b_alpha)
        self.base_proposals = {
            name: AdaptiveProposal(
                2,
                rw_scale=config.base_rw_scale,
                min_samples=config.min_adapt_samples,
            )
            for name in PARAM_NAMES
        }
        self.fixed_proposal = None
        if config.model == THREE_STATE:
            n_beta = max(dataset.n_seasons - 1, 0)
            scales = np.concatenate(
                [
                    np.full(n_beta, config.fixed_rw_beta),
                    [config.fixed_rw_gamma_d, config.fixed_rw_q],
                ]
            )
            self.fixed_proposal = AdaptiveProposal(
                n_beta + 2,
                rw_scale=scales,
                df=config.proposal_df,
                min_samples=config.min_adapt_samples,
            )
        self._frozen = config.burn_in == 0
        if self._frozen:
            self._freeze_proposals(0)
        self.last_log_likelihood = math.nan

    # -- state construction -------------------------------------------------

    def initial_state(self) -> ChainState:
        cfg = self.config
        data = self.dataset
        rng = np.random.default_rng(self.rng_seed)
        n = data.n_individuals
        valid = data.obs >= 0
        seen = ((data.obs == 1) & valid).sum()
        pi0 = float(np.clip(seen / valid.sum(), 0.05, 0.95))
        mk = lambda v: dp.DpState.single_cluster(
            n,
            v,
            alpha=cfg.init_alpha,
            base_a=cfg.init_base_a,
            base_b=cfg.init_base_b,
            gamma_prior_a=self.alpha_hyper[0],
            gamma_prior_b=self.alpha_hyper[1],
        )
        fixed = None
        if cfg.model == THREE_STATE:
            fixed = FixedEffects(
                beta_yr=np.zeros(data.n_seasons),
                gamma_d=cfg.init_gamma_d,
                q=cfg.init_q,
            )
        paths = np.where(valid, HERE, 0).astype(np.int8)
        return ChainState(
            dp_pi=mk(pi0),
            dp_hh=mk(0.7),
            dp_aa=mk(0.7),
            fixed=fixed,
            paths=paths,
            iteration=0,
            rng=rng,
        )

    # -- one iteration ------------------------------------------------------

    def step(self, state: ChainState) -> ChainState:
        cfg = self.config
        data = self.dataset
        rng = state.rng
        it = state.iteration + 1
        three_state = cfg.model == THREE_STATE

        # 1. latent paths
        pi_i = state.dp_pi.individual_values()
        phh_i = state.dp_hh.individual_values()
        paa_i = state.dp_aa.individual_values()
        if three_state:
            ghh_by_season = expit(
                state.fixed.beta_yr[None, :] + logit(phh_i)[:, None]
            )
            paths, lls = kernels.ffbs_three_state(
                data.obs,
                data.starts,
                data.season_of,
                ghh_by_season,
                paa_i,
                state.fixed.gamma_d,
                state.fixed.q,
                pi_i,
                rng,
            )
        else:
            paths, lls = kernels.ffbs_two_state(
                data.obs, data.starts, phh_i, paa_i, pi_i, rng
            )
        # include the certain detection at each first sighting so the
        # reported value matches the joint the sampler targets
        loglik = float(lls.sum() + np.log(pi_i).sum())
        self.last_log_likelihood = loglik
        self.trace.record(it, STEP_SAMPLE_PATHS)

        # 2. counts
        stats = kernels.batch_stats(
            data.obs, paths, data.starts, data.season_of, data.n_seasons
        )
        self.trace.record(it, STEP_STATS)

        # 3. Dirichlet-process sweeps and cluster refreshes
        dp_pi = dp.neal8_update(
            state.dp_pi,
            dp.binomial_log_f(stats.obs_successes, stats.obs_trials),
            cfg.m,
            rng,
        )
        dp_pi = dp.update_cluster_params_conjugate(
            dp_pi, stats.obs_successes, stats.obs_trials, rng
        )
        if three_state:
            dp_hh = dp.neal8_update(
                state.dp_hh,
                dp.seasonal_log_f(
                    stats.hh_successes_by_season,
                    stats.hh_trials_by_season,
                    state.fixed.beta_yr,
                ),
                cfg.m,
                rng,
            )
            dp_hh = dp.update_cluster_params_mh(
                dp_hh,
                stats.hh_successes_by_season,
                stats.hh_trials_by_season,
                state.fixed.beta_yr,
                rng,
                step=cfg.cluster_mh_scale,
            )
        else:
            dp_hh = dp.neal8_update(
                state.dp_hh,
                dp.binomial_log_f(stats.hh_successes, stats.hh_trials),
                cfg.m,
                rng,
            )
            dp_hh = dp.update_cluster_params_conjugate(
                dp_hh, stats.hh_successes, stats.hh_trials, rng
            )
        dp_aa = dp.neal8_update(
            state.dp_aa,
            dp.binomial_log_f(stats.aa_successes, stats.aa_trials),
            cfg.m,
            rng,
        )
        dp_aa = dp.update_cluster_params_conjugate(
            dp_aa, stats.aa_successes, stats.aa_trials, rng
        )
        self.trace.record(it, STEP_DP)

        # 4a. base hyperparameters
        states = {"pi": dp_pi, "gamma_hh": dp_hh, "gamma_aa": dp_aa}
        if cfg.update_base:
            for name in PARAM_NAMES:
                states[name] = mh_update_base_hyperparams(
                    states[name],
                    self.base_proposals[name],
                    cfg.base_hyper_sd,
                    rng,
                )
            self.trace.record(it, STEP_BASE)
        else:
            self.trace.record(it, STEP_BASE, "noop")

        # 4b. concentration
        if cfg.update_concentration:
            n = data.n_individuals
            for name in PARAM_NAMES:
                s = states[name]
                eta = dp.sample_eta(s.alpha, n, rng)
                alpha = dp.update_alpha(
                    s.n_clusters, n, eta, s.gamma_prior_a, s.gamma_prior_b, rng
                )
                states[name] = replace(s, alpha=alpha)
            self.trace.record(it, STEP_ALPHA)
        else:
            self.trace.record(it, STEP_ALPHA, "noop")

        # 5. fixed effects
        fixed = state.fixed
        if three_state:
            fixed = mh_update_fixed_effects(
                fixed,
                stats,
                logit(states["gamma_hh"].individual_values()),
                self.fixed_proposal,
                cfg,
                rng,
            )
            self.trace.record(it, STEP_FIXED)
        else:
            self.trace.record(it, STEP_FIXED, "noop")

        self._adapt(it, states, fixed)

        return ChainState(
            dp_pi=states["pi"],
            dp_hh=states["gamma_hh"],
            dp_aa=states["gamma_aa"],
            fixed=fixed,
            paths=paths,
            iteration=it,
            rng=rng,
        )

    def _adapt(self, it: int, states, fixed):
        if self._frozen or it > self.config.burn_in:
            return
        for name in PARAM_NAMES:
            s = states[name]
            self.base_proposals[name].observe(
                [np.log(s.base_a), np.log(s.base_b)]
            )
        if self.fixed_proposal is not None:
            self.fixed_proposal.observe(_pack_fixed(fixed))
        if it == self.config.burn_in:
            self._freeze_proposals(it)

    def _freeze_proposals(self, it: int):
        for name, prop in self.base_proposals.items():
            if prop.freeze():
                self.trace.record(it, "proposal_update", f"base:{name}")
        if self.fixed_proposal is not None and self.fixed_proposal.freeze():
            self.trace.record(it, "proposal_update", "fixed_effects")
        self._frozen = True

    # -- full run -----------------------------------------------------------

    def run(self) -> ChainResult:
        cfg = self.config
        state = self.initial_state()
        samples = []
        for it in range(1, cfg.iterations + 1):
            state = self.step(state)
            if is_retained(it, cfg.burn_in, cfg.thin):
                samples.append(self._record(state))
            if it % 1000 == 0:
                log.info(
                    "chain %d: iteration %d/%d", self.chain_index, it,
                    cfg.iterations,
                )
        return ChainResult(
            samples=samples,
            trace=self.trace,
            config=cfg,
            chain_index=self.chain_index,
        )

    def _record(self, state: ChainState) -> PosteriorSample:
        dp_states = {
            "pi": state.dp_pi,
            "gamma_hh": state.dp_hh,
            "gamma_aa": state.dp_aa,
        }
        return PosteriorSample(
            iteration=state.iteration,
            chain=self.chain_index,
            pi=state.dp_pi.individual_values(),
            gamma_hh=state.dp_hh.individual_values(),
            gamma_aa=state.dp_aa.individual_values(),
            dp={
                name: DpSummary(s.alpha, s.n_clusters, s.base_a, s.base_b)
                for name, s in dp_states.items()
            },
            fixed=(
                FixedEffects(
                    state.fixed.beta_yr.copy(),
                    state.fixed.gamma_d,
                    state.fixed.q,
                )
                if state.fixed is not None
                else None
            ),
            log_likelihood=self.last_log_likelihood,
        )


def mcmc_iteration(
    state: ChainState, dataset: Dataset, config: McmcConfig
) -> ChainState:
    """Advance one full five-step iteration with non-adaptive proposals."""
    runner = ChainRunner(dataset, config, chain_index=0)
    runner._frozen = True
    return runner.step(state)


def run_chain(
    dataset: Dataset, config: McmcConfig, chain_index: int = 0
) -> ChainResult:
    return ChainRunner(dataset, config, chain_index).run()


def run_chains(dataset: Dataset, config: McmcConfig) -> list:
    return [run_chain(dataset, config, c) for c in range(config.chains)]


def combine_chains(results) -> list:
    """Concatenate retained samples across chains, keeping chain provenance."""
    if not results:
        raise DomainError("no chains to combine")
    sig = results[0].config.signature()
    for r in results[1:]:
        if r.config.signature() != sig:
            raise DomainError("chains were run under different configurations")
    combined = []
    for r in results:
        combined.extend(r.samples)
    return combined


# -- Metropolis-Hastings updates -------------------------------------------


def _base_log_target(x: np.ndarray, phis: np.ndarray, hyper_sd: float) -> float:
    """Log density over (log a, log b): Beta likelihood of the active cluster
    values plus independent log-Normal hyperpriors."""
    a, b = np.exp(x)
    if not np.isfinite(a) or not np.isfinite(b):
        return -np.inf
    ll = float(
        np.sum((a - 1.0) * np.log(phis) + (b - 1.0) * np.log1p(-phis))
        - phis.size * betaln(a, b)
    )
    lp = -0.5 * float(x @ x) / hyper_sd**2
    return ll + lp


def mh_update_base_hyperparams(
    state: dp.DpState, proposal: AdaptiveProposal, hyper_sd: float, rng
) -> dp.DpState:
    """One MH step on the base-distribution hyperparameters (a, b)."""
    if state.n_clusters < 1:
        raise DomainError("need at least one active cluster")
    x = np.log([state.base_a, state.base_b])
    phis = state.cluster_values
    cand, log_q_ratio = proposal.propose(x, rng)
    log_acc = (
        _base_log_target(cand, phis, hyper_sd)
        - _base_log_target(x, phis, hyper_sd)
        + log_q_ratio
    )
    if np.isfinite(log_acc) and np.log(rng.random()) < log_acc:
        a, b = np.exp(cand)
        return replace(state, base_a=float(a), base_b=float(b))
    return state


def _pack_fixed(fixed: FixedEffects) -> np.ndarray:
    return np.concatenate(
        [fixed.beta_yr[1:], [logit(fixed.gamma_d), logit(fixed.q)]]
    )


def _unpack_fixed(theta: np.ndarray, n_seasons: int) -> FixedEffects:
    beta = np.concatenate([[0.0], theta[: n_seasons - 1]])
    return FixedEffects(
        beta_yr=beta,
        gamma_d=float(expit(theta[-2])),
        q=float(expit(theta[-1])),
    )


def _fixed_log_target(
    theta: np.ndarray,
    hh_logits: np.ndarray,
    stats: kernels.BatchStats,
    n_seasons: int,
    beta_prior_sd: float,
) -> float:
    beta = np.concatenate([[0.0], theta[: n_seasons - 1]])
    x_gd, x_q = theta[-2], theta[-1]
    gamma_d = expit(x_gd)
    q = expit(x_q)

    logits = beta[None, :] + hh_logits[:, None]
    log_p = -np.logaddexp(0.0, -logits)
    log_1mp = -np.logaddexp(0.0, logits)
    s_mat = stats.hh_successes_by_season
    t_mat = stats.hh_trials_by_season
    ll = float(np.sum(s_mat * log_p + (t_mat - s_mat) * log_1mp))

    weekly_survivals = float(
        np.sum(stats.hh_trials) + np.sum(stats.aa_trials)
    )
    deaths = float(np.sum(stats.deaths))
    log_surv_week = float(np.log1p(-gamma_d))
    ll += weekly_survivals * log_surv_week + deaths * float(np.log(gamma_d))

    bh = float(np.sum(stats.boundary_here))
    ba = float(np.sum(stats.boundary_away))
    bd = float(np.sum(stats.boundary_dead))
    log_p_surv = OFF_SEASON_WEEKS * log_surv_week
    log_p_die = float(np.log(-np.expm1(log_p_surv)))
    ll += bh * (float(np.log(q)) + log_p_surv)
    ll += ba * (float(np.log1p(-expit(x_q))) + log_p_surv)
    ll += bd * log_p_die

    # priors: Normal on the free season offsets; uniform on gamma_d and q on
    # the probability scale, i.e. logistic densities on the sampling scale
    lp = -0.5 * float(theta[: n_seasons - 1] @ theta[: n_seasons - 1]) / (
        beta_prior_sd**2
    )
    for x in (x_gd, x_q):
        lp += -np.logaddexp(0.0, -x) - np.logaddexp(0.0, x)
    return ll + lp


def mh_update_fixed_effects(
    fixed: FixedEffects,
    stats: kernels.BatchStats,
    hh_logits: np.ndarray,
    proposal: AdaptiveProposal,
    config: McmcConfig,
    rng,
) -> FixedEffects:
    """Joint MH update of (beta_yr, gamma_d, q) given paths and individual
    effects; the target is the exact path-and-counts likelihood."""
    n_seasons = fixed.beta_yr.size
    theta = _pack_fixed(fixed)
    cand, log_q_ratio = proposal.propose(theta, rng)
    log_acc = (
        _fixed_log_target(cand, hh_logits, stats, n_seasons, config.beta_prior_sd)
        - _fixed_log_target(
            theta, hh_logits, stats, n_seasons, config.beta_prior_sd
        )
        + log_q_ratio
    )
    if np.isfinite(log_acc) and np.log(rng.random()) < log_acc:
        return _unpack_fixed(cand, n_seasons)
    return fixed
