"""Hidden Markov machinery for mark-recapture capture histories.

States are Here / Away / Dead. The two-state model (no death, no season
structure) and the three-state model share one implementation: the former is
the latter with the death probability pinned to zero and a trivial calendar.

Forward vectors are normalized at every step and the per-step normalizers are
accumulated on the log scale, so histories of length 1000 and more do not
underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import DomainError, NumericalError

HERE, AWAY, DEAD = 0, 1, 2
STATE_LABELS = {HERE: "H", AWAY: "A", DEAD: "D"}

# Sighting effort covers weeks 18..43 of each year; the remaining 26 weeks
# are unmodelled and handled by the year-boundary step.
SEASON_WEEK_MIN = 18
SEASON_WEEK_MAX = 43
WEEKS_IN_SEASON = SEASON_WEEK_MAX - SEASON_WEEK_MIN + 1
OFF_SEASON_WEEKS = 52 - WEEKS_IN_SEASON

_ROW_SUM_TOL = 1e-12


def _check_prob(name, value, lo=0.0, hi=1.0, open_lo=False, open_hi=False):
    ok = (value > lo if open_lo else value >= lo) and (
        value < hi if open_hi else value <= hi
    )
    if not ok:
        left = "(" if open_lo else "["
        right = ")" if open_hi else "]"
        raise DomainError(
            f"{name} must lie in {left}{lo}, {hi}{right}, got {value}"
        )


@dataclass(frozen=True)
class TransitionParams:
    """Weekly transition probabilities: staying Here, staying Away, dying.

    gamma_d is zero for the two-state model. The boundary values 0 and 1 are
    accepted so that degenerate chains (certain presence, certain absence)
    can be constructed for simulation and testing; the MCMC engine keeps all
    sampled values in the open interval.
    """

    gamma_hh: float
    gamma_aa: float
    gamma_d: float = 0.0

    def __post_init__(self):
        _check_prob("gamma_hh", self.gamma_hh)
        _check_prob("gamma_aa", self.gamma_aa)
        _check_prob("gamma_d", self.gamma_d, open_hi=True)


@dataclass(frozen=True)
class ObservationParams:
    """Per-individual detection probability given state Here."""

    pi: float

    def __post_init__(self):
        _check_prob("pi", self.pi)


@dataclass
class CaptureHistory:
    """One individual's binary sighting series, starting at its first sighting.

    occasions is None for the two-state model (implicitly consecutive
    occasions) or an integer array for plain indexing; for the three-state
    model it is a (T, 2) array of (season_number, week_number) with
    week_number in [18, 43].
    """

    individual_id: str
    observations: np.ndarray
    occasions: np.ndarray | None = None
    first_sighting_index: int = 0

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.int8)
        if obs.ndim != 1 or obs.size == 0:
            raise DomainError("observations must be a non-empty 1-d sequence")
        if not np.isin(obs, (0, 1)).all():
            raise DomainError("observations must contain only 0 and 1")
        if self.first_sighting_index != 0:
            raise DomainError(
                "the series starts at the first sighting, so "
                "first_sighting_index must be 0"
            )
        if obs[self.first_sighting_index] != 1:
            raise DomainError("the series must start with a sighting")
        self.observations = obs
        if self.occasions is not None:
            occ = np.asarray(self.occasions)
            if occ.ndim == 2:
                if occ.shape != (obs.size, 2):
                    raise DomainError(
                        "occasions must have one (season, week) row per "
                        "observation"
                    )
                weeks = occ[:, 1]
                if weeks.min() < SEASON_WEEK_MIN or weeks.max() > SEASON_WEEK_MAX:
                    raise DomainError(
                        f"week numbers must lie in "
                        f"[{SEASON_WEEK_MIN}, {SEASON_WEEK_MAX}]"
                    )
            elif occ.ndim == 1:
                if occ.size != obs.size:
                    raise DomainError("occasions must align with observations")
            else:
                raise DomainError("occasions must be 1-d or (T, 2)")
            self.occasions = occ

    def __len__(self):
        return self.observations.size

    @property
    def seasons(self):
        """Season number per occasion, or None for the two-state model."""
        if self.occasions is None or self.occasions.ndim == 1:
            return None
        return self.occasions[:, 0]


def build_transition_2state(params: TransitionParams) -> np.ndarray:
    """Row-stochastic 2x2 matrix over (Here, Away)."""
    if params.gamma_d != 0.0:
        raise DomainError("two-state model requires gamma_d = 0")
    g = np.array(
        [
            [params.gamma_hh, 1.0 - params.gamma_hh],
            [1.0 - params.gamma_aa, params.gamma_aa],
        ]
    )
    return g


def build_transition_3state(params: TransitionParams) -> np.ndarray:
    """Row-stochastic 3x3 matrix over (Here, Away, Dead); Dead is absorbing."""
    ghh, gaa, gd = params.gamma_hh, params.gamma_aa, params.gamma_d
    alive = 1.0 - gd
    return np.array(
        [
            [ghh * alive, (1.0 - ghh) * alive, gd],
            [(1.0 - gaa) * alive, gaa * alive, gd],
            [0.0, 0.0, 1.0],
        ]
    )


def emission_prob(state: int, observed: int, pi: float) -> float:
    """P(X = observed | state). An animal is seen iff it is Here."""
    if observed not in (0, 1):
        raise DomainError(f"observed must be 0 or 1, got {observed}")
    _check_prob("pi", pi)
    if state == HERE:
        return pi if observed == 1 else 1.0 - pi
    if state in (AWAY, DEAD):
        return 0.0 if observed == 1 else 1.0
    raise DomainError(f"unknown state {state}")


def emission_vector(observed: int, pi: float, n_states: int) -> np.ndarray:
    e = np.empty(n_states)
    for s in range(n_states):
        e[s] = emission_prob(s, observed, pi)
    return e


def year_boundary_matrix(q: float, gamma_d: float) -> np.ndarray:
    """Transition matrix across the 26-week off season.

    Conditional on surviving the off season an animal is Here at the first
    in-season week with probability q, independent of its state at the end
    of the previous season.
    """
    _check_prob("q", q, open_lo=True, open_hi=True)
    _check_prob("gamma_d", gamma_d, open_hi=True)
    p_surv = (1.0 - gamma_d) ** OFF_SEASON_WEEKS
    alive_row = [q * p_surv, (1.0 - q) * p_surv, 1.0 - p_surv]
    return np.array([alive_row, alive_row, [0.0, 0.0, 1.0]])


def year_boundary_distribution(
    prev_probs: np.ndarray, q: float, gamma_d: float
) -> np.ndarray:
    """State distribution at the first week of a season given the
    distribution at the final week of the previous season."""
    p = np.asarray(prev_probs, dtype=float)
    if p.shape != (3,) or abs(p.sum() - 1.0) > 1e-8 or (p < 0).any():
        raise DomainError("prev_probs must be a normalized 3-state distribution")
    return p @ year_boundary_matrix(q, gamma_d)


def seasonal_step_matrices(
    seasons: np.ndarray,
    params: TransitionParams,
    q: float,
    beta_yr: np.ndarray | None = None,
) -> np.ndarray:
    """Per-step 3x3 matrices for a history with the given season indices.

    Steps that cross a season boundary use the year-boundary matrix; within a
    season the weekly matrix applies, with the Here-retention probability
    shifted on the logit scale by that season's beta_yr entry when year
    effects are active.
    """
    seasons = np.asarray(seasons)
    t_total = seasons.size
    mats = np.empty((t_total - 1, 3, 3))
    boundary = year_boundary_matrix(q, params.gamma_d)
    base_logit = logit(params.gamma_hh)
    for t in range(1, t_total):
        if seasons[t] != seasons[t - 1]:
            mats[t - 1] = boundary
        else:
            ghh = params.gamma_hh
            if beta_yr is not None:
                ghh = float(expit(beta_yr[seasons[t]] + base_logit))
            mats[t - 1] = build_transition_3state(
                TransitionParams(ghh, params.gamma_aa, params.gamma_d)
            )
    return mats


@dataclass
class ForwardResult:
    """Normalized forward vectors plus per-step log normalizers."""

    alphas: np.ndarray
    log_norms: np.ndarray

    @property
    def log_likelihood(self) -> float:
        return float(self.log_norms.sum())


def _as_step_matrices(transition, n_steps: int) -> np.ndarray:
    mats = np.asarray(transition, dtype=float)
    if mats.ndim == 2:
        mats = np.broadcast_to(mats, (n_steps,) + mats.shape)
    if mats.ndim != 3 or mats.shape[0] != n_steps or mats.shape[1] != mats.shape[2]:
        raise DomainError(
            f"transition must be (S, S) or ({n_steps}, S, S), got {mats.shape}"
        )
    if np.abs(mats.sum(axis=2) - 1.0).max() > 1e-9:
        raise DomainError("transition rows must sum to 1")
    return mats


def forward_pass(observations, transition, pi: float) -> ForwardResult:
    """Normalized forward recursion conditioned on Here at the first sighting.

    observations may be a CaptureHistory or a raw 0/1 array whose first entry
    is 1. transition is a single matrix or a (T-1, S, S) stack of per-step
    matrices (year-boundary matrices already substituted where they apply).
    """
    if isinstance(observations, CaptureHistory):
        obs = observations.observations
    else:
        obs = np.asarray(observations, dtype=np.int8)
    if obs.size == 0:
        raise DomainError("empty capture history")
    if obs[0] != 1:
        raise DomainError("history must start at its first sighting")
    _check_prob("pi", pi)

    n_steps = obs.size - 1
    if n_steps == 0:
        # degenerate at Here; state count taken from the matrix if provided
        try:
            n_states = np.asarray(transition).shape[-1]
        except Exception:
            n_states = 2
        a = np.zeros((1, n_states))
        a[0, HERE] = 1.0
        return ForwardResult(a, np.zeros(1))

    mats = _as_step_matrices(transition, n_steps)
    n_states = mats.shape[1]
    alphas = np.zeros((obs.size, n_states))
    log_norms = np.zeros(obs.size)
    alphas[0, HERE] = 1.0
    for t in range(1, obs.size):
        prior = alphas[t - 1] @ mats[t - 1]
        f = prior * emission_vector(int(obs[t]), pi, n_states)
        c = f.sum()
        if c <= 0.0:
            raise NumericalError(
                f"all-zero forward vector at step {t}: the observation is "
                "impossible under the supplied parameters"
            )
        alphas[t] = f / c
        log_norms[t] = np.log(c)
    return ForwardResult(alphas, log_norms)


def _pick(probs: np.ndarray, u: float) -> int:
    acc = 0.0
    for s in range(probs.size - 1):
        acc += probs[s]
        if u < acc:
            return s
    return probs.size - 1


def backward_sample(
    forward: ForwardResult, transition, rng=None, uniforms=None
) -> np.ndarray:
    """Draw one latent state path given forward vectors.

    The final state is drawn from the last forward vector; earlier states are
    drawn backwards with weights alpha_t(s) * P(S_{t+1} | S_t = s). One
    uniform variate is consumed per occasion, which lets callers reproduce a
    draw exactly by supplying the uniforms directly.
    """
    alphas = forward.alphas
    t_total, n_states = alphas.shape
    mats = _as_step_matrices(transition, max(t_total - 1, 1))[: t_total - 1]
    if uniforms is None:
        uniforms = rng.random(t_total)
    else:
        uniforms = np.asarray(uniforms, dtype=float)
        if uniforms.size != t_total:
            raise DomainError("need one uniform per occasion")

    path = np.empty(t_total, dtype=np.int8)
    s = _pick(alphas[-1], uniforms[-1])
    path[-1] = s
    for t in range(t_total - 2, -1, -1):
        w = alphas[t] * mats[t][:, s]
        c = w.sum()
        if c <= 0.0:
            raise NumericalError(f"zero backward weight at step {t}")
        s = _pick(w / c, uniforms[t])
        path[t] = s
    return path


def backward_sample_many(
    forward: ForwardResult, transition, n_draws: int, rng
) -> np.ndarray:
    """Draw n_draws independent paths at once (vectorized over draws)."""
    alphas = forward.alphas
    t_total, n_states = alphas.shape
    mats = _as_step_matrices(transition, max(t_total - 1, 1))[: t_total - 1]
    paths = np.empty((n_draws, t_total), dtype=np.int8)
    u = rng.random((n_draws, t_total))
    cum = np.cumsum(alphas[-1])
    paths[:, -1] = np.searchsorted(cum, u[:, -1] * cum[-1], side="right").clip(
        0, n_states - 1
    )
    for t in range(t_total - 2, -1, -1):
        # kernel[s_next, s_prev] proportional to alpha_t(s_prev) M[s_prev, s_next]
        kern = alphas[t][None, :] * mats[t].T
        norm = kern.sum(axis=1, keepdims=True)
        if (norm == 0).any():
            raise NumericalError(f"zero backward weight at step {t}")
        cums = np.cumsum(kern / norm, axis=1)
        rows = cums[paths[:, t + 1]]
        paths[:, t] = (u[:, t][:, None] > rows).sum(axis=1).clip(0, n_states - 1)
    return paths


@dataclass
class SufficientStats:
    """Success/trial counts extracted from one sampled path.

    Observation trials accrue at every Here occasion; retention trials pair
    consecutive in-season occasions and exclude transitions into Dead (those
    inform the death probability only) and season boundaries (governed by q).
    """

    obs_successes: int
    obs_trials: int
    hh_successes: int
    hh_trials: int
    aa_successes: int
    aa_trials: int
    hh_by_season: dict[int, tuple[int, int]] | None = None
    deaths: int = 0
    boundary_here: int = 0
    boundary_away: int = 0
    boundary_dead: int = 0


def validate_path(path: np.ndarray, observations: np.ndarray) -> None:
    path = np.asarray(path)
    obs = np.asarray(observations)
    if path.shape != obs.shape:
        raise DomainError("path and history must be aligned")
    if path[0] != HERE:
        raise DomainError("path must start Here at the first sighting")
    if ((obs == 1) & (path != HERE)).any():
        raise DomainError("a sighted occasion must be in state Here")
    dead = path == DEAD
    if dead.any() and not dead[np.argmax(dead):].all():
        raise DomainError("Dead is absorbing")


def sufficient_stats(path, history: CaptureHistory) -> SufficientStats:
    """Count successes and trials for pi, gamma_hh and gamma_aa along a path."""
    path = np.asarray(path)
    obs = history.observations
    validate_path(path, obs)
    seasons = history.seasons

    here = path == HERE
    obs_trials = int(here.sum())
    obs_successes = int((here & (obs == 1)).sum())

    prev, nxt = path[:-1], path[1:]
    if seasons is None:
        same = np.ones(prev.size, dtype=bool)
    else:
        same = seasons[1:] == seasons[:-1]
    to_alive = nxt != DEAD
    hh_trial = same & (prev == HERE) & to_alive
    hh_succ = hh_trial & (nxt == HERE)
    aa_trial = same & (prev == AWAY) & to_alive
    aa_succ = aa_trial & (nxt == AWAY)
    deaths = int((same & (prev != DEAD) & (nxt == DEAD)).sum())

    hh_by_season = None
    if seasons is not None:
        hh_by_season = {}
        for s in np.unique(seasons[:-1][hh_trial]):
            sel = hh_trial & (seasons[:-1] == s)
            hh_by_season[int(s)] = (int(hh_succ[sel].sum()), int(sel.sum()))

    crossing = ~same & (prev != DEAD)
    return SufficientStats(
        obs_successes=obs_successes,
        obs_trials=obs_trials,
        hh_successes=int(hh_succ.sum()),
        hh_trials=int(hh_trial.sum()),
        aa_successes=int(aa_succ.sum()),
        aa_trials=int(aa_trial.sum()),
        hh_by_season=hh_by_season,
        deaths=deaths,
        boundary_here=int((crossing & (nxt == HERE)).sum()),
        boundary_away=int((crossing & (nxt == AWAY)).sum()),
        boundary_dead=int((crossing & (nxt == DEAD)).sum()),
    )


def enumerate_path_posterior(observations, transition, pi):
    """Exact posterior over latent paths by brute-force enumeration.

    Only feasible for short histories; used as an oracle for the forward and
    backward routines.
    """
    obs = np.asarray(observations, dtype=np.int8)
    t_total = obs.size
    full = _as_step_matrices(transition, max(t_total - 1, 1))
    n_states = full.shape[1]
    mats = full[: t_total - 1]
    paths = []
    weights = []

    def rec(prefix, weight):
        t = len(prefix)
        if t == t_total:
            paths.append(tuple(prefix))
            weights.append(weight)
            return
        for s in range(n_states):
            w = weight * mats[t - 1][prefix[-1], s] * emission_prob(
                s, int(obs[t]), pi
            )
            if w > 0.0:
                rec(prefix + [s], w)

    rec([HERE], 1.0)
    weights = np.array(weights)
    total = weights.sum()
    return {p: w / total for p, w in zip(paths, weights)}, np.log(total)
