"""Dirichlet process machinery.

One DpState holds the clustering of a single individual-level parameter:
assignments, active cluster values, the concentration parameter, and the
Beta hyperparameters of the base distribution. Cluster labels are canonical
(0..K-1) but carry no meaning; every update relabels so that the active
clusters stay contiguous and non-empty.

Assignment sweeps follow the auxiliary-component Gibbs scheme (m temporary
candidate clusters drawn from the base distribution), which handles both the
conjugate Binomial likelihood and the non-conjugate year-effect likelihood.
The concentration parameter is refreshed through the usual auxiliary Beta
variable, giving a two-component Gamma mixture, with Gamma hyperparameters
set from the population size.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, NumericalError

_EPS = 1e-12


def _draw_base(a: float, b: float, size: int, rng) -> np.ndarray:
    return np.clip(rng.beta(a, b, size), _EPS, 1.0 - _EPS)


@dataclass
class DpState:
    """Clustering state of one parameter across n individuals."""

    assignments: np.ndarray
    cluster_values: np.ndarray
    alpha: float
    base_a: float = 1.0
    base_b: float = 1.0
    gamma_prior_a: float = 1.0
    gamma_prior_b: float = 1.0

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.cluster_values = np.asarray(self.cluster_values, dtype=float)
        if self.alpha <= 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        for name in ("base_a", "base_b", "gamma_prior_a", "gamma_prior_b"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        self.validate()

    def validate(self):
        n_clusters = self.cluster_values.size
        counts = np.bincount(self.assignments, minlength=n_clusters)
        if counts.size != n_clusters or (counts == 0).any():
            raise DomainError("active clusters must be non-empty and contiguous")

    @property
    def n_individuals(self) -> int:
        return self.assignments.size

    @property
    def n_clusters(self) -> int:
        return self.cluster_values.size

    def individual_values(self) -> np.ndarray:
        """Parameter value per individual (phi of its cluster)."""
        return self.cluster_values[self.assignments]

    @classmethod
    def single_cluster(cls, n: int, value: float, alpha: float = 1.0, **kw):
        return cls(np.zeros(n, dtype=np.int64), np.array([value]), alpha, **kw)


@dataclass
class CrpDraw:
    """Sequential seating of n customers with canonical arrival-order labels."""

    assignments: np.ndarray
    values: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.values.size


def crp_draw(n: int, alpha: float, base_sampler, rng) -> CrpDraw:
    """Simulate a Chinese restaurant process.

    Customer i joins an occupied table with probability proportional to its
    size and opens a new one with probability proportional to alpha; each new
    table receives an independent draw from base_sampler(rng).
    """
    if n < 1:
        raise DomainError(f"need at least one customer, got {n}")
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    assignments = np.empty(n, dtype=np.int64)
    assignments[0] = 0
    values = [base_sampler(rng)]
    # joining a table with prob n_c/(i+alpha) is equivalent to copying the
    # label of a uniformly chosen earlier customer
    u = rng.random(n)
    pick = rng.random(n)
    for i in range(1, n):
        if u[i] * (i + alpha) < alpha:
            assignments[i] = len(values)
            values.append(base_sampler(rng))
        else:
            assignments[i] = assignments[int(pick[i] * i)]
    return CrpDraw(assignments, np.asarray(values))


def expected_cluster_count(n: int, alpha: float) -> float:
    """Analytic mean number of occupied tables after n customers."""
    i = np.arange(n)
    return float(np.sum(alpha / (alpha + i)))


def neal8_update(state: DpState, log_f, m: int, rng) -> DpState:
    """One assignment sweep with m auxiliary components.

    log_f(i, phis) must return the log-likelihood of individual i's counts at
    each candidate value in phis. Existing clusters are weighted by their
    size with individual i removed; each auxiliary component carries weight
    alpha / m and a fresh draw from the base distribution (a singleton's
    current value is recycled as the first auxiliary). Emptied clusters are
    dropped and labels compacted.
    """
    if m < 1:
        raise DomainError(f"need at least one auxiliary component, got {m}")
    c = state.assignments.copy()
    values = state.cluster_values.copy()
    counts = np.bincount(c, minlength=values.size).astype(float)
    alpha = state.alpha
    a, b = state.base_a, state.base_b
    log_alpha_m = np.log(alpha / m)

    for i in range(c.size):
        ci = c[i]
        counts[ci] -= 1.0
        if counts[ci] == 0.0:
            aux = np.empty(m)
            aux[0] = values[ci]
            if m > 1:
                aux[1:] = _draw_base(a, b, m - 1, rng)
            keep = np.ones(values.size, dtype=bool)
            keep[ci] = False
            values = values[keep]
            counts = counts[keep]
            c[c > ci] -= 1
        else:
            aux = _draw_base(a, b, m, rng)

        k = values.size
        cand = np.concatenate([values, aux])
        logw = np.concatenate(
            [np.log(counts), np.full(m, log_alpha_m)]
        ) + log_f(i, cand)
        top = logw.max()
        if not np.isfinite(top):
            raise NumericalError(
                f"all candidate assignment weights vanished for individual {i}"
            )
        w = np.exp(logw - top)
        cum = np.cumsum(w)
        j = int(np.searchsorted(cum, rng.random() * cum[-1]))
        j = min(j, cand.size - 1)
        if j < k:
            c[i] = j
            counts[j] += 1.0
        else:
            c[i] = k
            values = np.append(values, cand[j])
            counts = np.append(counts, 1.0)

    return replace(state, assignments=c, cluster_values=values)


def binomial_log_f(successes, trials):
    """Candidate log-likelihood for conjugate Beta/Binomial counts."""
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)

    def log_f(i, phis):
        phis = np.clip(phis, _EPS, 1.0 - _EPS)
        return successes[i] * np.log(phis) + (trials[i] - successes[i]) * np.log1p(
            -phis
        )

    return log_f


def seasonal_log_f(successes_by_season, trials_by_season, beta_yr):
    """Candidate log-likelihood for the year-effect Here-retention model.

    The per-season success probability is logistic(beta_yr[s] + logit(phi)).
    """
    s_mat = np.asarray(successes_by_season, dtype=float)
    t_mat = np.asarray(trials_by_season, dtype=float)
    beta_yr = np.asarray(beta_yr, dtype=float)

    def log_f(i, phis):
        phis = np.clip(phis, _EPS, 1.0 - _EPS)
        x = np.log(phis) - np.log1p(-phis)
        logits = beta_yr[None, :] + x[:, None]
        # stable log(sigmoid) / log(1 - sigmoid)
        log_p = -np.logaddexp(0.0, -logits)
        log_1mp = -np.logaddexp(0.0, logits)
        return (s_mat[i] * log_p + (t_mat[i] - s_mat[i]) * log_1mp).sum(axis=1)

    return log_f


def update_cluster_params_conjugate(
    state: DpState, successes, trials, rng
) -> DpState:
    """Refresh each cluster value from its conjugate Beta posterior.

    successes/trials are per-individual counts; a cluster with no trials
    falls back to a draw from the base distribution.
    """
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)
    k = state.n_clusters
    s = np.bincount(state.assignments, weights=successes, minlength=k)
    t = np.bincount(state.assignments, weights=trials, minlength=k)
    new = np.clip(
        rng.beta(state.base_a + s, state.base_b + (t - s)), _EPS, 1.0 - _EPS
    )
    return replace(state, cluster_values=new)


def update_cluster_params_mh(
    state: DpState,
    successes_by_season,
    trials_by_season,
    beta_yr,
    rng,
    step: float = 0.4,
) -> DpState:
    """Logit-scale random-walk Metropolis refresh for year-effect clusters.

    The target for each cluster value is its Beta base density times the
    product-Binomial likelihood of the members' per-season counts under
    logistic(beta_yr + logit(phi)); the walk leaves that conditional
    invariant.
    """
    s_mat = np.asarray(successes_by_season, dtype=float)
    t_mat = np.asarray(trials_by_season, dtype=float)
    beta_yr = np.asarray(beta_yr, dtype=float)
    a, b = state.base_a, state.base_b

    def log_target(x, s_tot, t_tot):
        phi = 1.0 / (1.0 + np.exp(-x))
        phi = min(max(phi, _EPS), 1.0 - _EPS)
        # Beta(a, b) density of phi plus the logit-transform Jacobian
        lp = a * np.log(phi) + b * np.log1p(-phi)
        logits = beta_yr + x
        log_p = -np.logaddexp(0.0, -logits)
        log_1mp = -np.logaddexp(0.0, logits)
        return lp + float(np.sum(s_tot * log_p + (t_tot - s_tot) * log_1mp))

    values = state.cluster_values.copy()
    for ci in range(values.size):
        members = state.assignments == ci
        s_tot = s_mat[members].sum(axis=0)
        t_tot = t_mat[members].sum(axis=0)
        x = float(np.log(values[ci]) - np.log1p(-values[ci]))
        x_new = x + step * rng.normal()
        log_acc = log_target(x_new, s_tot, t_tot) - log_target(x, s_tot, t_tot)
        if np.log(rng.random()) < log_acc:
            values[ci] = 1.0 / (1.0 + np.exp(-x_new))
    return replace(state, cluster_values=np.clip(values, _EPS, 1.0 - _EPS))


def sample_eta(alpha: float, n: int, rng) -> float:
    """Auxiliary variable for the concentration update: Beta(alpha + 1, n)."""
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if n < 1:
        raise DomainError(f"need at least one individual, got {n}")
    return float(rng.beta(alpha + 1.0, n))


def alpha_mixture_weight(
    k: int, n: int, eta: float, gamma_prior_a: float, gamma_prior_b: float
) -> float:
    rate = gamma_prior_b - np.log(eta)
    return (gamma_prior_a + k - 1.0) / (n * rate + gamma_prior_a + k - 1.0)


def update_alpha(
    k: int,
    n: int,
    eta: float,
    gamma_prior_a: float,
    gamma_prior_b: float,
    rng,
) -> float:
    """Draw a new concentration from the two-component Gamma mixture."""
    if not 1 <= k <= n:
        raise DomainError(f"cluster count {k} out of range for n={n}")
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    rate = gamma_prior_b - np.log(eta)
    weight = alpha_mixture_weight(k, n, eta, gamma_prior_a, gamma_prior_b)
    if rng.random() < weight:
        shape = gamma_prior_a + k
    else:
        shape = gamma_prior_a + k - 1.0
    return float(max(rng.gamma(shape, 1.0 / rate), _EPS))


def murugiah_hyperparams(n: int) -> tuple[float, float]:
    """Gamma hyperparameters for the concentration prior, scaled with n.

    Equal shape and rate give a prior mean of one; both shrink with the
    population size so the prior loosens as data accumulate.
    """
    if n < 1:
        raise DomainError(f"need at least one individual, got {n}")
    a = float(np.exp(-0.033 * n))
    return a, a


def partition_signature(assignments) -> tuple[tuple[int, ...], ...]:
    """Canonical, label-free representation of a clustering (sorted blocks)."""
    blocks: dict[int, list[int]] = {}
    for i, c in enumerate(np.asarray(assignments)):
        blocks.setdefault(int(c), []).append(i)
    return tuple(sorted(tuple(b) for b in blocks.values()))
