"""Shared oracles and fixtures.

The enumeration and quadrature helpers here are written independently of the
package internals (plain itertools / numpy sums) so they can serve as oracles
for the forward-backward and Dirichlet-process code.
"""

import itertools
import math

import numpy as np
import pytest
from scipy.special import betaln

HERE, AWAY, DEAD = 0, 1, 2

_acceptance_lines = []


@pytest.fixture(scope="session")
def criterion_report():
    """One pass/fail line per acceptance criterion, echoed in the summary."""

    def _report(num, name, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {num}: {name}"
        if detail:
            line += f" ({detail})"
        _acceptance_lines.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


# -- path-space enumeration oracle ------------------------------------------


def exact_path_posterior(obs, step_mats, pi, n_states):
    """Posterior over latent paths given a history, by brute force.

    obs is a 0/1 sequence starting with 1; step_mats is (T-1, S, S). The
    chain is conditioned on state Here at t=0 and the t=0 emission is not
    part of the conditional likelihood, matching the model's convention.
    Returns (dict path -> probability, log evidence).
    """
    obs = list(obs)
    t_total = len(obs)
    probs = {}
    for tail in itertools.product(range(n_states), repeat=t_total - 1):
        path = (HERE,) + tail
        w = 1.0
        for t in range(1, t_total):
            s = path[t]
            w *= step_mats[t - 1][path[t - 1], s]
            e = pi if s == HERE else 0.0
            w *= e if obs[t] == 1 else 1.0 - e
            if w == 0.0:
                break
        if w > 0.0:
            probs[path] = w
    z = sum(probs.values())
    return {p: w / z for p, w in probs.items()}, math.log(z)


def tv_distance(d1, d2):
    keys = set(d1) | set(d2)
    return 0.5 * sum(abs(d1.get(k, 0.0) - d2.get(k, 0.0)) for k in keys)


def empirical_path_dist(paths):
    """paths: (n_draws, T) integer array -> dict path tuple -> frequency."""
    paths = np.asarray(paths)
    uniq, counts = np.unique(paths, axis=0, return_counts=True)
    total = counts.sum()
    return {tuple(int(s) for s in row): c / total for row, c in zip(uniq, counts)}


# -- Beta-Binomial partition oracle -----------------------------------------


def beta_marginal(s, f, a, b):
    """Integral of phi^s (1-phi)^f against Beta(a, b)."""
    return math.exp(betaln(a + s, b + f) - betaln(a, b))


def set_partitions(n):
    """All set partitions of range(n) as tuples of sorted blocks."""
    if n == 1:
        return [((0,),)]
    out = []
    for part in set_partitions(n - 1):
        for j in range(len(part)):
            blocks = [list(b) for b in part]
            blocks[j].append(n - 1)
            out.append(tuple(sorted(tuple(b) for b in blocks)))
        out.append(tuple(sorted(list(part) + [(n - 1,)])))
    return sorted(set(out))


def partition_posterior(counts, alpha, a, b):
    """Exact posterior over set partitions for Beta-Binomial count data.

    counts: list of (successes, trials) per individual. The prior over
    partitions is the CRP EPPF alpha^K prod (|block|-1)!; marginal
    likelihood integrates each block's shared phi against Beta(a, b).
    """
    n = len(counts)
    post = {}
    for part in set_partitions(n):
        w = 1.0
        for block in part:
            w *= alpha * math.factorial(len(block) - 1)
            s = sum(counts[i][0] for i in block)
            t = sum(counts[i][1] for i in block)
            w *= beta_marginal(s, t - s, a, b)
        post[part] = w
    z = sum(post.values())
    return {p: w / z for p, w in post.items()}


def crp_partition_prior(n, alpha):
    """CRP prior over set partitions of n customers (EPPF)."""
    prior = {}
    for part in set_partitions(n):
        w = 1.0
        for block in part:
            w *= alpha * math.factorial(len(block) - 1)
        prior[part] = w
    z = sum(prior.values())
    return {p: w / z for p, w in prior.items()}
