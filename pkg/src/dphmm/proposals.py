"""Metropolis-Hastings proposal helpers.

Each proposal starts life as a symmetric Gaussian random walk. During the
burn-in window the engine feeds it the accepted states; at the end of burn-in
it is frozen, and if enough states were observed it switches to an
independence proposal (Normal, or multivariate t with a few degrees of
freedom) moment-matched to what the walk explored. After the freeze no
proposal parameter ever changes, so the post-burn-in kernel is a fixed,
valid MH kernel.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import multivariate_normal, multivariate_t


class AdaptiveProposal:
    def __init__(
        self,
        dim: int,
        rw_scale=0.25,
        df: float | None = None,
        min_samples: int = 100,
        inflate: float = 1.5,
    ):
        self.dim = dim
        self.rw_scale = np.broadcast_to(np.asarray(rw_scale, float), (dim,)).copy()
        self.df = df
        self.min_samples = min_samples
        self.inflate = inflate
        self.frozen = False
        self.independent = False
        self._dist = None
        self._count = 0
        self._mean = np.zeros(dim)
        self._m2 = np.zeros((dim, dim))

    def observe(self, x) -> None:
        """Accumulate moments of an accepted state (burn-in only)."""
        if self.frozen:
            raise RuntimeError("proposal is frozen")
        x = np.asarray(x, dtype=float)
        self._count += 1
        delta = x - self._mean
        self._mean += delta / self._count
        self._m2 += np.outer(delta, x - self._mean)

    def freeze(self) -> bool:
        """Stop adapting; switch to an independence proposal when the
        accumulated moments are trustworthy. Returns True on switch."""
        if self.frozen:
            return False
        self.frozen = True
        if self._count < max(self.min_samples, self.dim + 2):
            return False
        cov = self._m2 / (self._count - 1)
        cov = cov * self.inflate**2 + 1e-8 * np.eye(self.dim)
        if self.df is None:
            self._dist = multivariate_normal(mean=self._mean, cov=cov)
        else:
            self._dist = multivariate_t(loc=self._mean, shape=cov, df=self.df)
        self.independent = True
        return True

    def propose(self, x, rng):
        """Return (candidate, log q(x) - log q(candidate)).

        The second term is the Hastings correction to add to the log
        acceptance ratio; it is zero for the symmetric walk.
        """
        x = np.asarray(x, dtype=float)
        if self.independent:
            cand = np.atleast_1d(
                self._dist.rvs(random_state=rng)
            ).astype(float)
            return cand, float(self._dist.logpdf(x) - self._dist.logpdf(cand))
        cand = x + self.rw_scale * rng.normal(size=self.dim)
        return cand, 0.0
