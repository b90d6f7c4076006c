"""Semi-bandit sufficient statistics: pull counts, empirical means, round counter."""

from __future__ import annotations

import numpy as np


class BanditState:
    """Per-action counts ``t_i`` and running means; actions never pulled have mean 0."""

    __slots__ = ("counts", "means", "round")

    def __init__(self, d: int):
        self.counts = np.zeros(d, dtype=np.int64)
        self.means = np.zeros(d, dtype=float)
        self.round = 0

    @property
    def d(self) -> int:
        return len(self.counts)

    def copy(self) -> "BanditState":
        other = BanditState(self.d)
        other.counts[:] = self.counts
        other.means[:] = self.means
        other.round = self.round
        return other

    def update(self, arm, rewards) -> "BanditState":
        """Fold in one round of semi-bandit feedback; coordinates off the arm are ignored."""
        idx = np.flatnonzero(np.asarray(arm))
        x = np.asarray(rewards, dtype=float)[idx]
        self.counts[idx] += 1
        self.means[idx] += (x - self.means[idx]) / self.counts[idx]
        np.clip(self.means, 0.0, 1.0, out=self.means)
        self.round += 1
        return self

    @classmethod
    def replay(cls, d: int, history) -> "BanditState":
        """Recompute counts and means from ``(arm, rewards)`` pairs with exact sums."""
        sums = np.zeros(d)
        counts = np.zeros(d, dtype=np.int64)
        n = 0
        for arm, rewards in history:
            mask = np.asarray(arm, dtype=bool)
            counts[mask] += 1
            sums[mask] += np.asarray(rewards, dtype=float)[mask]
            n += 1
        state = cls(d)
        state.counts[:] = counts
        np.divide(sums, counts, out=state.means, where=counts > 0)
        state.round = n
        return state
