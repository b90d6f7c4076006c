"""Reward generators and regret bookkeeping."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .actions import ActionSet


def split_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """``(environment, policy)`` generators; the two streams never share draws."""
    env_ss, pol_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(pol_ss)


class StochasticEnv:
    """Independent Bernoulli(theta_i) rewards; pseudo-regret uses the known means."""

    def __init__(self, aset: ActionSet, theta, rng: np.random.Generator):
        self.aset = aset
        self.theta = np.asarray(theta, dtype=float)
        if self.theta.shape != (aset.d,):
            raise ValueError(f"theta must have length {aset.d}")
        self.rng = rng
        self.values = aset.enumerate() @ self.theta
        self.best_value = float(self.values.max())

    def gap(self, arm_pos: int) -> float:
        return self.best_value - float(self.values[arm_pos])

    def step(self, arm) -> Tuple[np.ndarray, float]:
        """Draw ``X(n)``; return it masked to the arm's support and the regret increment."""
        x = (self.rng.random(self.aset.d) < self.theta).astype(float)
        arm = np.asarray(arm)
        regret = self.best_value - float(arm @ self.theta)
        return np.where(arm > 0, x, 0.0), regret


class AdversarialEnv:
    """A reward table ``X[n - 1]`` in ``[0, 1]^d`` fixed before the run starts."""

    def __init__(self, table):
        self.table = np.asarray(table, dtype=float)
        if self.table.ndim != 2:
            raise ValueError("reward table must be 2-D (rounds x d)")
        if ((self.table < 0) | (self.table > 1)).any():
            raise ValueError("adversarial rewards must lie in [0, 1]")

    @classmethod
    def constant(cls, x, horizon: int) -> "AdversarialEnv":
        return cls(np.tile(np.asarray(x, dtype=float), (horizon, 1)))

    @classmethod
    def bernoulli(cls, theta, horizon: int, rng: np.random.Generator) -> "AdversarialEnv":
        theta = np.asarray(theta, dtype=float)
        return cls((rng.random((horizon, len(theta))) < theta).astype(float))

    @property
    def horizon(self) -> int:
        return len(self.table)

    def step(self, arm, n: int) -> float:
        """Scalar reward ``M^T X(n)`` for round ``n`` (1-based)."""
        if not 1 <= n <= self.horizon:
            raise IndexError(f"round {n} outside horizon {self.horizon}")
        return float(np.asarray(arm, dtype=float) @ self.table[n - 1])

    def realized_regret(self, aset: ActionSet, played_rewards, upto: Optional[int] = None) -> np.ndarray:
        """Cumulative regret per round against the best fixed arm over the whole table."""
        upto = upto or self.horizon
        table = self.table[:upto]
        best = aset.enumerate()[aset.argmax_linear_index(table.sum(axis=0))].astype(float)
        return np.cumsum(table @ best - np.asarray(played_rewards, dtype=float)[:upto])
