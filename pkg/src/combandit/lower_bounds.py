"""Computable regret lower bounds for stochastic semi-bandits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .actions import ActionSet
from .kl import kl_bernoulli

log = logging.getLogger(__name__)

GAP_TOL = 1e-12


@dataclass(frozen=True)
class Instance:
    """An action set plus Bernoulli means with a unique best arm."""

    aset: ActionSet
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.aset.d,):
            raise ValueError(f"theta must have length {self.aset.d}")
        if ((theta < 0) | (theta > 1)).any():
            raise ValueError("theta must lie in [0, 1]")
        object.__setattr__(self, "theta", theta)
        values = self.aset.enumerate() @ theta
        best = values.max()
        if np.count_nonzero(values >= best - GAP_TOL) > 1:
            raise ValueError("the optimal arm is not unique for this theta")

    @property
    def values(self) -> np.ndarray:
        return self.aset.enumerate() @ self.theta

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.values))

    @property
    def best_arm(self) -> np.ndarray:
        return self.aset.enumerate()[self.best_index]


def gaps(inst: Instance) -> Tuple[np.ndarray, float, float]:
    """Per-arm gaps (canonical order) with the smallest positive and the largest gap."""
    v = inst.values
    delta = v.max() - v
    positive = delta[np.arange(len(delta)) != inst.best_index]
    return delta, float(positive.min()), float(delta.max())


def maximal_pset(inst: Instance) -> List[int]:
    """Greedy maximal family of suboptimal arms with pairwise disjoint off-optimum supports.

    Arms are offered by increasing number of actions outside the best arm, and in
    canonical order within a size. Returns canonical arm positions.
    """
    arms = inst.aset.enumerate().astype(bool)
    star = arms[inst.best_index]
    off = arms & ~star
    sizes = off.sum(axis=1)
    used = np.zeros(inst.aset.d, dtype=bool)
    chosen = []
    for k in np.lexsort((np.arange(len(arms)), sizes)):
        if k == inst.best_index or sizes[k] == 0:
            continue
        if not (off[k] & used).any():
            chosen.append(int(k))
            used |= off[k]
    return chosen


def has_property_p(inst: Instance, members) -> bool:
    arms = inst.aset.enumerate().astype(bool)
    star = arms[inst.best_index]
    for a_pos, i in enumerate(members):
        for j in members[a_pos + 1:]:
            if (arms[i] & arms[j] & ~star).any():
                return False
    return True


def simplified_bound(inst: Instance, members=None) -> float:
    """``sum_{M in H} beta / max_{i in M \\ M*} kl(theta_i, mean of theta over M* \\ M, per |M \\ M*|)``."""
    if members is None:
        members = maximal_pset(inst)
    if not members:
        log.warning("no suboptimal arm with property P; bound is 0")
        return 0.0
    arms = inst.aset.enumerate().astype(bool)
    star = arms[inst.best_index]
    theta = inst.theta
    delta, _, _ = gaps(inst)
    n_off = (arms & ~star).sum(axis=1)
    sub = np.arange(len(arms)) != inst.best_index
    beta = float(np.min(delta[sub] / n_off[sub]))
    total = 0.0
    for k in members:
        out = np.flatnonzero(arms[k] & ~star)
        missing = np.flatnonzero(star & ~arms[k])
        ref = theta[missing].sum() / len(out)
        worst = max(kl_bernoulli(theta[i], ref) for i in out)
        total += beta / worst
    return total


def matching_closed_form(m: int, a: float, b: float) -> float:
    """``m (m - 1) (a - b) / (2 kl(b, a))`` for matchings with means a on M* and b elsewhere."""
    return m * (m - 1) * (a - b) / (2.0 * kl_bernoulli(b, a))


def disjoint_paths_bound(d: int, m: int, delta: float) -> float:
    """``(d - m) / (4 delta)`` for ``d / m`` disjoint paths of ``m`` links."""
    if d % m:
        raise ValueError("d must be a multiple of m")
    if delta <= 0:
        raise ValueError("gap must be positive")
    return (d - m) / (4.0 * delta)
