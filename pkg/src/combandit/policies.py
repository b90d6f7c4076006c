"""Index policies for stochastic semi-bandit feedback: ESCB-1/2, Epoch-ESCB, CUCB, LLR."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import kernels
from .actions import AUTO_ENUM_LIMIT, ActionSet
from .kl import LineSearchInput, g_root, solve_budget
from .state import BanditState

INDEX_TOL = 1e-9

# per-action bonus constants of the UCB-style baselines
CUCB_BONUS = 1.5
LLR_BONUS_OFFSET = 1


@dataclass(frozen=True)
class ExplorationRate:
    """``f(n)``: ``log n + 4 m log log n`` (theoretical) or ``log n`` (practical)."""

    mode: str = "practical"
    m: int = 1

    def __post_init__(self):
        if self.mode not in ("theoretical", "practical"):
            raise ValueError(f"rate mode must be 'theoretical' or 'practical', got {self.mode!r}")

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValueError("round index starts at 1")
        ln = math.log(n)
        if self.mode == "practical":
            return ln
        # log log n is negative below n = e; clamp so f stays defined and nonnegative
        return ln + 4 * self.m * math.log(max(1.0, ln))


def index_c(state: BanditState, arm, f_n: float) -> float:
    idx = np.flatnonzero(np.asarray(arm))
    t = state.counts[idx]
    if (t == 0).any():
        return math.inf
    return float(state.means[idx].sum() + math.sqrt(0.5 * f_n * np.sum(1.0 / t)))


def kl_index_maximizer(state: BanditState, arm, f_n: float,
                       tol: float = INDEX_TOL) -> Tuple[float, Optional[np.ndarray]]:
    """KL index of ``arm`` and the maximizing ``q`` (``None`` when the index is infinite).

    Coordinates outside the arm are returned as the empirical means.
    """
    idx = np.flatnonzero(np.asarray(arm))
    if (state.counts[idx] == 0).any():
        return math.inf, None
    q = state.means.copy()
    free = [i for i in idx if state.means[i] < 1.0]
    saturated = len(idx) - len(free)
    if not free:
        return float(saturated), q
    if f_n <= 0:
        return float(saturated + state.means[free].sum()), q
    pairs = tuple((float(state.means[i]), int(state.counts[i])) for i in free)
    lam = solve_budget(LineSearchInput(pairs, f_n), tol)
    for i, (p, c) in zip(free, pairs):
        q[i] = g_root(lam, p, c)
    return float(saturated + q[free].sum()), q


def index_b(state: BanditState, arm, f_n: float, tol: float = INDEX_TOL) -> float:
    return kl_index_maximizer(state, arm, f_n, tol)[0]


class Policy:
    """Base class. Subclasses keep a :class:`BanditState` and pick arm positions."""

    name = "policy"

    def __init__(self, aset: ActionSet, rate: Optional[ExplorationRate] = None):
        self.aset = aset
        self.rate = rate or ExplorationRate("practical", aset.m)
        self.arms = aset.enumerate()
        self.indptr, self.indices = aset.csr()
        self.state = BanditState(aset.d)

    def reset(self) -> None:
        self.state = BanditState(self.aset.d)

    def select(self) -> int:
        raise NotImplementedError

    def update(self, arm_pos: int, rewards) -> None:
        self.state.update(self.arms[arm_pos], rewards)

    def _linear_best(self, weights) -> int:
        if len(self.arms) <= AUTO_ENUM_LIMIT:
            return self.aset.argmax_linear_index(weights)
        return self.aset.arm_index(self.aset.argmax_linear(weights, method="structure"))

    def describe(self) -> Dict[str, object]:
        return {"policy": self.name, "rate": self.rate.mode}


def escb_argmax(aset: ActionSet, state: BanditState, f_n: float, index: str,
                tol: float = INDEX_TOL) -> int:
    """Exhaustive index argmax over the enumerated arms (ties: canonical order)."""
    indptr, indices = aset.csr()
    c = kernels.c_indexes(indptr, indices, state.means, state.counts, f_n)
    if index == "c":
        return int(np.argmax(c))
    # b <= c, so arms are visited by decreasing c and the sweep stops early
    order = np.argsort(-c, kind="stable").astype(np.int64)
    best, _, _ = kernels.b_argmax_pruned(indptr, indices, state.means, state.counts,
                                         f_n, tol, order, c)
    return int(best)


class ESCB(Policy):
    """ESCB-1 (``index="b"``, KL index) or ESCB-2 (``index="c"``)."""

    def __init__(self, aset, rate=None, index: str = "b", tol: float = INDEX_TOL):
        super().__init__(aset, rate)
        if index not in ("b", "c"):
            raise ValueError("index must be 'b' or 'c'")
        self.index = index
        self.tol = tol
        self.name = "ESCB1" if index == "b" else "ESCB2"

    def select(self) -> int:
        f_n = self.rate(self.state.round + 1)
        return escb_argmax(self.aset, self.state, f_n, self.index, self.tol)


class EpochESCB(Policy):
    """Index argmax at epoch starts, empirical leader inside epochs.

    An epoch doubles in length when the index argmax agrees with the leader and
    shrinks to one round otherwise.
    """

    name = "EpochESCB"

    def __init__(self, aset, rate=None, index: str = "c", tol: float = INDEX_TOL):
        super().__init__(aset, rate)
        self.index = index
        self.tol = tol
        self._init_epochs()

    def _init_epochs(self):
        self.k = 1
        self.n_prev = 1  # N_{k-1}
        self.n_next = 1  # N_k
        self.boundaries = []

    def reset(self) -> None:
        super().reset()
        self._init_epochs()

    @property
    def n_epochs(self) -> int:
        return len(self.boundaries)

    def next_boundary(self, agree: bool) -> int:
        gap = self.n_next - self.n_prev
        # N_0 = N_1 leaves a zero first gap; epochs last at least one round
        new_gap = max(1, 2 * gap) if agree else 1
        return self.n_next + new_gap

    def select(self) -> int:
        n = self.state.round + 1
        leader = self._linear_best(self.state.means)
        if n != self.n_next:
            return leader
        f_n = self.rate(n)
        choice = escb_argmax(self.aset, self.state, f_n, self.index, self.tol)
        upcoming = self.next_boundary(choice == leader)
        self.boundaries.append(n)
        self.n_prev, self.n_next = self.n_next, upcoming
        self.k += 1
        return choice

    def describe(self):
        return {**super().describe(), "index": self.index}


class _PerActionUCB(Policy):
    def bonus_scale(self) -> float:
        raise NotImplementedError

    def select(self) -> int:
        n = self.state.round + 1
        t = self.state.counts
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.state.means + np.sqrt(self.bonus_scale() * math.log(n) / t)
        u[t == 0] = math.inf
        return self._linear_best(u)


class CUCB(_PerActionUCB):
    """Per-action index ``mean_i + sqrt(1.5 log n / t_i)`` fed to the linear oracle."""

    name = "CUCB"

    def bonus_scale(self):
        return CUCB_BONUS


class LLR(_PerActionUCB):
    """Per-action index ``mean_i + sqrt((m + 1) log n / t_i)`` fed to the linear oracle."""

    name = "LLR"

    def bonus_scale(self):
        return self.aset.m + LLR_BONUS_OFFSET


STOCHASTIC_POLICIES = ("ESCB1", "ESCB2", "EpochESCB", "CUCB", "LLR")


def make_policy(name: str, aset: ActionSet, rate: ExplorationRate, **options) -> Policy:
    if name == "ESCB1":
        return ESCB(aset, rate, index="b", **options)
    if name == "ESCB2":
        return ESCB(aset, rate, index="c", **options)
    if name == "EpochESCB":
        return EpochESCB(aset, rate, **options)
    if name == "CUCB":
        return CUCB(aset, rate)
    if name == "LLR":
        return LLR(aset, rate)
    raise ValueError(f"unknown stochastic policy {name!r}; expected one of {STOCHASTIC_POLICIES}")
