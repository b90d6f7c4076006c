"""Combinatorial bandits with linear rewards.

Stochastic semi-bandit policies (ESCB-1, ESCB-2, Epoch-ESCB, CUCB, LLR),
the adversarial CombEXP policy, action-set backends, lower-bound
calculators and a seeded experiment harness.
"""

from .actions import ActionSet, disjoint_paths, matchings, m_sets, spanning_trees
from .kernels import BACKEND
from .kl import g_root, kl_bernoulli, kl_derivative, line_search_value, solve_budget
from .policies import ExplorationRate, index_b, index_c
from .state import BanditState

__all__ = [
    "ActionSet",
    "BACKEND",
    "BanditState",
    "ExplorationRate",
    "disjoint_paths",
    "g_root",
    "index_b",
    "index_c",
    "kl_bernoulli",
    "kl_derivative",
    "line_search_value",
    "m_sets",
    "matchings",
    "solve_budget",
    "spanning_trees",
]
