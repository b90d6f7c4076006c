"""Bernoulli KL divergence and the line search behind the ESCB-1 index."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

__all__ = [
    "LineSearchInput",
    "BracketError",
    "kl_bernoulli",
    "kl_derivative",
    "g_root",
    "line_search_value",
    "solve_budget",
]

_EXPAND = 4.0
_MAX_EXPAND = 200
_MAX_BISECT = 400


class BracketError(RuntimeError):
    """No bracket around the budget was found by geometric expansion."""


@dataclass(frozen=True)
class LineSearchInput:
    """Pairs ``(mean, count)`` over the non-saturated actions of an arm, plus the budget."""

    pairs: Tuple[Tuple[float, int], ...]
    budget: float

    def __post_init__(self):
        pairs = tuple((float(p), int(c)) for p, c in self.pairs)
        for p, c in pairs:
            if not 0.0 <= p < 1.0:
                raise ValueError(f"mean must lie in [0, 1), got {p}")
            if c < 1:
                raise ValueError(f"count must be >= 1, got {c}")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        object.__setattr__(self, "pairs", pairs)


def kl_bernoulli(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), with 0 log 0 = 0.

    Returns ``inf`` when q sits on the boundary and p does not match it.
    """
    return _kl_step(p, q, 1.0 - q, q - p)


def _kl_step(p: float, q: float, r: float, d: float) -> float:
    # kl(p, q) from q, r = 1 - q and d = q - p; passing d once makes the
    # first-order terms of the two logarithms cancel exactly near q = p
    if d == 0.0:
        return 0.0
    out = 0.0
    if p > 0.0:
        if q <= 0.0:
            return math.inf
        if abs(d) < 0.5 * p:
            out -= p * math.log1p(d / p)
        else:
            out += p * (math.log(p) - math.log(q))
    if p < 1.0:
        if r <= 0.0:
            return math.inf
        if abs(d) < 0.5 * (1.0 - p):
            out -= (1.0 - p) * math.log1p(-d / (1.0 - p))
        else:
            out += (1.0 - p) * (math.log1p(-p) - math.log(r))
    return max(out, 0.0)


def kl_derivative(p: float, q: float) -> float:
    """Derivative of ``kl(p, q)`` in its second argument."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie strictly inside (0, 1), got {q}")
    return (q - p) / (q * (1.0 - q))


def g_root(lam: float, w: float, v: float) -> float:
    """Larger root of ``q^2 + q (lam v - 1) - lam v w = 0``.

    The two branches avoid cancellation when ``lam * v`` is large.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    return _g_parts(lam, w, v)[0]


def _g_parts(lam: float, w: float, v: float) -> Tuple[float, float, float]:
    # (q, 1 - q, q - w), each without cancellation: the complement solves
    # r^2 - r (1 + lam v) + lam v (1 - w) = 0, and q (1 - q) = lam v (q - w)
    lv = lam * v
    b = 1.0 - lv
    disc = math.sqrt(b * b + 4.0 * w * lv)
    if b >= 0.0:
        q = 0.5 * (b + disc)
    else:
        denom = disc - b
        q = 2.0 * lv * w / denom if denom > 0.0 else 0.0
    q = min(max(q, w), 1.0)
    r = min(max(2.0 * lv * (1.0 - w) / (1.0 + lv + disc), 0.0), 1.0 - w)
    d = min(q * r / lv, 1.0 - w) if lv > 0.0 else 1.0 - w
    return q, r, d


def line_search_value(inp: LineSearchInput | Sequence[Tuple[float, int]], lam: float) -> float:
    """``sum_i count_i * kl(mean_i, g(lam, mean_i, count_i))``."""
    pairs = inp.pairs if isinstance(inp, LineSearchInput) else inp
    if not pairs:
        raise ValueError("line search needs at least one (mean, count) pair")
    return math.fsum(c * _kl_step(p, *_g_parts(lam, p, c)) for p, c in pairs)


def _orientation(resid, r1):
    # F is flat (zero) wherever every g has collapsed onto its mean, so probe
    # outward from lam=1 until some evaluation differs from the one at lam=1
    for k in range(1, _MAX_EXPAND + 1):
        up, down = resid(_EXPAND**k), resid(_EXPAND**-k)
        if up != r1 or down != r1:
            return up < r1 or down > r1
    raise BracketError("line search function is constant")


def solve_budget(inp: LineSearchInput, tolerance: float = 1e-9) -> float:
    """Find ``lam`` with ``|line_search_value(inp, lam) - inp.budget| <= tolerance``.

    The bracket is grown geometrically from ``lam = 1``; the orientation of the
    function is read off two evaluations instead of being assumed.
    """
    if inp.budget <= 0:
        raise ValueError("budget must be positive")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    target = inp.budget
    # relative for small budgets, else the index can overshoot sqrt(budget)-sized bonuses
    tolerance *= min(1.0, target)

    def resid(lam):
        return line_search_value(inp, lam) - target

    lo = hi = 1.0
    r1 = resid(1.0)
    if abs(r1) <= tolerance:
        return 1.0
    decreasing = _orientation(resid, r1)
    # step away from lam=1 in the direction that moves the residual toward 0
    go_up = (r1 > 0) == decreasing
    r_lo = r_hi = r1
    lam, r = 1.0, r1
    for _ in range(_MAX_EXPAND):
        lam = lam * _EXPAND if go_up else lam / _EXPAND
        r = resid(lam)
        if (r > 0) != (r1 > 0) or r == 0:
            break
    else:
        raise BracketError(f"no bracket within {_MAX_EXPAND} expansions (budget={target})")
    if go_up:
        lo, hi, r_lo, r_hi = lam / _EXPAND, lam, resid(lam / _EXPAND), r
    else:
        lo, hi, r_lo, r_hi = lam, lam * _EXPAND, r, resid(lam * _EXPAND)
    if abs(r_lo) <= tolerance:
        return lo
    if abs(r_hi) <= tolerance:
        return hi

    best, best_r = (lo, r_lo) if abs(r_lo) < abs(r_hi) else (hi, r_hi)
    for _ in range(_MAX_BISECT):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
        r_mid = resid(mid)
        if abs(r_mid) < abs(best_r):
            best, best_r = mid, r_mid
        if abs(r_mid) <= tolerance:
            return mid
        if (r_mid > 0) == (r_lo > 0):
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    return best
