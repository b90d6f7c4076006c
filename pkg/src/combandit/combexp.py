"""CombEXP: exponential weights over the scaled convex hull, with bandit feedback.

Each round mixes the current occupancy point with the uniform-arm occupancy,
writes the mixture as a distribution over arms, samples an arm, builds a
pseudo-inverse reward estimate from the scalar reward, tilts the occupancy
exponentially and projects it back onto the hull in KL divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from .actions import ActionSet

__all__ = [
    "ArmDistribution",
    "CombExpParams",
    "CombEXP",
    "DecompositionError",
    "ProjectionError",
    "decompose",
    "estimate",
    "exp_update",
    "kl_divergence",
    "mix",
    "pinv_sym",
    "project",
    "second_moment",
]

PINV_RTOL = 1e-10
RESIDUAL_FLOOR = 1e-6
MAX_SWEEPS = 100_000
TOL_FLOOR = 1e-14
PROJECTABLE = ("m-sets", "bipartite-matchings")


class DecompositionError(ValueError):
    def __init__(self, residual: float):
        super().__init__(f"target is not in the hull: decomposition residual {residual:.3e}")
        self.residual = residual


class ProjectionError(RuntimeError):
    def __init__(self, residual: float, sweeps: int):
        super().__init__(f"projection did not converge after {sweeps} sweeps "
                         f"(constraint residual {residual:.3e})")
        self.residual = residual
        self.sweeps = sweeps


@dataclass
class ArmDistribution:
    """Atoms ``arms[k]`` (rows, 0/1) with probabilities ``weights[k]``."""

    arms: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.arms


@dataclass(frozen=True)
class CombExpParams:
    gamma: float
    eta: float
    C: float
    horizon: int
    mu_min: float
    lambda_lower: float
    eps0_scale: float = 1.0 / 32.0

    @classmethod
    def from_constants(cls, m: int, d: int, mu_min: float, lambda_lower: float,
                       horizon: int, gamma: Optional[float] = None) -> "CombExpParams":
        """Step sizes as functions of ``(m, d, mu_min, lambda_lower, T)``.

        ``gamma`` overrides the mixing weight; ``eta = gamma * C`` either way.
        """
        C = lambda_lower / m**1.5
        if gamma is None:
            a = math.sqrt(m * math.log(1.0 / mu_min))
            gamma = a / (a + math.sqrt(C * (C * m * m * d + m) * horizon))
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        return cls(gamma=gamma, eta=gamma * C, C=C, horizon=horizon,
                   mu_min=mu_min, lambda_lower=lambda_lower)

    @classmethod
    def for_set(cls, aset: ActionSet, horizon: int, gamma: Optional[float] = None):
        mu_min, lam = aset.spectral_constants()
        return cls.from_constants(aset.m, aset.d, mu_min, lam, horizon, gamma)

    def epsilon(self, n: int, q_min: float) -> float:
        """Projection accuracy for round ``n`` given the smallest coordinate of ``q``."""
        num = (q_min * math.log(1.0 / self.mu_min)) ** 2
        return self.eps0_scale * num / (n * n * math.log(n + 1.0) ** 3)


def kl_divergence(p, q) -> float:
    """``sum_i p_i log(p_i / q_i)`` on nonnegative vectors (0 log 0 = 0)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0
    if (q[mask] <= 0).any():
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def mix(q, mu0, gamma: float) -> np.ndarray:
    return (1.0 - gamma) * np.asarray(q, dtype=float) + gamma * np.asarray(mu0, dtype=float)


# -- decomposition -----------------------------------------------------------

def decompose(aset: ActionSet, target, residual_floor: float = RESIDUAL_FLOOR) -> ArmDistribution:
    """Write ``m * target`` as a convex combination of at most ``d + 1`` arms."""
    target = np.asarray(target, dtype=float)
    x = aset.m * target
    if aset.kind == "bipartite-matchings":
        dist = _birkhoff(aset, x)
    elif aset.kind == "m-sets":
        dist = _systematic(aset, x)
    else:
        dist = _generic(aset, x)
    residual = float(np.max(np.abs(dist.mean() - x))) if len(dist) else math.inf
    if residual > residual_floor:
        raise DecompositionError(residual)
    return dist


def _birkhoff(aset: ActionSet, x: np.ndarray) -> ArmDistribution:
    rest = x.astype(float).copy()
    zero = 1e-13
    rest[rest < zero] = 0.0
    arms, weights = [], []
    while len(arms) < aset.d + 1 and rest.max() > zero:
        arm = aset.argmax_linear((rest > 0).astype(float))
        cells = arm.astype(bool)
        if not (rest[cells] > 0).all():
            break  # no perfect matching left on the support
        w = float(rest[cells].min())
        arms.append(arm)
        weights.append(w)
        rest[cells] -= w
        rest[rest < zero] = 0.0
    return _normalized(arms, weights, aset.d)


def _systematic(aset: ActionSet, x: np.ndarray) -> ArmDistribution:
    # lay the coordinates end to end on [0, m); each offset u in [0, 1) picks
    # the m intervals containing u, u+1, ..., u+m-1
    m = aset.m
    x = np.clip(x, 0.0, 1.0)
    x *= m / x.sum()
    x = np.clip(x, 0.0, 1.0)
    edges = np.concatenate(([0.0], np.cumsum(x)))
    edges[-1] = m
    breaks = np.unique(np.concatenate(([0.0, 1.0], np.mod(edges, 1.0))))
    arms, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 0:
            continue
        u = 0.5 * (lo + hi) + np.arange(m)
        picked = np.searchsorted(edges, u, side="right") - 1
        arm = np.zeros(aset.d, dtype=np.uint8)
        arm[np.clip(picked, 0, aset.d - 1)] = 1
        if arm.sum() != m:
            continue
        arms.append(arm)
        weights.append(hi - lo)
    return _merge(arms, weights, aset.d)


def _generic(aset: ActionSet, x: np.ndarray) -> ArmDistribution:
    A = aset.enumerate().astype(float)
    lhs = np.vstack([A.T, np.ones(len(A))])
    rhs = np.concatenate([x, [1.0]])
    w, _ = nnls(lhs, rhs, maxiter=50 * len(A))
    support = np.flatnonzero(w > 1e-14)
    w = w[support]
    # Caratheodory pruning: walk along affine dependencies until the support is independent
    while len(support) > aset.d + 1 or _rank(lhs[:, support]) < len(support):
        sub = lhs[:, support]
        null = np.linalg.svd(sub)[2][-1]
        if not (null > 0).any():
            null = -null
        ratio = np.where(null > 1e-15, w / np.where(null > 1e-15, null, 1.0), np.inf)
        k = int(np.argmin(ratio))
        w = w - ratio[k] * null
        w[k] = 0.0
        keep = w > 1e-14
        support, w = support[keep], w[keep]
    return _normalized([A[i].astype(np.uint8) for i in support], list(w), aset.d)


def _rank(mat):
    return np.linalg.matrix_rank(mat, tol=1e-10)


def _merge(arms, weights, d):
    seen = {}
    for arm, w in zip(arms, weights):
        key = arm.tobytes()
        if key in seen:
            seen[key][1] += w
        else:
            seen[key] = [arm, w]
    return _normalized([a for a, _ in seen.values()], [w for _, w in seen.values()], d)


def _normalized(arms, weights, d):
    if not arms:
        return ArmDistribution(np.zeros((0, d), dtype=np.uint8), np.zeros(0))
    w = np.asarray(weights, dtype=float)
    return ArmDistribution(np.asarray(arms, dtype=np.uint8), w / w.sum())


# -- estimation ----------------------------------------------------------------

def second_moment(dist: ArmDistribution) -> np.ndarray:
    A = dist.arms.astype(float)
    return (A * dist.weights[:, None]).T @ A


def pinv_sym(S: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix via its eigendecomposition."""
    vals, vecs = np.linalg.eigh(S)
    keep = vals > rtol * max(vals[-1], 0.0)
    if not keep.any():
        return np.zeros_like(S)
    v = vecs[:, keep]
    return (v / vals[keep]) @ v.T


def estimate(dist: ArmDistribution, played, reward: float,
             sigma_pinv: Optional[np.ndarray] = None) -> np.ndarray:
    """``reward * pinv(E[M M^T]) @ played`` for ``M`` drawn from ``dist``."""
    if sigma_pinv is None:
        sigma_pinv = pinv_sym(second_moment(dist))
    return reward * (sigma_pinv @ np.asarray(played, dtype=float))


def exp_update(q, est, eta: float) -> np.ndarray:
    """``q_i exp(eta * est_i)``, normalized to sum 1."""
    q = np.asarray(q, dtype=float)
    z = eta * np.asarray(est, dtype=float)
    z -= z.max()
    out = q * np.exp(z)
    return out / out.sum()


# -- projection ------------------------------------------------------------------

def project(aset: ActionSet, qtilde, epsilon: float, max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """KL projection of a positive vector onto ``Co(M) / m``."""
    q = np.asarray(qtilde, dtype=float)
    if (q <= 0).any():
        raise ValueError("projection input must be strictly positive")
    eps = max(float(epsilon), TOL_FLOOR)
    if aset.kind == "m-sets":
        return _project_capped_simplex(q, 1.0 / aset.m)
    if aset.kind == "bipartite-matchings":
        return _sinkhorn(q, aset.m, eps, max_sweeps)
    raise NotImplementedError(f"KL projection is available for {PROJECTABLE}, not {aset.kind!r}")


def _project_capped_simplex(q: np.ndarray, cap: float) -> np.ndarray:
    # minimizer has the form min(c * q_i, cap); find c by scanning the capped prefix
    order = np.argsort(-q, kind="stable")
    qs = q[order]
    tail = np.concatenate((np.cumsum(qs[::-1])[::-1], [0.0]))
    d = len(q)
    for k in range(d):
        c = (1.0 - k * cap) / tail[k]
        if c * qs[k] <= cap and (k == 0 or c * qs[k - 1] >= cap):
            break
    out = np.minimum(c * q, cap)
    return out / out.sum()


def _sinkhorn(q: np.ndarray, m: int, eps: float, max_sweeps: int) -> np.ndarray:
    P = q.reshape(m, m) / q.sum()
    target = 1.0 / m
    for sweep in range(1, max_sweeps + 1):
        prev = P
        P = P * (target / P.sum(axis=1))[:, None]
        P = P * (target / P.sum(axis=0))[None, :]
        resid = float(np.abs(P.sum(axis=1) - target).max())
        moved = float(np.abs(P - prev).sum())
        if resid <= eps and moved <= eps / 10:
            return P.ravel()
    raise ProjectionError(resid, max_sweeps)


# -- the policy --------------------------------------------------------------------

class CombEXP:
    """Adversarial bandit-feedback policy. ``select`` then ``update(reward)`` each round."""

    name = "CombEXP"

    def __init__(self, aset: ActionSet, horizon: int, rng: np.random.Generator,
                 gamma: Optional[float] = None, eps0_scale: Optional[float] = None):
        if aset.kind not in PROJECTABLE:
            raise ValueError(f"CombEXP supports {PROJECTABLE}, not {aset.kind!r}")
        self.aset = aset
        self.params = CombExpParams.for_set(aset, horizon, gamma)
        if eps0_scale is not None:
            self.params = CombExpParams(**{**self.params.__dict__, "eps0_scale": eps0_scale})
        self.rng = rng
        self.mu0 = aset.mu0()
        self.q = self.mu0.copy()
        self.n = 0
        self._dist: Optional[ArmDistribution] = None
        self._played: Optional[np.ndarray] = None

    def distribution(self) -> ArmDistribution:
        return decompose(self.aset, mix(self.q, self.mu0, self.params.gamma))

    def select(self) -> np.ndarray:
        self._dist = self.distribution()
        u = self.rng.random()
        k = int(np.searchsorted(np.cumsum(self._dist.weights), u, side="right"))
        k = min(k, len(self._dist) - 1)
        self._played = self._dist.arms[k]
        return self._played

    def update(self, reward: float) -> None:
        self.n += 1
        est = estimate(self._dist, self._played, reward)
        qtilde = exp_update(self.q, est, self.params.eta)
        eps = self.params.epsilon(self.n, float(self.q.min()))
        self.q = project(self.aset, qtilde, eps)

    def describe(self):
        p = self.params
        return {"policy": self.name, "gamma": p.gamma, "eta": p.eta, "C": p.C}
