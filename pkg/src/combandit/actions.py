"""Combinatorial action sets: enumeration, linear maximization, spectral constants.

Arms are 0/1 vectors of length ``d``. Every set enumerates its arms in one
canonical order, lexicographic on the bit string read left to right with ones
first (equivalently: ascending sorted support tuples), and every tie between
arms is broken in favour of the arm that comes first in that order.

Basic-action layouts:

* m-sets: action ``i`` is item ``i``.
* bipartite matchings in K_{m,m}: edge ``(i, j)`` is action ``i * m + j``.
* spanning trees of K_N: edges ``(i, j)``, ``i < j``, in lexicographic order.
* disjoint paths: path ``k`` owns links ``k * L, ..., k * L + L - 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

KINDS = ("m-sets", "bipartite-matchings", "spanning-trees", "disjoint-paths")
DEFAULT_ENUM_CAP = 10**6
AUTO_ENUM_LIMIT = 5000


class EnumerationCapError(ValueError):
    def __init__(self, cardinality: int, cap: int):
        super().__init__(f"action set has {cardinality} arms, above the enumeration cap {cap}")
        self.cardinality = cardinality
        self.cap = cap


def complete_graph_edges(n_nodes: int) -> List[Tuple[int, int]]:
    return list(itertools.combinations(range(n_nodes), 2))


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


@dataclass(frozen=True)
class ActionSet:
    """An immutable combinatorial family of arms.

    Use the constructors :func:`m_sets`, :func:`matchings`,
    :func:`spanning_trees`, :func:`disjoint_paths` or :func:`from_config`.
    """

    kind: str
    d: int
    m: int
    params: Tuple[Tuple[str, int], ...]
    cap: int = DEFAULT_ENUM_CAP
    _cache: Dict[str, object] = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def param_dict(self) -> Dict[str, int]:
        return dict(self.params)

    def describe(self) -> Dict[str, object]:
        return {"kind": self.kind, **self.param_dict}

    def cardinality(self) -> int:
        p = self.param_dict
        if self.kind == "m-sets":
            return math.comb(self.d, self.m)
        if self.kind == "bipartite-matchings":
            return math.factorial(self.m)
        if self.kind == "spanning-trees":
            n = p["n_nodes"]
            return n ** (n - 2)
        return self.d // self.m

    # -- enumeration ---------------------------------------------------

    def _supports(self):
        p = self.param_dict
        if self.kind == "m-sets":
            return itertools.combinations(range(self.d), self.m)
        if self.kind == "bipartite-matchings":
            m = self.m
            return (tuple(i * m + s for i, s in enumerate(perm))
                    for perm in itertools.permutations(range(m)))
        if self.kind == "spanning-trees":
            n = p["n_nodes"]
            edges = complete_graph_edges(n)

            def is_tree(sub):
                uf = _UnionFind(n)
                return all(uf.union(*edges[e]) for e in sub)

            return (sub for sub in itertools.combinations(range(self.d), self.m) if is_tree(sub))
        length = self.m
        return (tuple(range(k * length, (k + 1) * length)) for k in range(self.d // length))

    def enumerate(self) -> np.ndarray:
        """All arms as a read-only ``(n_arms, d)`` uint8 matrix in canonical order."""
        arms = self._cache.get("arms")
        if arms is None:
            n = self.cardinality()
            if n > self.cap:
                raise EnumerationCapError(n, self.cap)
            arms = np.zeros((n, self.d), dtype=np.uint8)
            count = 0
            for k, sup in enumerate(self._supports()):
                arms[k, list(sup)] = 1
                count += 1
            assert count == n, (count, n)
            arms.setflags(write=False)
            self._cache["arms"] = arms
        return arms

    def __len__(self):
        return self.cardinality()

    def csr(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` of the arm supports, int64, for the index kernels."""
        out = self._cache.get("csr")
        if out is None:
            arms = self.enumerate()
            rows, cols = np.nonzero(arms)
            indptr = np.zeros(len(arms) + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=len(arms)), out=indptr[1:])
            out = (indptr, cols.astype(np.int64))
            self._cache["csr"] = out
        return out

    def arm_index(self, arm) -> int:
        lookup = self._cache.get("lookup")
        if lookup is None:
            lookup = {row.tobytes(): k for k, row in enumerate(self.enumerate())}
            self._cache["lookup"] = lookup
        key = np.asarray(arm, dtype=np.uint8).tobytes()
        if key not in lookup:
            raise KeyError("not an arm of this set")
        return lookup[key]

    def contains(self, arm) -> bool:
        try:
            self.arm_index(arm)
        except KeyError:
            return False
        return True

    # -- linear maximization -----------------------------------------------

    def argmax_linear(self, weights, method: str = "auto") -> np.ndarray:
        """An arm maximizing ``sum_i M_i * weights_i``; ``+inf`` weights dominate.

        ``method`` is ``"structure"`` (combinatorial solver), ``"enumerate"``
        (exhaustive) or ``"auto"`` (exhaustive when the set is small).
        Arms are compared first by how many ``+inf`` coordinates they cover,
        then by the finite part of the sum.
        """
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.d,):
            raise ValueError(f"weights must have length {self.d}")
        if np.isnan(w).any() or np.isneginf(w).any():
            raise ValueError("weights must be finite or +inf")
        if method == "auto":
            method = "enumerate" if self.cardinality() <= AUTO_ENUM_LIMIT else "structure"
        if method == "enumerate":
            return self.enumerate()[self.argmax_linear_index(w)].copy()
        if method != "structure":
            raise ValueError(f"unknown method {method!r}")
        return self._argmax_structure(w)

    def argmax_linear_index(self, weights) -> int:
        """Canonical position of the exhaustive linear maximizer."""
        w = np.asarray(weights, dtype=float)
        arms = self.enumerate()
        inf = np.isposinf(w)
        if inf.any():
            n_inf = arms @ inf.astype(np.int64)
            finite = arms @ np.where(inf, 0.0, w)
            top = n_inf == n_inf.max()
            finite = np.where(top, finite, -np.inf)
            return int(np.argmax(finite))
        return int(np.argmax(arms @ w))

    def _argmax_structure(self, w: np.ndarray) -> np.ndarray:
        inf = np.isposinf(w)
        if inf.any():
            finite = w[~inf]
            big = 2.0 * (np.abs(finite).sum() + 1.0)
            w = np.where(inf, big, w)
        if self.kind == "m-sets":
            # stable sort keeps lower indices first among equal weights
            top = np.argsort(-w, kind="stable")[: self.m]
            arm = np.zeros(self.d, dtype=np.uint8)
            arm[top] = 1
            return arm
        if self.kind == "disjoint-paths":
            sums = w.reshape(-1, self.m).sum(axis=1)
            k = int(np.argmax(sums))
            arm = np.zeros(self.d, dtype=np.uint8)
            arm[k * self.m:(k + 1) * self.m] = 1
            return arm
        oracle = self._matching_oracle if self.kind == "bipartite-matchings" else self._tree_oracle
        return _lex_first_optimum(oracle, w, self.d, self.m)

    def _matching_oracle(self, w, forced, banned):
        m = self.m
        cost = -w.reshape(m, m).copy()
        blocked = np.zeros((m, m), dtype=bool)
        for e in banned:
            blocked[divmod(e, m)] = True
        for e in forced:
            i, j = divmod(e, m)
            row, col = blocked[i].copy(), blocked[:, j].copy()
            if row[j] or col[i]:
                return None
            blocked[i, :] = True
            blocked[:, j] = True
            blocked[i, j] = False
        cost[blocked] = np.inf
        try:
            rows, cols = linear_sum_assignment(cost)
        except ValueError:
            return None
        if np.isinf(cost[rows, cols]).any():
            return None
        return [int(r * m + c) for r, c in zip(rows, cols)]

    def _tree_oracle(self, w, forced, banned):
        n = self.param_dict["n_nodes"]
        edges = complete_graph_edges(n)
        uf = _UnionFind(n)
        chosen = []
        for e in forced:
            if not uf.union(*edges[e]):
                return None
            chosen.append(e)
        banned = set(banned) | set(forced)
        for e in sorted(range(self.d), key=lambda e: (-w[e], e)):
            if e in banned:
                continue
            if uf.union(*edges[e]):
                chosen.append(e)
        if len(chosen) != n - 1:
            return None
        return chosen

    # -- spectral constants -------------------------------------------------

    def mu0(self) -> np.ndarray:
        """Occupancy induced by the uniform distribution over arms (sums to 1)."""
        arms = self.enumerate()
        return arms.mean(axis=0) / self.m

    def second_moment(self) -> np.ndarray:
        """``E[M M^T]`` under the uniform distribution over arms."""
        arms = self.enumerate().astype(float)
        return arms.T @ arms / len(arms)

    def spectral_constants(self) -> Tuple[float, float]:
        """``(mu_min, lambda_lower)``: min coordinate of ``m * mu0`` and the
        smallest nonzero eigenvalue of ``E[M M^T]``."""
        cached = self._cache.get("spectral")
        if cached is None:
            eig = np.linalg.eigvalsh(self.second_moment())
            nonzero = eig[eig > 1e-10 * eig[-1]]
            mu_min = float(np.min(self.m * self.mu0()))
            cached = (mu_min, float(nonzero[0]))
            self._cache["spectral"] = cached
        return cached


def _lex_first_optimum(oracle, w, d, m):
    """Canonically-first optimal arm via include/exclude decisions in index order."""
    best = oracle(w, [], [])
    target = float(sum(w[e] for e in best))
    tol = 1e-12 * (1.0 + float(np.abs(w).sum()))
    forced: List[int] = []
    banned: List[int] = []
    for e in range(d):
        if len(forced) == m:
            break
        trial = oracle(w, forced + [e], banned)
        if trial is not None and sum(w[k] for k in trial) >= target - tol:
            forced.append(e)
        else:
            banned.append(e)
    arm = np.zeros(d, dtype=np.uint8)
    arm[forced] = 1
    return arm


def m_sets(d: int, m: int, cap: int = DEFAULT_ENUM_CAP) -> ActionSet:
    if not 1 <= m <= d:
        raise ValueError("m-sets need 1 <= m <= d")
    return ActionSet("m-sets", d, m, (("d", d), ("m", m)), cap)


def matchings(m: int, cap: int = DEFAULT_ENUM_CAP) -> ActionSet:
    if m < 1:
        raise ValueError("matchings need m >= 1")
    return ActionSet("bipartite-matchings", m * m, m, (("m", m),), cap)


def spanning_trees(n_nodes: int, cap: int = DEFAULT_ENUM_CAP) -> ActionSet:
    if n_nodes < 2:
        raise ValueError("spanning trees need at least 2 nodes")
    return ActionSet("spanning-trees", n_nodes * (n_nodes - 1) // 2, n_nodes - 1,
                     (("n_nodes", n_nodes),), cap)


def disjoint_paths(n_paths: int, length: int, cap: int = DEFAULT_ENUM_CAP) -> ActionSet:
    if n_paths < 1 or length < 1:
        raise ValueError("disjoint paths need n_paths >= 1 and length >= 1")
    return ActionSet("disjoint-paths", n_paths * length, length,
                     (("n_paths", n_paths), ("length", length)), cap)


def from_config(cfg: Dict[str, object]) -> ActionSet:
    """Build a set from ``{"kind": ..., <kind parameters>}``."""
    kind = cfg.get("kind")
    cap = int(cfg.get("cap", DEFAULT_ENUM_CAP))
    try:
        if kind == "m-sets":
            return m_sets(int(cfg["d"]), int(cfg["m"]), cap)
        if kind == "bipartite-matchings":
            return matchings(int(cfg["m"]), cap)
        if kind == "spanning-trees":
            return spanning_trees(int(cfg["n_nodes"]), cap)
        if kind == "disjoint-paths":
            return disjoint_paths(int(cfg["n_paths"]), int(cfg["length"]), cap)
    except KeyError as exc:
        raise ValueError(f"structure.{exc.args[0]} is required for kind {kind!r}") from None
    raise ValueError(f"structure.kind must be one of {KINDS}, got {kind!r}")
