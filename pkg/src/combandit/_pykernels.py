"""Pure-Python versions of the compiled index kernels (same signatures, same results)."""

import math

import numpy as np

from .kl import BracketError, LineSearchInput, g_root, solve_budget


def c_indexes(indptr, indices, means, counts, f_n):
    counts = np.asarray(counts)
    n_arms = len(indptr) - 1
    rows = np.repeat(np.arange(n_arms), np.diff(indptr))
    t = counts[indices]
    unseen = np.zeros(n_arms, dtype=bool)
    np.logical_or.at(unseen, rows, t == 0)
    with np.errstate(divide="ignore"):
        inv = np.where(t > 0, 1.0 / np.maximum(t, 1), 0.0)
    mu = np.bincount(rows, weights=np.asarray(means)[indices], minlength=n_arms)
    bonus = np.bincount(rows, weights=inv, minlength=n_arms)
    out = mu + np.sqrt(0.5 * f_n * bonus)
    out[unseen] = math.inf
    return out


def _index_b(idx, means, counts, f_n, tol):
    base = 0.0
    pairs = []
    for i in idx:
        if counts[i] == 0:
            return math.inf
        if means[i] >= 1.0:
            base += 1.0
        else:
            pairs.append((float(means[i]), int(counts[i])))
    if not pairs:
        return base
    if f_n <= 0:
        return base + math.fsum(p for p, _ in pairs)
    try:
        lam = solve_budget(LineSearchInput(tuple(pairs), f_n), tol)
    except BracketError as exc:
        raise RuntimeError("KL index bracket search failed") from exc
    return base + sum(g_root(lam, p, c) for p, c in pairs)


def b_indexes(indptr, indices, means, counts, f_n, tol, arm_ids):
    return np.array(
        [_index_b(indices[indptr[a]:indptr[a + 1]], means, counts, f_n, tol) for a in arm_ids],
        dtype=float,
    )


def b_argmax_pruned(indptr, indices, means, counts, f_n, tol, order, c_values):
    best_arm, best, evaluated = -1, -math.inf, 0
    for a in order:
        a = int(a)
        if best_arm >= 0 and c_values[a] < best:
            break
        val = _index_b(indices[indptr[a]:indptr[a + 1]], means, counts, f_n, tol)
        evaluated += 1
        if val > best or (val == best and a < best_arm):
            best, best_arm = val, a
    return best_arm, best, evaluated
