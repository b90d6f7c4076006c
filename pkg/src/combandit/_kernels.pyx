# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled index kernels; ``_pykernels`` is the drop-in pure-Python twin."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, log1p, sqrt, fabs, INFINITY

cnp.import_array()

DEF EXPAND = 4.0
DEF MAX_EXPAND = 200
DEF MAX_BISECT = 400


cdef inline double _kl(double p, double q, double r, double d) nogil:
    # kl(p, q) from q, r = 1 - q and d = q - p (see kl._kl_step)
    cdef double out = 0.0
    if d == 0.0:
        return 0.0
    if p > 0.0:
        if q <= 0.0:
            return INFINITY
        if fabs(d) < 0.5 * p:
            out -= p * log1p(d / p)
        else:
            out += p * (log(p) - log(q))
    if p < 1.0:
        if r <= 0.0:
            return INFINITY
        if fabs(d) < 0.5 * (1.0 - p):
            out -= (1.0 - p) * log1p(-d / (1.0 - p))
        else:
            out += (1.0 - p) * (log1p(-p) - log(r))
    return out if out > 0.0 else 0.0


cdef inline double _g(double lam, double w, double v, double* r, double* d) nogil:
    # returns q; stores 1 - q in r[0] and q - w in d[0] (see kl._g_parts)
    cdef double lv = lam * v
    cdef double b = 1.0 - lv
    cdef double disc = sqrt(b * b + 4.0 * w * lv)
    cdef double q, denom, c
    if b >= 0.0:
        q = 0.5 * (b + disc)
    else:
        denom = disc - b
        q = 2.0 * lv * w / denom if denom > 0.0 else 0.0
    if q < w:
        q = w
    if q > 1.0:
        q = 1.0
    c = 2.0 * lv * (1.0 - w) / (1.0 + lv + disc)
    if c < 0.0:
        c = 0.0
    if c > 1.0 - w:
        c = 1.0 - w
    r[0] = c
    if lv > 0.0:
        d[0] = q * c / lv
        if d[0] > 1.0 - w:
            d[0] = 1.0 - w
    else:
        d[0] = 1.0 - w
    return q


cdef inline double _resid(double lam, const double* w, const double* v, int k,
                          double target) nogil:
    cdef double s = 0.0, q, r, d
    cdef int j
    for j in range(k):
        q = _g(lam, w[j], v[j], &r, &d)
        s += v[j] * _kl(w[j], q, r, d)
    return s - target


cdef double _solve(const double* w, const double* v, int k, double target,
                   double tol, int* failed) nogil:
    cdef double r1, r4, lam, r, lo, hi, r_lo, r_hi, mid, r_mid, best, best_r
    cdef bint decreasing, go_up
    cdef int it
    failed[0] = 0
    if target < 1.0:
        tol *= target
    r1 = _resid(1.0, w, v, k, target)
    if fabs(r1) <= tol:
        return 1.0
    # F is flat (zero) where every g has collapsed onto its mean: probe outward
    # from lam=1 until an evaluation differs
    lam = 1.0
    for it in range(MAX_EXPAND + 1):
        if it == MAX_EXPAND:
            failed[0] = 1
            return 1.0
        lam *= EXPAND
        r = _resid(lam, w, v, k, target)
        r4 = _resid(1.0 / lam, w, v, k, target)
        if r != r1 or r4 != r1:
            break
    decreasing = r < r1 or r4 > r1
    go_up = (r1 > 0) == decreasing
    lam = 1.0
    r = r1
    for it in range(MAX_EXPAND + 1):
        if it == MAX_EXPAND:
            failed[0] = 1
            return lam
        lam = lam * EXPAND if go_up else lam / EXPAND
        r = _resid(lam, w, v, k, target)
        if (r > 0) != (r1 > 0) or r == 0:
            break
    if go_up:
        lo = lam / EXPAND
        hi = lam
        r_lo = _resid(lo, w, v, k, target)
        r_hi = r
    else:
        lo = lam
        hi = lam * EXPAND
        r_lo = r
        r_hi = _resid(hi, w, v, k, target)
    if fabs(r_lo) <= tol:
        return lo
    if fabs(r_hi) <= tol:
        return hi
    if fabs(r_lo) < fabs(r_hi):
        best = lo
        best_r = r_lo
    else:
        best = hi
        best_r = r_hi
    for it in range(MAX_BISECT):
        mid = sqrt(lo * hi)
        if not (lo < mid < hi):
            mid = 0.5 * (lo + hi)
            if not (lo < mid < hi):
                break
        r_mid = _resid(mid, w, v, k, target)
        if fabs(r_mid) < fabs(best_r):
            best = mid
            best_r = r_mid
        if fabs(r_mid) <= tol:
            return mid
        if (r_mid > 0) == (r_lo > 0):
            lo = mid
            r_lo = r_mid
        else:
            hi = mid
            r_hi = r_mid
    return best


cdef double _index_b(const long* idx, int length, const double* means,
                     const long* counts, double f_n, double tol,
                     double* w, double* v, int* failed) nogil:
    cdef int j, k = 0
    cdef long i
    cdef double base = 0.0, lam, out, r, dd
    failed[0] = 0
    for j in range(length):
        i = idx[j]
        if counts[i] == 0:
            return INFINITY
        if means[i] >= 1.0:
            base += 1.0
        else:
            w[k] = means[i]
            v[k] = <double>counts[i]
            k += 1
    if k == 0:
        return base
    if f_n <= 0.0:
        for j in range(k):
            base += w[j]
        return base
    lam = _solve(w, v, k, f_n, tol, failed)
    out = base
    for j in range(k):
        out += _g(lam, w[j], v[j], &r, &dd)
    return out


def c_indexes(const long[::1] indptr, const long[::1] indices,
              const double[::1] means, const long[::1] counts, double f_n):
    """``M^T mean + sqrt(f_n / 2 * sum_i M_i / t_i)`` for every arm."""
    cdef Py_ssize_t n_arms = indptr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_arms)
    cdef double[::1] o = out
    cdef Py_ssize_t a, j
    cdef long i
    cdef double mu, bonus
    cdef bint unseen
    with nogil:
        for a in range(n_arms):
            mu = 0.0
            bonus = 0.0
            unseen = False
            for j in range(indptr[a], indptr[a + 1]):
                i = indices[j]
                if counts[i] == 0:
                    unseen = True
                    break
                mu += means[i]
                bonus += 1.0 / counts[i]
            o[a] = INFINITY if unseen else mu + sqrt(0.5 * f_n * bonus)
    return out


def b_indexes(const long[::1] indptr, const long[::1] indices,
              const double[::1] means, const long[::1] counts, double f_n,
              double tol, const long[::1] arm_ids):
    """KL index of each arm in ``arm_ids``; raises if a bracket search fails."""
    cdef Py_ssize_t n = arm_ids.shape[0], a, k
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef int width = 1, failed = 0, any_failed = 0
    for a in range(indptr.shape[0] - 1):
        if indptr[a + 1] - indptr[a] > width:
            width = indptr[a + 1] - indptr[a]
    cdef double[::1] w = np.empty(width)
    cdef double[::1] v = np.empty(width)
    with nogil:
        for k in range(n):
            a = arm_ids[k]
            o[k] = _index_b(&indices[indptr[a]], indptr[a + 1] - indptr[a], &means[0],
                            &counts[0], f_n, tol, &w[0], &v[0], &failed)
            if failed:
                any_failed = 1
    if any_failed:
        raise RuntimeError("KL index bracket search failed")
    return out


def b_argmax_pruned(const long[::1] indptr, const long[::1] indices,
                    const double[::1] means, const long[::1] counts, double f_n,
                    double tol, const long[::1] order, const double[::1] c_values):
    """Exact argmax of the KL index, skipping arms whose c-index cannot win.

    ``order`` lists arms by decreasing c-index (ties by arm id). Returns
    ``(best_arm, best_value, n_evaluated)``; ties go to the lowest arm id.
    """
    cdef Py_ssize_t n = order.shape[0], k, a, best_arm = -1, evaluated = 0
    cdef double best = -INFINITY, val
    cdef int width = 1, failed = 0, any_failed = 0
    for a in range(indptr.shape[0] - 1):
        if indptr[a + 1] - indptr[a] > width:
            width = indptr[a + 1] - indptr[a]
    cdef double[::1] w = np.empty(width)
    cdef double[::1] v = np.empty(width)
    with nogil:
        for k in range(n):
            a = order[k]
            if best_arm >= 0 and c_values[a] < best:
                break
            val = _index_b(&indices[indptr[a]], indptr[a + 1] - indptr[a], &means[0],
                           &counts[0], f_n, tol, &w[0], &v[0], &failed)
            evaluated += 1
            if failed:
                any_failed = 1
                break
            if val > best or (val == best and a < best_arm):
                best = val
                best_arm = a
    if any_failed:
        raise RuntimeError("KL index bracket search failed")
    return best_arm, best, evaluated
