"""Time the compiled index kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--seed 0]

Each case is a random semi-bandit state on a fixed action set; the KL sweeps
solve one line search per arm, so they dominate.
"""

import argparse
import timeit

import numpy as np

from combandit import _pykernels
from combandit.actions import m_sets, matchings, spanning_trees

try:
    from combandit import _kernels
except ImportError:  # extension not built
    _kernels = None

CASES = [
    ("m-sets d=10 m=3", m_sets(10, 3)),
    ("matchings m=5", matchings(5)),
    ("spanning trees N=5", spanning_trees(5)),
    ("matchings m=6", matchings(6)),
]


def make_inputs(aset, rng):
    indptr, indices = aset.csr()
    means = rng.random(aset.d)
    counts = rng.integers(5, 500, size=aset.d).astype(np.int64)
    f_n = float(np.log(10**4))
    return indptr, indices, means, counts, f_n


def calls(kern, inputs, n_arms):
    indptr, indices, means, counts, f_n = inputs
    arm_ids = np.arange(n_arms, dtype=np.int64)
    c = kern.c_indexes(indptr, indices, means, counts, f_n)
    order = np.argsort(-c, kind="stable").astype(np.int64)
    return {
        "c_indexes": lambda: kern.c_indexes(indptr, indices, means, counts, f_n),
        "b_indexes": lambda: kern.b_indexes(indptr, indices, means, counts, f_n, 1e-9, arm_ids),
        "b_argmax_pruned": lambda: kern.b_argmax_pruned(indptr, indices, means, counts, f_n, 1e-9,
                                                        order, c),
    }


def best_time(fn, repeat):
    n, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=n, repeat=repeat)) / n


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled kernels not built; run `pip install --no-build-isolation -e .`")
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<22}{'kernel':<18}{'arms':>6}{'cython ms':>12}{'python ms':>12}{'speedup':>10}")
    for label, aset in CASES:
        inputs = make_inputs(aset, rng)
        fast = calls(_kernels, inputs, len(aset))
        slow = calls(_pykernels, inputs, len(aset))
        for name in fast:
            tc = best_time(fast[name], args.repeat)
            tp = best_time(slow[name], args.repeat)
            print(f"{label:<22}{name:<18}{len(aset):>6}{tc * 1e3:>12.4f}{tp * 1e3:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
