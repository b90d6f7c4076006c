"""Acceptance checks. Each test prints one PASS/FAIL line, then asserts it.

Experiments shared by several criteria run once per session; the determinism
check reruns each of them through the CLI and compares trace bytes.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import rel_entr

from combandit.actions import m_sets, matchings, spanning_trees
from combandit.combexp import decompose, estimate, mix, pinv_sym, project, second_moment
from combandit.harness import read_traces, run_experiment
from combandit.kl import LineSearchInput, g_root, kl_derivative, line_search_value, solve_budget
from combandit.lower_bounds import Instance, matching_closed_form, maximal_pset, simplified_bound
from combandit.policies import ExplorationRate, index_b, index_c
from combandit.state import BanditState

THETA_SETS = [0.9, 0.8, 0.6, 0.5, 0.4, 0.3]

EXPERIMENTS = {
    "matchings": {
        "structure": {"kind": "bipartite-matchings", "m": 5},
        "policies": ["ESCB1", "ESCB2", "CUCB", "LLR"],
        "horizon": 10**4, "repetitions": 20, "seed": 0,
        "theta": {"a": 0.7, "b": 0.5}, "checkpoints": [10**3, 10**4],
    },
    "trees": {
        "structure": {"kind": "spanning-trees", "n_nodes": 5},
        "policies": ["ESCB1", "ESCB2", "CUCB", "LLR"],
        "horizon": 10**4, "repetitions": 20, "seed": 0,
        "theta": {"a": 0.77, "b": 0.23}, "checkpoints": [10**3, 10**4],
    },
    "scaling": {
        "structure": {"kind": "m-sets", "d": 6, "m": 2},
        "policies": ["ESCB2"], "horizon": 10**5, "repetitions": 20, "seed": 0,
        "theta": THETA_SETS, "checkpoints": [10**3, 10**4, 10**5],
    },
    "adversarial": {
        "structure": {"kind": "m-sets", "d": 6, "m": 2}, "setting": "adversarial",
        "policies": ["CombEXP"], "horizon": 2 * 10**4, "repetitions": 5, "seed": 0,
        "adversary": {"kind": "constant", "x": THETA_SETS},
        "checkpoints": [5000, 10**4, 2 * 10**4],
    },
}


def report(capsys, num, ok, metric, elapsed):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {num}: {metric} [{elapsed:.1f} s]")


def make_state(means, counts):
    s = BanditState(len(means))
    s.means[:] = means
    s.counts[:] = counts
    return s


@pytest.fixture(scope="session")
def experiments(tmp_path_factory):
    cache = {}

    def get(name):
        if name not in cache:
            out = tmp_path_factory.mktemp(name)
            raw = {**EXPERIMENTS[name], "output": {"dir": str(out)}}
            t0 = time.perf_counter()
            res = run_experiment(raw)
            cache[name] = (raw, res, time.perf_counter() - t0)
        return cache[name]

    return get


def final_stats(res, horizon):
    return {r.policy: (r.mean, r.half_width) for r in res.summary if r.round == horizon}


# -- 1. index dominance -----------------------------------------------------------

def test_criterion_1_index_dominance(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    rates = [ExplorationRate("practical"), ExplorationRate("theoretical", m=3)]
    worst = -math.inf
    for k in range(1000):
        d = int(rng.integers(1, 9))
        means = rng.random(d)
        means[rng.random(d) < 0.15] = 0.0
        means[rng.random(d) < 0.1] = 1.0
        counts = rng.integers(1, 1000, size=d)
        arm = (rng.random(d) < 0.6).astype(np.uint8)
        arm[rng.integers(d)] = 1
        if k % 2:
            f_n = float(10 ** rng.uniform(-3, 1.7))
        else:
            f_n = rates[k % 4 // 2](int(rng.integers(1, 10**6)))
        s = make_state(means, counts)
        worst = max(worst, index_b(s, arm, f_n) - index_c(s, arm, f_n))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    report(capsys, 1, ok, f"max(b - c) = {worst:.3e} over 1000 cases (<= 1e-9, < 5 s)", elapsed)
    assert ok


# -- 2. index-b brute-force oracle ------------------------------------------------

def kl_grid(p, q):
    return rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q)


def brute_1d(p, t, f, step=1e-4):
    q = np.arange(0, round(1 / step) + 1) * step
    return float(q[t * kl_grid(p, q) <= f].max())


def brute_3d(ps, ts, f, step=1e-3):
    grid = np.arange(0, round(1 / step) + 1) * step
    k1 = ts[0] * kl_grid(ps[0], grid)
    k2 = ts[1] * kl_grid(ps[1], grid)
    # third coordinate: cost is increasing on grid points from floor(p3) upwards
    start = int(np.searchsorted(grid, ps[2], side="right")) - 1
    q3 = grid[start:]
    k3 = ts[2] * kl_grid(ps[2], q3)
    k3 = np.maximum.accumulate(k3)
    left = f - (k1[:, None] + k2[None, :])
    pos = np.searchsorted(k3, left, side="right") - 1
    feasible = pos >= 0
    best_q3 = np.where(feasible, q3[np.clip(pos, 0, None)], -np.inf)
    total = grid[:, None] + grid[None, :] + best_q3
    return float(total.max())


def test_criterion_2_index_b_oracle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    err1 = err3 = 0.0
    for _ in range(100):
        p, t, f = float(rng.random()), int(rng.integers(1, 200)), float(rng.uniform(0.05, 10))
        err1 = max(err1, abs(index_b(make_state([p], [t]), [1], f) - brute_1d(p, t, f)))
    for _ in range(50):
        ps, ts, f = rng.random(3), rng.integers(1, 100, size=3), float(rng.uniform(0.05, 10))
        err3 = max(err3, abs(index_b(make_state(ps, ts), [1, 1, 1], f) - brute_3d(ps, ts, f)))
    elapsed = time.perf_counter() - t0
    ok = err1 <= 2e-4 and err3 <= 2e-3 and elapsed < 60.0
    report(capsys, 2, ok, f"1-D max err {err1:.2e} (<= 2e-4), 3-D max err {err3:.2e} (<= 2e-3)", elapsed)
    assert ok


# -- 3. line-search internals -----------------------------------------------------

def test_criterion_3_line_search(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    quad = kkt = 0.0
    for _ in range(10**4):
        w, v = float(rng.random()), int(rng.integers(1, 1001))
        lam = float(10 ** rng.uniform(-3, 3)) / v
        q = g_root(lam, w, v)
        lv = lam * v
        quad = max(quad, abs(q * (q - 1.0) + lv * (q - w)))
        if w < q < 1.0:
            kkt = max(kkt, abs(lv * kl_derivative(w, q) - 1.0))
    trip = 0.0
    for _ in range(10**4):
        k = int(rng.integers(1, 6))
        pairs = tuple((float(rng.uniform(0, 0.999)), int(rng.integers(1, 1000))) for _ in range(k))
        inp = LineSearchInput(pairs, float(rng.uniform(1e-3, 20)))
        trip = max(trip, abs(line_search_value(inp, solve_budget(inp, 1e-9)) - inp.budget))
    elapsed = time.perf_counter() - t0
    ok = quad <= 1e-12 and kkt <= 1e-9 and trip <= 1e-9
    report(capsys, 3, ok, f"quadratic {quad:.1e} (<= 1e-12), KKT {kkt:.1e} (<= 1e-9), "
                          f"round trip {trip:.1e} (<= 1e-9)", elapsed)
    assert ok


# -- 4. spectral constants --------------------------------------------------------

def test_criterion_4_spectral_constants(capsys):
    t0 = time.perf_counter()
    mu_s, lam_s = m_sets(6, 2).spectral_constants()
    mu_m, lam_m = matchings(3).spectral_constants()
    _, lam_t = spanning_trees(5).spectral_constants()
    err = max(abs(mu_s - 1 / 3), abs(lam_s - 4 / 15), abs(mu_m - 1 / 3), abs(lam_m - 1 / 2))
    floor = 1 / 5 - 17 / (4 * 25)
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-9 and lam_t >= floor and elapsed < 10.0
    report(capsys, 4, ok, f"closed-form err {err:.1e} (<= 1e-9), tree lambda {lam_t:.4f} >= {floor:.4f}",
           elapsed)
    assert ok


# -- 5. lower-bound closed form ---------------------------------------------------

def pattern(aset, a, b):
    return Instance(aset, np.where(aset.enumerate()[-1] > 0, a, b))


def test_criterion_5_lower_bound(capsys):
    t0 = time.perf_counter()
    err = abs(simplified_bound(pattern(matchings(5), 0.7, 0.5)) - matching_closed_form(5, 0.7, 0.5))
    h_match = len(maximal_pset(pattern(matchings(4), 0.8, 0.3)))
    h_tree = len(maximal_pset(pattern(spanning_trees(5), 0.8, 0.3)))
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-9 and h_match == 6 and h_tree == 6
    report(capsys, 5, ok, f"closed-form err {err:.1e} (<= 1e-9), |H| K44 = {h_match}, K5 = {h_tree} (6, 6)",
           elapsed)
    assert ok


# -- 6, 7. stochastic orderings ---------------------------------------------------

def separated(lo, hi):
    return lo[0] + lo[1] < hi[0] - hi[1]


def ordering_line(stats):
    return ", ".join(f"{k} {m:.1f}+-{h:.1f}" for k, (m, h) in stats.items())


@pytest.mark.slow
def test_criterion_6_matchings_ordering(capsys, experiments):
    raw, res, elapsed = experiments("matchings")
    s = final_stats(res, raw["horizon"])
    e1, e2, cu, llr = s["ESCB1"], s["ESCB2"], s["CUCB"], s["LLR"]
    ok = (not res.failures and e1[0] <= e2[0] < cu[0] and e2[0] < llr[0]
          and separated(e1, cu) and separated(e2, cu) and elapsed < 600)
    report(capsys, 6, ok, f"regret at T: {ordering_line(s)}", elapsed)
    assert ok


@pytest.mark.slow
def test_criterion_7_trees_ordering(capsys, experiments):
    raw, res, elapsed = experiments("trees")
    s = final_stats(res, raw["horizon"])
    ok = not res.failures and elapsed < 600
    for esc in ("ESCB1", "ESCB2"):
        for other in ("CUCB", "LLR"):
            ok = ok and s[esc][0] < s[other][0] and separated(s[esc], s[other])
    report(capsys, 7, ok, f"regret at T: {ordering_line(s)}", elapsed)
    assert ok


# -- 8. regret scaling --------------------------------------------------------------

@pytest.mark.slow
def test_criterion_8_regret_scaling(capsys, experiments):
    raw, res, elapsed = experiments("scaling")
    rows = [r for r in res.summary if r.policy == "ESCB2"]
    T = np.array([r.round for r in rows], dtype=float)
    y = np.array([r.mean for r in rows])
    X = np.column_stack([np.ones_like(T), np.log(T)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r2 = 1 - np.sum((y - X @ coef) ** 2) / np.sum((y - y.mean()) ** 2)
    aset = m_sets(6, 2)
    vals = np.sort(aset.enumerate() @ np.array(THETA_SETS))
    dmin = vals[-1] - vals[-2]
    f = ExplorationRate("practical", aset.m)
    def bound(n):
        return 16 * aset.d * math.sqrt(aset.m) * f(int(n)) / dmin

    # every repetition at every checkpoint, not only the mean
    worst = max(float(v) / bound(n) for r in res.runs for n, v in zip(r.rounds, r.cum_regret))
    ok = not res.failures and r2 >= 0.95 and worst < 1.0 and elapsed < 900
    report(capsys, 8, ok, f"means {np.round(y, 1).tolist()}, slope {coef[1]:.2f}, R^2 {r2:.4f} (>= 0.95), "
                          f"max regret / bound {worst:.4f} (< 1)", elapsed)
    assert ok


# -- 9. CombEXP ------------------------------------------------------------------------

def span_projector(arms):
    u, s, vt = np.linalg.svd(arms.astype(float), full_matrices=False)
    basis = vt[s > 1e-10 * s[0]]
    return basis.T @ basis


def combexp_properties():
    rng = np.random.default_rng(909)
    bias = 0.0
    aset = matchings(2)
    for _ in range(20):
        arms = aset.enumerate()
        target = mix(rng.dirichlet(np.ones(len(arms))) @ arms / aset.m, aset.mu0(), rng.random())
        dist = decompose(aset, target)
        sp = pinv_sym(second_moment(dist))
        x = rng.random(aset.d)
        expect = sum(w * estimate(dist, a, float(a @ x), sp) for a, w in zip(dist.arms, dist.weights))
        bias = max(bias, float(np.abs(expect - span_projector(dist.arms) @ x).max()))
    marg = 0.0
    for m in (2, 3, 4, 5):
        for _ in range(10):
            qt = rng.dirichlet(np.ones(m * m)) + 1e-6
            P = project(matchings(m), qt / qt.sum(), 1e-12).reshape(m, m)
            marg = max(marg, float(np.abs(P.sum(axis=0) - 1 / m).max()),
                       float(np.abs(P.sum(axis=1) - 1 / m).max()))
    resid, atoms_ok = 0.0, True
    for aset in (m_sets(6, 2), m_sets(7, 3), matchings(3), matchings(4), spanning_trees(5)):
        arms = aset.enumerate()
        for _ in range(10):
            k = min(len(arms), 8)
            pick = rng.choice(len(arms), size=k, replace=False)
            target = rng.dirichlet(np.ones(k)) @ arms[pick] / aset.m
            dist = decompose(aset, target)
            resid = max(resid, float(np.abs(dist.mean() - aset.m * target).max()))
            atoms_ok = atoms_ok and len(dist) <= aset.d + 1
    return bias, marg, resid, atoms_ok


@pytest.mark.slow
def test_criterion_9_combexp(capsys, experiments):
    t0 = time.perf_counter()
    bias, marg, resid, atoms_ok = combexp_properties()
    raw, res, run_time = experiments("adversarial")
    elapsed = time.perf_counter() - t0
    rows = sorted((r for r in res.summary if r.policy == "CombEXP"), key=lambda r: r.round)
    avg = [r.mean / r.round for r in rows]
    decreasing = all(a > b for a, b in zip(avg, avg[1:]))
    ok = (not res.failures and bias <= 1e-8 and marg <= 1e-8 and resid <= 1e-8 and atoms_ok
          and decreasing and len(avg) == 3 and elapsed < 600)
    report(capsys, 9, ok, f"bias {bias:.1e}, marginals {marg:.1e}, decomposition {resid:.1e} (<= 1e-8), "
                          f"atoms <= d+1 {atoms_ok}, R(T)/T {[round(a, 4) for a in avg]}", elapsed)
    assert ok


# -- 10. determinism -------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_10_determinism(capsys, experiments, tmp_path):
    t0 = time.perf_counter()
    same = {}
    for name in EXPERIMENTS:
        raw, res, _ = experiments(name)
        rerun = {**raw, "output": {"dir": str(tmp_path / name)}}
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps(rerun))
        proc = subprocess.run([sys.executable, "-m", "combandit", "run", "--config", str(cfg)],
                              capture_output=True, text=True)
        first = res.paths["traces"].read_bytes()
        second = (tmp_path / name / "traces.csv").read_bytes() if proc.returncode == 0 else b""
        same[name] = first == second and bool(read_traces(res.paths["traces"]))
    elapsed = time.perf_counter() - t0
    ok = all(same.values())
    report(capsys, 10, ok, "byte-identical traces on rerun: "
                           + ", ".join(f"{k} {v}" for k, v in same.items()), elapsed)
    assert ok
