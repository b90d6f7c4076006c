import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combandit import actions
from combandit.actions import (
    EnumerationCapError,
    disjoint_paths,
    from_config,
    m_sets,
    matchings,
    spanning_trees,
)

SETS = [m_sets(6, 2), m_sets(7, 3), matchings(3), matchings(4), spanning_trees(4),
        spanning_trees(5), disjoint_paths(3, 2)]


def bits(arm):
    return "".join(str(int(x)) for x in arm)


def test_m_sets_canonical_order():
    assert [bits(a) for a in m_sets(3, 2).enumerate()] == ["110", "101", "011"]


def test_cardinalities():
    assert len(matchings(3).enumerate()) == 6
    assert len(spanning_trees(4).enumerate()) == 16
    assert len(spanning_trees(5).enumerate()) == 125
    assert len(m_sets(6, 2).enumerate()) == 15
    assert len(disjoint_paths(4, 3).enumerate()) == 4


def test_matchings_are_permutation_matrices():
    arms = matchings(3).enumerate().reshape(-1, 3, 3)
    assert (arms.sum(axis=1) == 1).all() and (arms.sum(axis=2) == 1).all()
    assert len({a.tobytes() for a in arms}) == 6


def test_spanning_trees_are_connected_and_acyclic():
    edges = actions.complete_graph_edges(5)
    for arm in spanning_trees(5).enumerate():
        chosen = [edges[e] for e in np.flatnonzero(arm)]
        assert len(chosen) == 4
        seen = {0}
        frontier = [0]
        while frontier:
            u = frontier.pop()
            for a, b in chosen:
                for x, y in ((a, b), (b, a)):
                    if x == u and y not in seen:
                        seen.add(y)
                        frontier.append(y)
        assert seen == set(range(5))


def test_disjoint_paths_layout():
    assert [bits(a) for a in disjoint_paths(2, 3).enumerate()] == ["111000", "000111"]


def test_enumeration_is_read_only():
    arms = m_sets(4, 2).enumerate()
    with pytest.raises(ValueError):
        arms[0, 0] = 0


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError) as err:
        matchings(8, cap=1000).enumerate()
    assert err.value.cardinality == math.factorial(8)


def test_argmax_m_sets_example():
    assert bits(m_sets(4, 2).argmax_linear([3, 1, 2, 0])) == "1010"


def test_argmax_matching_identity():
    arm = matchings(2).argmax_linear([1, 0, 0, 1], method="structure")
    assert bits(arm) == "1001"
    assert arm @ np.array([1, 0, 0, 1]) == 2


@pytest.mark.parametrize("aset", SETS, ids=lambda s: f"{s.kind}-{s.d}")
def test_argmax_matches_enumeration_oracle(aset):
    rng = np.random.default_rng(7)
    arms = aset.enumerate()
    for _ in range(100):
        w = rng.normal(size=aset.d)
        oracle = arms[int(np.argmax(arms @ w))]
        got = aset.argmax_linear(w, method="structure")
        assert aset.contains(got)
        np.testing.assert_array_equal(got, oracle)


@pytest.mark.parametrize("aset", SETS, ids=lambda s: f"{s.kind}-{s.d}")
def test_argmax_ties_break_canonically(aset):
    rng = np.random.default_rng(11)
    arms = aset.enumerate()
    for _ in range(50):
        w = rng.integers(0, 3, size=aset.d).astype(float)
        oracle = arms[int(np.argmax(arms @ w))]
        np.testing.assert_array_equal(aset.argmax_linear(w, method="structure"), oracle)
        np.testing.assert_array_equal(aset.argmax_linear(w, method="enumerate"), oracle)


@pytest.mark.parametrize("aset", SETS, ids=lambda s: f"{s.kind}-{s.d}")
def test_argmax_infinite_weights_dominate(aset):
    rng = np.random.default_rng(3)
    for _ in range(30):
        w = rng.normal(size=aset.d)
        w[rng.random(aset.d) < 0.3] = np.inf
        a = aset.argmax_linear(w, method="structure")
        b = aset.argmax_linear(w, method="enumerate")
        np.testing.assert_array_equal(a, b)
        n_inf = aset.enumerate() @ np.isinf(w)
        assert (a @ np.isinf(w)) == n_inf.max()


def test_argmax_rejects_bad_weights():
    s = m_sets(3, 1)
    with pytest.raises(ValueError):
        s.argmax_linear([1.0, 2.0])
    with pytest.raises(ValueError):
        s.argmax_linear([1.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        s.argmax_linear([1.0, -np.inf, 0.0])
    with pytest.raises(ValueError):
        s.argmax_linear([1.0, 2.0, 0.0], method="greedy")


def test_arm_index_and_contains():
    s = m_sets(4, 2)
    for k, arm in enumerate(s.enumerate()):
        assert s.arm_index(arm) == k
    assert not s.contains([1, 1, 1, 0])
    with pytest.raises(KeyError):
        s.arm_index([0, 0, 0, 0])


def test_csr_matches_dense():
    s = spanning_trees(4)
    indptr, indices = s.csr()
    for k, arm in enumerate(s.enumerate()):
        assert list(indices[indptr[k]:indptr[k + 1]]) == list(np.flatnonzero(arm))


@pytest.mark.parametrize("d,m", [(4, 2), (6, 2), (6, 3), (8, 3), (8, 5)])
def test_spectral_m_sets_closed_form(d, m):
    mu_min, lam = m_sets(d, m).spectral_constants()
    assert abs(mu_min - m / d) <= 1e-9
    assert abs(lam - m * (d - m) / (d * (d - 1))) <= 1e-9


@pytest.mark.parametrize("m", [2, 3, 4])
def test_spectral_matchings_closed_form(m):
    mu_min, lam = matchings(m).spectral_constants()
    assert abs(mu_min - 1 / m) <= 1e-9
    assert abs(lam - 1 / (m - 1)) <= 1e-9


@pytest.mark.parametrize("n", [4, 5, 6])
def test_spectral_spanning_trees(n):
    mu_min, lam = spanning_trees(n).spectral_constants()
    # edge symmetry: each edge lies in (N - 1) / C(N, 2) = 2 / N of all trees
    assert abs(mu_min - 2 / n) <= 1e-9
    assert math.log(1 / mu_min) <= 2 * n
    assert lam >= 1 / n - 17 / (4 * n * n)


@pytest.mark.parametrize("aset", SETS, ids=lambda s: f"{s.kind}-{s.d}")
def test_second_moment_is_psd(aset):
    S = aset.second_moment()
    np.testing.assert_allclose(S, S.T, atol=0)
    assert np.linalg.eigvalsh(S).min() >= -1e-10
    assert aset.mu0().sum() == pytest.approx(1.0, abs=1e-12)


def test_from_config():
    assert from_config({"kind": "m-sets", "d": 5, "m": 2}) == m_sets(5, 2)
    assert from_config({"kind": "spanning-trees", "n_nodes": 4}).d == 6
    assert from_config({"kind": "disjoint-paths", "n_paths": 3, "length": 2}).m == 2


@pytest.mark.parametrize("cfg", [{"kind": "grid"}, {"kind": "m-sets", "d": 3},
                                 {"kind": "m-sets", "d": 2, "m": 3}])
def test_from_config_rejects(cfg):
    with pytest.raises(ValueError):
        from_config(cfg)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7).flatmap(lambda d: st.tuples(st.just(d), st.integers(1, d))),
       st.lists(st.floats(-5, 5), min_size=7, max_size=7))
def test_m_sets_argmax_is_top_m(dm, w):
    d, m = dm
    w = np.asarray(w[:d])
    arm = m_sets(d, m).argmax_linear(w, method="structure")
    assert arm.sum() == m
    assert arm @ w == pytest.approx(np.sort(w)[-m:].sum(), abs=1e-12)
