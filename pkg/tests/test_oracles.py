import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpe.actions import Action
from cpe.bench import MULTI_BANDIT_THETA
from cpe.oracles import (ConstrainedQuery, DagPaths, EnumerationCapError, PartitionMatroid,
                         PerfectMatching, RankDeficiencyError, TopK, count, k_best, maximize,
                         rank_basis, space_from_json, span_basis)

from conftest import (brute_actions, brute_ranking, feasible_matching, feasible_partition,
                      feasible_path, feasible_topk, random_dag)

MB = PartitionMatroid([5, 10])
THETA = np.array(MULTI_BANDIT_THETA)


def arms(d, *one_based):
    return Action.from_support(d, [i - 1 for i in one_based])


# -- maximize ------------------------------------------------------------------------

def test_maximize_multi_bandit():
    x, v = maximize(MB, ConstrainedQuery(THETA))
    assert x == arms(10, 1, 6)
    assert v == pytest.approx(3.125)


def test_maximize_topk_full_selection_is_all_ones():
    sp = TopK(6, 6)
    x, _ = sp.maximize(np.random.default_rng(0).normal(size=6))
    assert x.bits() == "111111"


def test_maximize_2x2_matching():
    x, v = PerfectMatching(2).maximize(np.array([1.0, 2.0, 3.0, 5.0]))
    assert x.bits() == "1001"
    assert v == 6.0


def test_maximize_infeasible_returns_none():
    assert TopK(4, 2).maximize(np.ones(4), forced_in=[0, 1, 2]) is None
    assert MB.maximize(THETA, forced_out=range(5)) is None
    assert PerfectMatching(3).maximize(np.ones(9), forced_in=[0, 1]) is None


def test_constraint_overlap_rejected():
    with pytest.raises(ValueError):
        ConstrainedQuery(np.ones(3), forced_in={1}, forced_out={1})


def test_maximize_tie_breaks_lexicographically():
    sp = TopK(5, 2)
    x, v = sp.maximize(np.array([1.0, 2.0, 2.0, 1.0, 2.0]))
    # three arms at weight 2: the lex-smallest bit string among the best pairs is 00101
    assert v == 4.0
    assert x.bits() == "00101"


def _check_constrained(space, actions, w, fin, fout):
    ok = [a for a in actions if all(a.has(i) for i in fin) and not any(a.has(i) for i in fout)]
    res = space.maximize(w, fin, fout)
    if not ok:
        assert res is None
        return
    x_best, v_best = brute_ranking(ok, w)[0]
    assert res is not None
    assert res[0] == x_best
    assert res[1] == pytest.approx(v_best, abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_constrained_maximize_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    cases = [
        (TopK(7, 3), brute_actions(7, lambda b: feasible_topk(b, 3))),
        (PartitionMatroid([2, 5, 8]), brute_actions(8, lambda b: feasible_partition(b, [2, 5, 8]))),
        (PerfectMatching(3), brute_actions(9, lambda b: feasible_matching(b, 3))),
    ]
    for space, actions in cases:
        d = space.d
        w = rng.normal(size=d)
        roles = rng.integers(0, 5, size=d)
        fin = [i for i in range(d) if roles[i] == 0]
        fout = [i for i in range(d) if roles[i] == 1]
        _check_constrained(space, actions, w, fin, fout)


@given(st.integers(0, 2 ** 32 - 1))
def test_integer_weights_ties_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    space = PerfectMatching(3)
    actions = brute_actions(9, lambda b: feasible_matching(b, 3))
    w = rng.integers(0, 3, size=9).astype(float)
    got = space.k_best(w, 6)
    want = brute_ranking(actions, w)
    assert [x for x, _ in got] == [x for x, _ in want]


# -- k_best ----------------------------------------------------------------------------

def test_k_best_multi_bandit_values():
    vals = [v for _, v in k_best(MB, THETA, 3)]
    assert vals == pytest.approx([3.125, 3.0, 2.875])


def test_k_best_k1_equals_maximize():
    w = np.random.default_rng(3).normal(size=9)
    sp = PerfectMatching(3)
    assert sp.k_best(w, 1)[0] == sp.maximize(w)


def test_k_best_topk_with_tie():
    got = TopK(5, 2).k_best(np.array([5.0, 4.0, 3.0, 2.0, 1.0]), 4)
    assert [v for _, v in got] == [9, 8, 7, 7]
    # {2,3} is 01100 and {1,4} is 10010 in 1-based arms; the former is lexicographically smaller
    assert got[2][0] == arms(5, 2, 3)
    assert got[3][0] == arms(5, 1, 4)


def test_k_best_exhausts_space():
    got = TopK(4, 2).k_best(np.arange(4.0), 100)
    assert len(got) == 6
    assert len({x for x, _ in got}) == 6


def test_k_best_rejects_bad_k():
    with pytest.raises(ValueError):
        TopK(4, 2).k_best(np.ones(4), 0)


@given(st.integers(0, 2 ** 32 - 1), st.integers(5, 9))
def test_dag_k_best_matches_brute_force(seed, n_edges):
    rng = np.random.default_rng(seed)
    edges, s, t = random_dag(rng, 5, n_edges)
    sp = DagPaths(edges, s, t)
    actions = brute_actions(sp.d, lambda b: feasible_path(b, edges, s, t))
    assert sp.count() == len(actions)
    w = rng.normal(size=sp.d)
    got = sp.k_best(w, sp.d + 1)
    want = brute_ranking(actions, w)[: sp.d + 1]
    assert [x for x, _ in got] == [x for x, _ in want]


@given(st.integers(3, 8).flatmap(lambda d: st.tuples(st.just(d), st.integers(1, d - 1))),
       st.integers(0, 2 ** 32 - 1))
def test_k_best_values_nonincreasing_and_distinct(dk, seed):
    d, k = dk
    sp = TopK(d, k)
    w = np.random.default_rng(seed).normal(size=d)
    got = sp.k_best(w, 12)
    vals = [v for _, v in got]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    assert len({x for x, _ in got}) == len(got)
    assert all(sp.contains(x) for x, _ in got)


# -- count / enumerate ------------------------------------------------------------------

def test_counts():
    assert count(TopK(8, 3)) == 56
    assert count(MB) == 25
    diamond = DagPaths([("s", "a"), ("a", "t"), ("s", "b"), ("b", "t")], "s", "t")
    assert count(diamond) == 2
    assert count(PerfectMatching(4)) == 24


def test_enumerate_agrees_with_contains():
    for sp, feas in [(TopK(6, 2), lambda b: feasible_topk(b, 2)),
                     (PerfectMatching(3), lambda b: feasible_matching(b, 3))]:
        assert sp.enumerate() == brute_actions(sp.d, feas)


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        TopK(30, 15).enumerate(cap=1000)


def test_dag_rejects_cycle():
    with pytest.raises(ValueError):
        DagPaths([(0, 1), (1, 2), (2, 0), (2, 3)], 0, 3)


def test_space_json_roundtrip():
    for sp in [TopK(5, 2), MB, PerfectMatching(3),
               DagPaths([[0, 1], [1, 2], [0, 2]], 0, 2)]:
        back = space_from_json(sp.d, sp.to_json())
        assert back.enumerate() == sp.enumerate()


# -- bases -------------------------------------------------------------------------------

def _rank(actions):
    return int(np.linalg.matrix_rank(np.vstack([a.vector for a in actions])))


def test_rank_basis_unit_vectors():
    basis = rank_basis(TopK(4, 1))
    assert sorted(basis) == sorted(Action.from_support(4, [i]) for i in range(4))


def test_rank_basis_pairs():
    basis = rank_basis(TopK(4, 2))
    assert len(basis) == 4
    assert _rank(basis) == 4
    assert all(x.size == 2 for x in basis)


def test_rank_basis_matching_is_deficient():
    with pytest.raises(RankDeficiencyError) as exc:
        rank_basis(PerfectMatching(3))
    assert exc.value.rank == 5
    assert "unreachable" in str(exc.value)


@pytest.mark.parametrize("space,feas", [
    (PerfectMatching(3), lambda b: feasible_matching(b, 3)),
    (PerfectMatching(4), lambda b: feasible_matching(b, 4)),
    (MB, lambda b: feasible_partition(b, [5, 10])),
    (TopK(6, 3), lambda b: feasible_topk(b, 3)),
])
def test_span_basis_rank_equals_enumerated_rank(space, feas):
    basis, Q = span_basis(space)
    r = _rank(brute_actions(space.d, feas))
    assert len(basis) == r == Q.shape[1]
    assert _rank(basis) == r
    np.testing.assert_allclose(Q.T @ Q, np.eye(r), atol=1e-10)
    assert all(space.contains(x) for x in basis)


def test_matching_span_dimension_formula():
    for n in (2, 3, 4, 5):
        _, Q = span_basis(PerfectMatching(n))
        assert Q.shape[1] == (n - 1) ** 2 + 1
