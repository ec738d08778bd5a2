import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpe.actions import Action
from cpe.bench import MULTI_BANDIT_THETA, multi_bandit_instance
from cpe.core import EnvVector, NoiseSpec
from cpe.env import (EXACT_GENERATOR_LIMIT, Environment, FeedbackRule, InfeasibleActionError,
                     ObserverSetError, box_error_constant, build_observer_set, full_bandit_matrix,
                     make_rng, observer_from_actions, pull_full_bandit, pull_partial,
                     semi_bandit_matrix, top_entry_matrix)
from cpe.oracles import PartitionMatroid, PerfectMatching, TopK, rank_basis, span_basis

THETA = EnvVector.tight(MULTI_BANDIT_THETA)
MB = PartitionMatroid([5, 10])


def arms(d, *one_based):
    return Action.from_support(d, [i - 1 for i in one_based])


def brute_box_error(observer) -> float:
    """max ||sum_i B_i eta_i|| over every vertex eta of the noise box (independent of merging)."""
    blocks, start = [], 0
    for M in observer.matrices:
        rows = M.shape[0]
        blocks.append(observer.pinv[:, start:start + rows] @ M)
        start += rows
    B = np.hstack(blocks)
    B = B[:, np.abs(B).sum(axis=0) > 0]  # zero columns never move the error
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=B.shape[1]):
        best = max(best, float(np.linalg.norm(B @ np.array(signs))))
    return best


# -- pulls --------------------------------------------------------------------------------

def test_pull_noiseless_multi_bandit():
    env = Environment(THETA, NoiseSpec("none"), space=MB)
    assert pull_full_bandit(env, arms(10, 1, 6)) == pytest.approx(3.125, abs=1e-12)
    assert env.samples == 1


def test_pull_infeasible_raises():
    env = Environment(THETA, NoiseSpec("none"), space=MB)
    with pytest.raises(InfeasibleActionError):
        env.pull(arms(10, 1, 2))
    assert env.samples == 0


def test_pull_zero_vector_is_pure_noise():
    env = Environment(EnvVector.tight([1.0, 2.0]), NoiseSpec("gaussian", sigma=1.0),
                      np.random.default_rng(0))
    draws = np.array([env.pull(Action(2, 0)) for _ in range(4000)])
    assert np.all(draws == 0.0)  # an empty action sums no arm noise


def test_scalar_noise_on_zero_vector_has_mean_zero():
    env = Environment(EnvVector.tight([1.0, 2.0]), NoiseSpec("scalar-gaussian", sigma=1.0),
                      np.random.default_rng(0))
    draws = np.array([env.pull(Action(2, 0)) for _ in range(4000)])
    assert abs(draws.mean()) < 4 / math.sqrt(4000)
    assert draws.std() == pytest.approx(1.0, rel=0.1)


@pytest.mark.parametrize("noise", [NoiseSpec("gaussian", sigma=0.5), NoiseSpec("uniform-box"),
                                   NoiseSpec("scalar-gaussian", sigma=2.0)])
def test_pull_mean_and_variance(noise):
    theta = np.array([0.3, -0.1, 0.2, 0.4])
    x = Action.from_string("1011")
    env = Environment(EnvVector.tight(theta), noise, np.random.default_rng(3))
    n = 20000
    draws = np.array([env.pull(x) for _ in range(n)])
    var = {"gaussian": 3 * 0.25, "uniform-box": 3 / 3, "scalar-gaussian": 4.0}[noise.kind]
    assert abs(draws.mean() - x.value(theta)) < 4 * math.sqrt(var / n)
    assert draws.var() == pytest.approx(var, rel=0.05)


@pytest.mark.parametrize("noise", [NoiseSpec("gaussian", sigma=[0.5, 1.0, 2.0]),
                                   NoiseSpec("uniform-box", range=0.5),
                                   NoiseSpec("scalar-gaussian", sigma=1.5), NoiseSpec("none")])
def test_pull_total_matches_summed_pulls_in_distribution(noise):
    theta = np.array([0.2, -0.4, 0.1])
    x = Action.from_string("111")
    env = Environment(EnvVector.tight(theta), noise, np.random.default_rng(9))
    count, reps = 40, 3000
    totals = np.array([env.pull_total(x, count) for _ in range(reps)])
    assert env.samples == count * reps
    mean = count * x.value(theta)
    sig = noise.sigma
    per = {"gaussian": sum(s * s for s in sig) if isinstance(sig, tuple) else 0,
           "uniform-box": 3 * 0.25 / 3, "scalar-gaussian": 2.25, "none": 0.0}[noise.kind]
    if per == 0:
        assert np.allclose(totals, mean)
        return
    assert abs(totals.mean() - mean) < 4 * math.sqrt(count * per / reps)
    assert totals.var() == pytest.approx(count * per, rel=0.1)


def test_uniform_box_noise_stays_in_box():
    env = Environment(EnvVector.tight([0.0] * 5), NoiseSpec("uniform-box"), np.random.default_rng(1))
    eta = env._eta((1000,))
    assert np.all(np.abs(eta) <= 1.0)


def test_make_rng_independent_and_reproducible():
    a = make_rng(7, 0).standard_normal(5)
    b = make_rng(7, 0).standard_normal(5)
    c = make_rng(7, 1).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


# -- partial feedback ------------------------------------------------------------------------

def test_partial_full_bandit_equals_scalar_pull():
    inst = multi_bandit_instance(NoiseSpec("scalar-gaussian", sigma=1.0))
    x = arms(10, 2, 7)
    e1 = Environment(inst.theta, inst.noise, make_rng(4), inst.space, FeedbackRule("full-bandit"))
    e2 = Environment(inst.theta, inst.noise, make_rng(4), inst.space, FeedbackRule("full-bandit"))
    for _ in range(5):
        assert pull_partial(e1, x)[0] == pytest.approx(pull_full_bandit(e2, x), abs=1e-12)


def test_partial_semi_bandit_illustration():
    d = 6
    theta = np.array([0.2, 0.3, 0.4, 0.6, 0.1, 0.05])
    env = Environment(EnvVector.tight(theta), NoiseSpec("none"), feedback=FeedbackRule("semi-bandit"))
    x = Action.from_support(d, [0, 1, 2, 3])
    np.testing.assert_allclose(pull_partial(env, x), [0.2, 0.3, 0.4, 0.6])


def test_partial_paired_sum_illustration():
    d = 6
    theta = np.array([0.2, 0.3, 0.4, 0.6, 0.1, 0.05])
    x = Action.from_support(d, [0, 1, 2, 3])
    M = [[1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 0, 0]]
    rule = FeedbackRule("explicit", {x.bits(): M})
    env = Environment(EnvVector.tight(theta), NoiseSpec("none"), feedback=rule)
    np.testing.assert_allclose(pull_partial(env, x), [0.5, 1.0])
    with pytest.raises(ValueError):
        pull_partial(env, Action.from_support(d, [4]))


def test_feedback_matrices():
    x = Action.from_string("0110")
    np.testing.assert_array_equal(full_bandit_matrix(x), [[0, 1, 1, 0]])
    np.testing.assert_array_equal(semi_bandit_matrix(x), [[0, 1, 0, 0], [0, 0, 1, 0]])
    np.testing.assert_array_equal(top_entry_matrix(x), [[0, 1, 0, 0]])


def test_observe_rounds_shapes_and_counts():
    inst = multi_bandit_instance(NoiseSpec("none"))
    obs = build_observer_set(inst.space, full_bandit_matrix, target_rank=9)
    env = Environment.for_instance(inst, make_rng(0))
    Y = env.observe_rounds(obs, 7)
    assert Y.shape == (7, obs.stacked.shape[0])
    assert env.samples == 7 * len(obs.actions)
    np.testing.assert_allclose(Y[3], obs.stacked @ inst.theta.theta)


# -- observer sets ------------------------------------------------------------------------

def test_top_entry_identity_observer_beta():
    d = 4
    sp = TopK(d, 1)
    obs = build_observer_set(sp, top_entry_matrix, [Action.from_support(d, [i]) for i in range(d)])
    np.testing.assert_array_equal(obs.stacked, np.eye(d))
    assert len(obs.actions) == d
    assert obs.beta_sigma == pytest.approx(2.0, abs=1e-12)


def test_duplicate_pool_stalls():
    sp = TopK(3, 1)
    x = Action.from_support(3, [0])
    with pytest.raises(ObserverSetError) as exc:
        build_observer_set(sp, full_bandit_matrix, [x, x, x])
    assert "rank 1" in str(exc.value)


def test_full_bandit_multi_bandit_rank_basis_pool():
    # the partition structure spans rank 9 of 10, so full rank over R^10 is unreachable
    with pytest.raises(ValueError):
        rank_basis(MB)
    with pytest.raises(ObserverSetError):
        build_observer_set(MB, full_bandit_matrix)
    obs = build_observer_set(MB, full_bandit_matrix, target_rank=9)
    assert obs.rank == 9
    assert len(obs.actions) <= 10
    # the projection estimator still recovers every action's mean exactly
    th = obs.pinv @ (obs.stacked @ THETA.theta)
    for x in MB.enumerate():
        assert x.value(th) == pytest.approx(x.value(THETA.theta), abs=1e-10)


def test_pool_with_infeasible_action_rejected():
    with pytest.raises(InfeasibleActionError):
        build_observer_set(TopK(3, 1), full_bandit_matrix, [Action.from_string("110")])


@pytest.mark.parametrize("d", [4, 9, 16])
def test_identity_beta_is_sqrt_d(d):
    obs = observer_from_actions([Action.from_support(d, [i]) for i in range(d)],
                                [np.eye(d)[[i]] for i in range(d)])
    assert abs(obs.beta_sigma - math.sqrt(d)) <= 1e-12


@given(st.integers(0, 2 ** 32 - 1))
def test_exact_beta_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    d = 3
    sp = TopK(d, 2)
    actions = sp.enumerate()
    rule = [semi_bandit_matrix, full_bandit_matrix][int(rng.integers(0, 2))]
    obs = build_observer_set(sp, rule, actions)
    want = brute_box_error(obs)
    assert obs.beta_sigma == pytest.approx(want, rel=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_beta_bounds_for_random_matrices(seed):
    """Exact value lies between a sampled lower bound and the coordinatewise upper bound."""
    rng = np.random.default_rng(seed)
    d, k = 3, 4
    mats = [rng.normal(size=(1, d)) for _ in range(k)]
    stacked = np.vstack(mats)
    pinv = np.linalg.pinv(stacked)
    exact, kind = box_error_constant(pinv, mats)
    assert kind == "exact"
    blocks = np.hstack([pinv[:, [i]] @ M for i, M in enumerate(mats)])
    sampled = max(np.linalg.norm(blocks @ rng.choice([-1.0, 1.0], size=blocks.shape[1]))
                  for _ in range(200))
    assert exact >= sampled - 1e-12
    row_l1 = np.abs(blocks).sum(axis=1)
    assert exact <= np.sqrt((row_l1 ** 2).sum()) + 1e-12


def test_beta_upper_bound_used_for_many_generators():
    d = 25
    rng = np.random.default_rng(0)
    mats = [rng.normal(size=(1, d)) for _ in range(d)]
    pinv = np.linalg.pinv(np.vstack(mats))
    beta, kind = box_error_constant(pinv, mats)
    assert d > EXACT_GENERATOR_LIMIT
    assert kind == "upper-bound"
    assert beta > 0


def test_matching_observer_beta_exact():
    sp = PerfectMatching(3)
    basis, _ = span_basis(sp)
    obs = build_observer_set(sp, full_bandit_matrix, basis, target_rank=5)
    assert obs.beta_kind == "exact"
    assert obs.beta_sigma == pytest.approx(brute_box_error(obs), rel=1e-12)


@pytest.mark.parametrize("noise", [NoiseSpec("uniform-box", range=0.8),
                                   NoiseSpec("gaussian", sigma=[0.5, 1.0, 1.5, 2.0])])
def test_observe_rounds_noise_moments(noise):
    """Each stacked feedback row has mean M theta and variance sum_j M_ij^2 var(eta_j)."""
    theta = np.array([0.1, 0.2, -0.3, 0.4])
    sp = TopK(4, 2)
    obs = build_observer_set(sp, semi_bandit_matrix, sp.enumerate())
    env = Environment(EnvVector.tight(theta), noise, make_rng(3), sp)
    rounds = 40000
    Y = env.observe_rounds(obs, rounds)
    var_arm = (np.full(4, 0.8 ** 2 / 3) if noise.kind == "uniform-box"
               else np.array(noise.sigma) ** 2)
    want_var = (obs.stacked ** 2) @ var_arm
    np.testing.assert_allclose(Y.mean(axis=0), obs.stacked @ theta, atol=4 * np.sqrt(want_var.max() / rounds))
    np.testing.assert_allclose(Y.var(axis=0), want_var, rtol=0.05)
