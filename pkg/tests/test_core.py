import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpe.actions import Action, stack
from cpe.bench import MULTI_BANDIT_THETA, multi_bandit_instance
from cpe.core import (EnvVector, InstanceDescriptor, NonUniqueOptimumError, NoiseSpec,
                      gap_profile, reward_mean, reward_value)
from cpe.oracles import TopK

THETA = EnvVector.tight(MULTI_BANDIT_THETA)


def arms(*one_based):
    """Action on the Multi-Bandit arms written 1-based, as in the instance tables."""
    return Action.from_support(10, [i - 1 for i in one_based])


# -- actions --------------------------------------------------------------------------

def test_action_bits_roundtrip():
    x = Action.from_support(5, [1, 4])
    assert x.bits() == "01001"
    assert Action.from_string("01001") == x
    assert x.support == (1, 4)
    np.testing.assert_array_equal(x.vector, [0, 1, 0, 0, 1])


def test_action_order_is_lexicographic_on_bits():
    a = Action.from_support(5, [1, 2])   # 01100
    b = Action.from_support(5, [0, 3])   # 10010
    assert a < b


def test_action_rejects_out_of_range():
    with pytest.raises(ValueError):
        Action.from_support(3, [3])
    with pytest.raises(ValueError):
        Action(3, 8)


@given(st.integers(1, 20).flatmap(lambda d: st.tuples(st.just(d), st.integers(0, 2 ** d - 1))))
def test_action_mask_bits_agree(dm):
    d, mask = dm
    x = Action(d, mask)
    assert Action.from_string(x.bits()) == x
    assert int(x.bits(), 2) == mask
    assert x.size == x.bits().count("1")


def test_stack_rows():
    X = stack([Action.from_string("110"), Action.from_string("011")])
    np.testing.assert_array_equal(X, [[1, 1, 0], [0, 1, 1]])


# -- reward_mean ----------------------------------------------------------------------

def test_reward_mean_best_pair():
    assert reward_mean(arms(1, 6), THETA) == pytest.approx(3.125, abs=1e-12)


def test_reward_mean_empty_action_is_zero():
    assert reward_mean(Action(10, 0), THETA) == 0.0


def test_reward_mean_pair_3_6():
    assert reward_mean(arms(3, 6), THETA) == pytest.approx(2.125, abs=1e-12)


def test_reward_mean_dimension_mismatch():
    with pytest.raises(ValueError):
        reward_mean(Action(3, 1), THETA)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.data())
def test_reward_mean_matches_dot_product(theta, data):
    d = len(theta)
    mask = data.draw(st.integers(0, 2 ** d - 1))
    x = Action(d, mask)
    env = EnvVector(np.array(theta), float(np.linalg.norm(theta)) + 1.0)
    assert reward_mean(x, env) == pytest.approx(float(x.vector @ np.array(theta)), abs=1e-9)


def test_reward_value_mean_normalized():
    assert reward_value(arms(1, 6), THETA, "mean-normalized") == pytest.approx(1.5625)
    with pytest.raises(ValueError):
        reward_value(Action(10, 0), THETA, "mean-normalized")


# -- env vector / noise -----------------------------------------------------------------

def test_env_vector_norm_bound():
    with pytest.raises(ValueError):
        EnvVector(np.array([3.0, 4.0]), 4.9)
    assert EnvVector(np.array([3.0, 4.0]), 5.0).d == 2


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("laplace")
    with pytest.raises(ValueError):
        NoiseSpec("uniform-box", range=1.5)
    with pytest.raises(ValueError):
        NoiseSpec("scalar-gaussian", sigma=(1.0, 2.0))
    assert NoiseSpec("gaussian", sigma=[1, 2]).sigma == (1.0, 2.0)


# -- gap_profile ------------------------------------------------------------------------

def test_gap_profile_multi_bandit():
    prof = gap_profile(multi_bandit_instance())
    assert prof.best == arms(1, 6)
    assert prof.sorted_values[1] == pytest.approx(3.0)
    assert prof.delta_min == pytest.approx(0.125)
    assert len(prof.sorted_values) == 25


def test_gap_profile_single_action_has_no_delta_min():
    inst = InstanceDescriptor(3, TopK(3, 3), EnvVector.tight([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        gap_profile(inst).delta_min


def test_gap_profile_topk_4_2():
    inst = InstanceDescriptor(4, TopK(4, 2), EnvVector.tight([4.0, 3.0, 2.0, 1.0]))
    prof = gap_profile(inst)
    assert prof.sorted_values[0] == 7.0
    assert prof.delta_min == 1.0
    # independent: all pairs
    pair_vals = sorted((a + b for i, a in enumerate([4, 3, 2, 1]) for b in [4, 3, 2, 1][i + 1:]),
                       reverse=True)
    assert list(prof.sorted_values) == pair_vals


def test_gap_profile_sorted_nonincreasing():
    prof = gap_profile(multi_bandit_instance())
    assert all(a >= b for a, b in zip(prof.sorted_values, prof.sorted_values[1:]))


def test_non_unique_optimum_rejected():
    with pytest.raises(NonUniqueOptimumError):
        InstanceDescriptor(4, TopK(4, 1), EnvVector.tight([1.0, 1.0, 0.5, 0.0]))


def test_instance_json_roundtrip(tmp_path):
    inst = multi_bandit_instance(NoiseSpec("gaussian", sigma=0.5), "mean-normalized")
    path = tmp_path / "mb.json"
    inst.save(path)
    back = InstanceDescriptor.load(path)
    assert back.to_json() == inst.to_json()
    assert json.loads(path.read_text())["structure"] == {"type": "partition", "boundaries": [5, 10]}


def test_instance_rejects_bad_fields():
    doc = multi_bandit_instance().to_json()
    doc["theta"] = doc["theta"][:-1]
    with pytest.raises(ValueError):
        InstanceDescriptor.from_json(doc)
    doc = multi_bandit_instance().to_json()
    doc["reward"] = "cubic"
    with pytest.raises(ValueError):
        InstanceDescriptor.from_json(doc)


def test_optimum_via_oracle_matches_enumeration():
    inst = multi_bandit_instance()
    assert inst.optimum() == gap_profile(inst).best
