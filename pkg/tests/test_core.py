
import numpy as np
import pytest
from hypothesis import given, strategies as st

from vadp.core import (Environment, History, HistoryTable, LatentModel, ResourceLimitError,
                       enumerate_histories)
from vadp.instances import make_instance

from conftest import ALL_INSTANCES


def H(text):
    return History.parse(text)


def test_history_shape_and_text():
    h = History((0, 1), (1,))
    assert len(h) == 2 and h.last == 1
    assert str(h) == "(e0 a1 e1)"
    assert History.parse(str(h)) == h
    assert h.extend(0, 1) == H("(e0 a1 e1 a0 e1)")
    assert h.extend(0, 1).prefix(2) == h
    with pytest.raises(ValueError):
        History((0, 1), ())


def test_history_prefix_sorts_first():
    h = H("(e0 a1 e1)")
    assert H("(e0)") < h < h.extend(0, 0)
    assert h.extend(0, 1) < H("(e1)")


histories = st.integers(1, 4).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 2), min_size=n, max_size=n),
                        st.lists(st.integers(0, 1), min_size=n - 1, max_size=n - 1))
).map(lambda t: History(tuple(t[0]), tuple(t[1])))


@given(histories, histories, histories)
def test_canonical_order_is_total(a, b, c):
    assert (a < b) + (a == b) + (a > b) == 1
    if a <= b and b <= a:
        assert a == b
    if a <= b and b <= c:
        assert a <= c


def test_enumerate_chain2_small():
    env = make_instance("chain2")
    assert [r.history for r in enumerate_histories(env, 1)] == [H("(e0)")]
    got = enumerate_histories(env, 2)
    assert [str(r.history) for r in got] == ["(e0)", "(e0 a0 e0)", "(e0 a1 e1)"]
    assert all(r.reach == 1.0 for r in got)


def test_enumerate_depth_one_gives_support_of_initial():
    env = make_instance("tmaze(3)")
    assert [r.history for r in enumerate_histories(env, 1)] == [H("(e0)"), H("(e1)")]


@pytest.mark.parametrize("name", ALL_INSTANCES)
def test_enumeration_is_prefix_closed(name):
    env = make_instance(name)
    big = [r.history for r in enumerate_histories(env, 4)]
    for m in (1, 2, 3):
        assert [h for h in big if len(h) <= m] == [r.history for r in enumerate_histories(env, m)]


@pytest.mark.parametrize("name", ALL_INSTANCES)
def test_history_table_matches_generic_enumeration(name):
    env = make_instance(name)
    table = HistoryTable(env, 4)
    assert table.histories == [r.history for r in enumerate_histories(env, 4)]
    lm = env.latent
    for h, k in zip(table.histories, table.key):
        assert env.chain.keys[k] == (lm.fold(h), h.last)


@pytest.mark.parametrize("name", [n for n in ALL_INSTANCES if "random" not in n])
def test_direct_and_latent_descriptions_agree(name):
    env = make_instance(name)
    lm = env.latent
    for r in enumerate_histories(env, 6):
        h, z = r.history, lm.fold(r.history)
        for a in range(env.n_actions):
            assert np.array_equal(env.step_distribution(h, a), lm.kernel[z, a])
            assert env.reward(h, a) == lm.reward[z, a]


def test_step_distribution_examples():
    env = make_instance("chain2")
    assert env.step_distribution(H("(e0)"), 1).tolist() == [0.0, 1.0]
    assert env.step_distribution(H("(e0 a1 e1)"), 0).tolist() == [0.0, 1.0]
    with pytest.raises(ValueError):
        env.step_distribution(H("(e0)"), 2)
    with pytest.raises(ValueError):
        env.step_distribution(H("(e5)"), 0)


def test_enumeration_cap():
    env = make_instance("randomLatent(3,2,3,seed=1)")
    with pytest.raises(ResourceLimitError):
        enumerate_histories(env, 6, cap=1000)
    with pytest.raises(ResourceLimitError):
        HistoryTable(env, 6, cap=1000)


def test_reach_probabilities_sum_per_action_sequence():
    env = make_instance("randomLatent(3,2,3,seed=1)")
    got = enumerate_histories(env, 3)
    by_actions = {}
    for r in got:
        if len(r.history) == 3:
            by_actions.setdefault(r.history.actions, 0.0)
            by_actions[r.history.actions] += r.reach
    assert len(by_actions) == 4
    assert all(abs(p - 1) < 1e-12 for p in by_actions.values())


def test_latent_model_validation():
    ok = dict(init_map=[0], update=np.zeros((1, 1, 1), int), kernel=np.ones((1, 1, 1)),
              reward=np.zeros((1, 1)))
    LatentModel(**ok)
    with pytest.raises(ValueError):
        LatentModel(**{**ok, "kernel": np.full((1, 1, 1), 0.5)})
    with pytest.raises(ValueError):
        LatentModel(**{**ok, "reward": np.full((1, 1), 2.0)})
    with pytest.raises(ValueError):
        LatentModel(**{**ok, "update": np.ones((1, 1, 1), int)})
    with pytest.raises(ValueError):
        Environment("x", 1, 1, [0.5])


def test_chain_coverage():
    sizes = {"chain2": (2, 2), "parity": (4, 3), "tmaze(3)": (10, 5)}
    for name, (k, d) in sizes.items():
        chain = make_instance(name).chain
        assert (len(chain), chain.coverage_depth) == (k, d)
        present = HistoryTable(make_instance(name), d).present_keys
        assert len(present) == k
