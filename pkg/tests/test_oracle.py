import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vadp.core import Environment, History, HistoryTable, LatentModel
from vadp.instances import make_instance
from vadp.oracle import NearOptimalSet, near_optimal_set, solve_latent, solve_tree

from conftest import ALL_INSTANCES

E0, E1 = History((0,)), History((0, 1), (1,))


def test_chain2_fixed_point(chain2_oracle):
    o = chain2_oracle
    assert o.v == pytest.approx([1.0, 2.0], abs=1e-11)
    assert o.q == pytest.approx(np.array([[0.5, 1.0], [2.0, 0.5]]), abs=1e-11)
    assert o.opt.tolist() == [1, 0]
    assert o.opt_of(E0) == 1 and o.opt_of(E1) == 0
    # iteration from zero approaches the fixed point from below
    assert np.all(o.v <= [1.0, 2.0])
    assert o.residual <= 1e-12 and o.obe_residual() <= 1e-11


def test_myopic_oracle_is_reward():
    env = make_instance("randomLatent(3,2,3,seed=1)")
    o = solve_latent(env, 0.0)
    assert np.array_equal(o.q, env.latent.reward)
    assert np.array_equal(o.v, env.latent.reward.max(axis=1))


def test_bandit_geometric_value():
    env = make_instance({"name": "bandit", "k": 2, "rewards": [0.3, 0.7]})
    o = solve_latent(env, 0.5)
    assert o.v_of(History((0, 0), (0,))) == pytest.approx(1.4, abs=1e-11)


def test_tree_chain2():
    env = make_instance("chain2")
    t = solve_tree(env, 0.5, 20)
    assert abs(t.v_of(E0) - 1.0) <= 2.0**-20 / 0.5
    assert t.tail_bound == pytest.approx(2.0**-20 / 0.5)
    one = solve_tree(env, 0.5, 1)
    assert one.v_of(E0) == 0.0 and one.v_of(E1) == 1.0 and one.tail_bound == 1.0


@pytest.mark.parametrize("name", ALL_INSTANCES)
@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.9])
def test_tree_matches_latent(name, gamma):
    env = make_instance(name)
    latent = solve_latent(env, gamma)
    tree = solve_tree(env, gamma, 20)
    table = HistoryTable(env, env.chain.coverage_depth)
    err = max(float(np.abs(tree.q_of(h) - latent.q_of(h)).max()) for h in table.histories)
    assert err <= tree.tail_bound + 1e-9
    if gamma == 0:
        assert err == 0.0


def test_tree_without_sharing_agrees():
    env = make_instance("parity")
    shared, plain = solve_tree(env, 0.5, 8), solve_tree(env, 0.5, 8, share_subtrees=False)
    for h in HistoryTable(env, 3).histories:
        assert np.array_equal(shared.q_of(h), plain.q_of(h))


def test_near_optimal_set_examples(chain2_oracle):
    s = near_optimal_set(chain2_oracle, E0, 0.1)
    assert list(s) == [1] and s.text() == "01"
    assert list(near_optimal_set(chain2_oracle, E0, 1 / (1 - 0.5))) == [0, 1]
    assert 1 in near_optimal_set(chain2_oracle, E0, 0.0)
    with pytest.raises(ValueError):
        near_optimal_set(chain2_oracle, E0, -1)


def test_near_optimal_set_type():
    s = NearOptimalSet.from_actions([0, 2], 3)
    assert s.text() == "101" and len(s) == 2 and 1 not in s
    assert s.issubset(NearOptimalSet.from_actions([0, 1, 2], 3))
    assert not NearOptimalSet.from_actions([1], 3).issubset(s)


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 50), st.floats(0, 0.95), st.floats(0, 3), st.floats(0, 3))
def test_near_optimal_sets_monotone_and_contain_argmax(seed, gamma, e1, e2):
    env = make_instance(f"randomLatent(4,3,2,seed={seed})")
    o = solve_latent(env, gamma)
    lo, hi = sorted((e1, e2))
    for h in HistoryTable(env, 3).histories:
        a, b = near_optimal_set(o, h, lo), near_optimal_set(o, h, hi)
        assert a.issubset(b)
        assert o.opt_of(h) in near_optimal_set(o, h, 0.0)


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 50), st.permutations([0, 1, 2]))
def test_value_invariant_under_action_relabelling(seed, perm):
    env = make_instance(f"randomLatent(4,3,2,seed={seed})")
    lm = env.latent
    perm = np.array(perm)
    relabelled = Environment("perm", 3, 2, env.initial, latent=LatentModel(
        lm.init_map, lm.update[:, perm], lm.kernel[:, perm], lm.reward[:, perm]))
    a, b = solve_latent(env, 0.8), solve_latent(relabelled, 0.8)
    assert np.allclose(a.v, b.v, atol=1e-12, rtol=0)
    inv = np.argsort(perm)
    assert np.allclose(a.q, b.q[:, inv], atol=1e-12, rtol=0)


def test_gamma_range():
    env = make_instance("chain2")
    for g in (-0.1, 1.0):
        with pytest.raises(ValueError):
            solve_latent(env, g)
    with pytest.raises(ValueError):
        solve_tree(env, 0.5, 0)
