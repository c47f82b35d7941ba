import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vadp.abstraction import (AbstractionParams, Kind, PerceptLabel, QGridLabel, VADPLabel,
                              build_abstraction, build_esa_qgrid, build_mdp_abstraction,
                              build_vadp, build_vdp, enumerate_states)
from vadp.bounds import esa_bound, vadp_bound
from vadp.core import History, HistoryTable
from vadp.instances import make_instance
from vadp.oracle import NearOptimalSet, near_optimal_set, solve_latent, solve_tree

E0, E1 = History((0,)), History((0, 1), (1,))


def test_params():
    p = AbstractionParams(0.1, 0.5)
    assert p.eps0 == pytest.approx(0.02) and p.eps_prime == 0.1
    assert AbstractionParams(0.1, 0.5, Kind.ESA_QGRID).grid_width == pytest.approx(0.025)
    for eps, g in ((0, 0.5), (0.1, 1.0), (0.1, -0.5)):
        with pytest.raises(ValueError):
            AbstractionParams(eps, g)


def test_vadp_chain2(chain2, chain2_oracle):
    ab = build_vadp(chain2_oracle, AbstractionParams(0.1, 0.5))
    s0, s1 = ab.classify(E0), ab.classify(E1)
    assert s0 == VADPLabel(50, 1, NearOptimalSet.from_actions([1], 2))
    assert s1 == VADPLabel(100, 0, NearOptimalSet.from_actions([0], 2))
    assert (s0.text(), s1.text()) == ("(50|1|01)", "(100|0|10)")
    assert enumerate_states(ab, chain2, 4) == [s0, s1]
    assert enumerate_states(ab, chain2, 1) == [s0]


def test_vdp_and_esa_chain2(chain2, chain2_oracle):
    vdp = build_vdp(chain2_oracle, AbstractionParams(0.1, 0.5, Kind.VDP))
    assert [s.text() for s in enumerate_states(vdp, chain2, 4)] == ["(50|1)", "(100|0)"]
    esa = build_esa_qgrid(chain2_oracle, AbstractionParams(0.1, 0.5, Kind.ESA_QGRID))
    assert esa.classify(E0) == QGridLabel((20, 40)) and esa.classify(E1) == QGridLabel((80, 20))
    assert len(enumerate_states(esa, chain2, 4)) == 2 <= esa_bound(0.1, 0.5, 2) == 6400


def test_wrong_kind_rejected(chain2_oracle):
    with pytest.raises(ValueError):
        build_vdp(chain2_oracle, AbstractionParams(0.1, 0.5))


def test_bandit_single_state():
    env = make_instance({"name": "bandit", "k": 2, "rewards": [0.3, 0.7]})
    o = solve_latent(env, 0.5)
    for kind in (Kind.VADP, Kind.VDP, Kind.ESA_QGRID, Kind.MDP_LAST_PERCEPT):
        ab = build_abstraction(o, AbstractionParams(0.1, 0.5, kind), env)
        assert len(enumerate_states(ab, env, 5)) == 1


def test_full_slack_collapses_near_opt():
    env = make_instance("randomLatent(3,2,3,seed=1)")
    ab = build_vadp(solve_latent(env, 0.0), AbstractionParams(1.0, 0.0))
    for lab in enumerate_states(ab, env, 4):
        assert lab.near_opt.text() == "11"


def test_mdp_abstraction():
    assert len(enumerate_states(build_mdp_abstraction(make_instance("chain2")), make_instance("chain2"), 4)) == 2
    parity = make_instance("parity")
    labels = enumerate_states(build_mdp_abstraction(parity), parity, 5)
    assert labels == [PerceptLabel(0), PerceptLabel(1)] and parity.latent.n_states == 4
    bandit = make_instance("bandit(3)")
    assert len(enumerate_states(build_mdp_abstraction(bandit), bandit, 3)) == 1


def test_single_action_labels_by_value_only():
    env = make_instance("randomLatent(4,1,2,seed=3)")
    o = solve_latent(env, 0.5)
    ab = build_vdp(o, AbstractionParams(0.05, 0.5, Kind.VDP))
    assert {lab.opt_action for lab in enumerate_states(ab, env, 4)} == {0}


def test_enumerate_states_deterministic():
    env = make_instance("randomLatent(3,2,3,seed=1)")
    o = solve_latent(env, 0.9)
    ab = build_vadp(o, AbstractionParams(0.05, 0.9))
    assert enumerate_states(ab, env, 4) == enumerate_states(ab, env, 4)


def test_history_level_oracle_gives_same_labels():
    env = make_instance("tmaze(2)")
    tree = solve_tree(env, 0.5, 30)
    latent = solve_latent(env, 0.5)
    p = AbstractionParams(0.2, 0.5)
    a, b = build_vadp(tree, p), build_vadp(latent, p)
    for h in HistoryTable(env, 4).histories:
        assert a.classify(h) == b.classify(h)


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 200), st.sampled_from([0.0, 0.3, 0.6, 0.9]), st.floats(0.02, 0.5))
def test_definition_and_bounds_on_random_instances(seed, gamma, eps):
    env = make_instance(f"randomLatent(5,3,2,seed={seed})")
    o = solve_latent(env, gamma)
    p = AbstractionParams(eps, gamma)
    vadp = build_vadp(o, p)
    vdp = build_vdp(o, AbstractionParams(eps, gamma, Kind.VDP))
    table = HistoryTable(env, 4)
    members = {}
    for h in table.histories:
        members.setdefault(vadp.classify(h), []).append(h)
    for lab, hs in members.items():
        vs = [o.v_of(h) for h in hs]
        assert max(vs) - min(vs) <= p.eps0
        assert {o.opt_of(h) for h in hs} == {lab.opt_action}
        assert {near_optimal_set(o, h, p.eps_prime) for h in hs} == {lab.near_opt}
        # refinement: one VDP state per VADP state
        assert len({vdp.classify(h) for h in hs}) == 1
        # max-min equality on the member set
        q = np.array([o.q_of(h) for h in hs])
        assert abs(q.min(axis=0).max() - q.max(axis=1).min()) <= 1e-9
    assert len(members) <= vadp_bound(eps, gamma, env.n_actions)
    esa = build_esa_qgrid(o, AbstractionParams(eps, gamma, Kind.ESA_QGRID))
    assert len(enumerate_states(esa, env, 4)) <= esa_bound(eps, gamma, env.n_actions)
