import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vadp.abstraction import AbstractionParams, Kind, build_abstraction, build_vadp
from vadp.core import History
from vadp.instances import make_instance
from vadp.oracle import solve_latent, solve_tree
from vadp.surrogate import (IncompleteSupportError, KeyPolicy, UpliftedPolicy, MemberIndex, SurrogateMDP,
                            b_averaged_q, build_surrogate, dirac_dispersion, evaluate_policy,
                            make_dispersion, solve_surrogate, uplift)

E0, E1 = History((0,)), History((0, 1), (1,))


@pytest.fixture
def chain2_vadp(chain2, chain2_oracle):
    return build_vadp(chain2_oracle, AbstractionParams(0.1, 0.5))


def test_uniform_dispersion_depth2(chain2, chain2_vadp):
    B = make_dispersion(chain2_vadp, chain2, 2, "uniform")
    s0, s1 = B.index.states
    assert s1.text() == "(100|0|10)"
    assert B.pmf(1, 0) == {E1: 1.0}
    assert B.pmf(0, 1) == {E0: 0.5, History((0, 0), (0,)): 0.5}
    assert B.weight(E0, 0, 1) == 0.5 and B.weight(E1, 0, 1) == 0.0
    B.validate()


def test_dirac_shortest(chain2, chain2_vadp):
    B = make_dispersion(chain2_vadp, chain2, 4, "dirac")
    assert B.pmf(0, 0) == {E0: 1.0} and B.pmf(0, 1) == {E0: 1.0}
    longest = make_dispersion(chain2_vadp, chain2, 4, "dirac", selector="longest")
    assert len(next(iter(longest.pmf(0, 0)))) == 4


def test_seeded_dispersions_repeat(chain2, chain2_vadp):
    for kind in ("randomSimplex", "rolloutFrequency"):
        a = make_dispersion(chain2_vadp, chain2, 4, kind, seed=3)
        b = make_dispersion(chain2_vadp, chain2, 4, kind, seed=3)
        for key in a.support:
            assert np.array_equal(a.support[key][1], b.support[key][1])
        a.validate()
    with pytest.raises(ValueError):
        make_dispersion(chain2_vadp, chain2, 4, "gaussian")


@pytest.mark.parametrize("kind", ["uniform", "dirac", "randomSimplex", "rolloutFrequency"])
def test_chain2_surrogate_is_the_chain(chain2, chain2_oracle, chain2_vadp, kind):
    B = make_dispersion(chain2_vadp, chain2, 4, kind, seed=1)
    m = build_surrogate(chain2_vadp, chain2, B, 4)
    assert m.transition[0, 1] == pytest.approx([0.0, 1.0], abs=1e-12)
    assert m.transition[1, 0] == pytest.approx([0.0, 1.0], abs=1e-12)
    assert m.reward[1, 0] == pytest.approx(1.0, abs=1e-12)
    qbar = b_averaged_q(chain2_vadp, B, chain2_oracle)
    assert qbar[0] == pytest.approx([0.5, 1.0], abs=1e-11)
    sol = solve_surrogate(m, 0.5)
    assert sol.q == pytest.approx(np.array([[0.5, 1.0], [2.0, 0.5]]), abs=1e-11)
    assert [list(s) for s in sol.optimal_actions] == [[1], [0]]
    pi = uplift(sol, chain2_vadp)
    assert pi.act(E0) == 1 and pi.act(E1) == 0 and sol.uplifted_policy is pi
    ev = evaluate_policy(chain2, pi, 0.5, chain2_oracle)
    assert ev.sup_gap == pytest.approx(0.0, abs=1e-11)


def test_bandit_self_loop():
    env = make_instance({"name": "bandit", "k": 2, "rewards": [0.3, 0.7]})
    ab = build_vadp(solve_latent(env, 0.5), AbstractionParams(0.1, 0.5))
    m = build_surrogate(ab, env, make_dispersion(ab, env, 3))
    assert m.transition == pytest.approx(np.ones((1, 2, 1)), abs=1e-12)
    assert m.reward == pytest.approx(np.array([[0.3, 0.7]]), abs=1e-12)
    sol = solve_surrogate(SurrogateMDP(["s"], np.ones((1, 1, 1)), np.array([[0.4]])), 0.5)
    assert sol.v[0] == pytest.approx(0.8, abs=1e-11)


def test_myopic_surrogate_values_are_rewards():
    env = make_instance("randomLatent(3,2,3,seed=1)")
    o = solve_latent(env, 0.0)
    ab = build_vadp(o, AbstractionParams(0.1, 0.0))
    B = make_dispersion(ab, env, 4, "randomSimplex", seed=2)
    m = build_surrogate(ab, env, B)
    sol = solve_surrogate(m, 0.0)
    assert np.array_equal(sol.q, m.reward)
    assert np.array_equal(b_averaged_q(ab, B, o), m.reward)


def test_dirac_bit_identical():
    env = make_instance("randomLatent(6,2,3,seed=3)")
    o = solve_latent(env, 0.9)
    ab = build_vadp(o, AbstractionParams(0.2, 0.9))
    index = MemberIndex(ab, env, 4)
    picks = {(s, a): int(index.members[s][-1]) for s in range(index.n_states) for a in range(2)}
    B = dirac_dispersion(index, picks)
    m = build_surrogate(ab, env, B)
    qbar = b_averaged_q(ab, B, o)
    for (s, a), i in picks.items():
        k = index.table.key[i]
        assert np.array_equal(m.transition[s, a], index.mu_psi[k, a])
        assert m.reward[s, a] == index.reward[k, a]
        assert qbar[s, a] == o.q_of(index.table.histories[i])[a]


def test_generic_oracle_path_matches_latent():
    env = make_instance("parity")
    o = solve_latent(env, 0.5)
    ab = build_vadp(o, AbstractionParams(0.1, 0.5))
    B = make_dispersion(ab, env, 4, "randomSimplex", seed=0)
    tree = solve_tree(env, 0.5, 40)
    assert np.allclose(b_averaged_q(ab, B, tree), b_averaged_q(ab, B, o), atol=1e-9)


def test_incomplete_support_detected():
    env = make_instance("tmaze(3)")
    ab = build_vadp(solve_latent(env, 0.5), AbstractionParams(0.1, 0.5))
    B = make_dispersion(ab, env, 2)
    with pytest.raises(IncompleteSupportError):
        build_surrogate(ab, env, B)
    with pytest.raises(ValueError):
        make_dispersion(ab, env, 3, index=B.index)


def test_fallback_and_policy_eval(chain2, chain2_oracle, chain2_vadp):
    s0 = chain2_vadp.classify(E0)
    pi = UpliftedPolicy(chain2_vadp, [s0], np.array([1]))
    assert pi.act(E0) == 1 and not pi.fallbacks
    assert pi.act(E1) == 0 and pi.fallbacks == {chain2_vadp.classify(E1)}
    always0 = KeyPolicy(chain2, [0, 0])
    ev = evaluate_policy(chain2, always0, 0.5, chain2_oracle)
    assert ev.values[E0] == 0.0 and ev.sup_gap == pytest.approx(1.0, abs=1e-11)
    assert ev.worst == E0


def test_lookahead_evaluation_agrees_with_exact(chain2, chain2_oracle):
    class Greedy:
        def act(self, h):
            return 1 if h.last == 0 else 0

    ev = evaluate_policy(chain2, Greedy(), 0.5, chain2_oracle, horizon=40)
    assert ev.sup_gap == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        evaluate_policy(chain2, Greedy(), 0.5, chain2_oracle)


def test_myopic_optimal_policy_has_no_gap():
    env = make_instance("randomLatent(3,2,3,seed=2)")
    o = solve_latent(env, 0.0)
    pi = KeyPolicy(env, o.opt[env.chain.z])
    assert evaluate_policy(env, pi, 0.0, o).sup_gap == 0.0


@settings(deadline=None, max_examples=25)
@given(st.integers(0, 100), st.sampled_from(list(Kind)), st.integers(0, 5))
def test_surrogate_is_stochastic(seed, kind, bseed):
    env = make_instance(f"randomLatent(4,2,2,seed={seed})")
    o = solve_latent(env, 0.7)
    ab = build_abstraction(o, AbstractionParams(0.1, 0.7, kind), env)
    depth = env.chain.coverage_depth
    for bkind in ("uniform", "randomSimplex", "rolloutFrequency"):
        m = build_surrogate(ab, env, make_dispersion(ab, env, depth, bkind, bseed))
        assert np.allclose(m.transition.sum(axis=2), 1.0, atol=1e-12)
        assert m.reward.min() >= 0 and m.reward.max() <= 1
