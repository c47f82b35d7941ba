import numpy as np
import pytest

from vadp.binarizer import (BinarizedEnvironment, binarize, binarized_reports, internal_eps0,
                            run_binarized_pipeline)
from vadp.core import HistoryTable, enumerate_histories
from vadp.instances import make_instance
from vadp.oracle import solve_latent


def test_two_actions_is_identity():
    env = make_instance("chain2")
    benv, lam = binarize(env, 0.5)
    assert (benv.bits, lam, benv.n_actions) == (1, 0.5, 2)
    for r in enumerate_histories(env, 4):
        h = r.history
        assert benv.lift(h) == h
        for a in range(2):
            assert np.array_equal(benv.step_distribution(h, a), env.step_distribution(h, a))
            assert benv.reward(h, a) == env.reward(h, a)
    assert np.allclose(solve_latent(benv, lam).v[benv.chain.z], solve_latent(env, 0.5).v[env.chain.z])


def test_three_action_codes():
    benv = BinarizedEnvironment(make_instance("chain3"), 0.25)
    assert benv.bits == 2 and benv.lam == 0.5
    assert [benv.encode(a) for a in range(3)] == [(0, 0), (0, 1), (1, 0)]
    assert [benv.decode(b) for b in ((0, 0), (0, 1), (1, 0), (1, 1))] == [0, 1, 2, 0]


@pytest.mark.parametrize("name", ["chain3", "randomLatent(6,3,2,seed=4)", "bandit(5)"])
def test_macro_equivalence(name):
    env = make_instance(name)
    benv, _ = binarize(env, 0.5)
    d = benv.bits
    for r in enumerate_histories(env, 3):
        h = r.history
        hb = benv.lift(h)
        assert benv.split(hb) == (h, ())
        for a in range(env.n_actions):
            bits = benv.encode(a)
            cur = hb
            for b in bits[:-1]:
                assert benv.reward(cur, b) == 0.0
                assert benv.step_distribution(cur, b)[h.last] == 1.0
                cur = cur.extend(b, h.last)
            assert np.array_equal(benv.step_distribution(cur, bits[-1]), env.step_distribution(h, a))
            assert benv.reward(cur, bits[-1]) == env.reward(h, a)
            # latent and direct descriptions of the wrapper agree
            z = benv.latent.fold(cur)
            assert np.array_equal(benv.latent.kernel[z, bits[-1]], env.step_distribution(h, a))
        assert len(hb) == (len(h) - 1) * d + 1


@pytest.mark.parametrize("gamma", [0.25, 0.81])
def test_value_scaling(gamma):
    env = make_instance("chain3")
    benv, lam = binarize(env, gamma)
    vb, vi = solve_latent(benv, lam), solve_latent(env, gamma)
    for h in HistoryTable(env, 3).histories:
        assert abs(vb.v_of(benv.lift(h)) - lam ** (benv.bits - 1) * vi.v_of(h)) <= 1e-8


def test_pipeline_examples():
    rep = run_binarized_pipeline(make_instance("chain2"), 0.5, 0.1, 4)
    assert rep.bits == 1 and rep.n_states == 2 and rep.worst_gap == 0.0
    rep = run_binarized_pipeline(make_instance("chain3"), 0.5, 0.2, 4)
    assert rep.n_actions == 2 and rep.worst_gap <= 0.4 + 1e-8
    assert rep.bound == 10000 and rep.n_states <= rep.bound
    assert all(r.passed for r in binarized_reports(rep))


def test_internal_width():
    # d = 1 reduces to the plain value-bin width
    assert internal_eps0(0.1, 0.5, 2) == pytest.approx(0.1 * 0.5 / 2.5)
    lam = 0.5 ** 0.5
    expected = lam * (1 - lam) ** 2 * 0.2 / ((1 - 0.5) * (1 + 3 * lam))
    assert internal_eps0(0.2, 0.5, 3) == pytest.approx(expected)


def test_rejections():
    with pytest.raises(ValueError):
        binarize(make_instance("bandit(1)"), 0.5)
    with pytest.raises(ValueError):
        run_binarized_pipeline(make_instance("chain3"), 0.0, 0.1, 4)


def test_decoded_policy_roundtrip():
    env = make_instance("chain3")
    benv, lam = binarize(env, 0.5)
    vb = solve_latent(benv, lam)
    acts = benv.decode_key_policy(vb.opt[benv.chain.z])
    assert acts.tolist() == solve_latent(env, 0.5).opt[env.chain.z].tolist()
