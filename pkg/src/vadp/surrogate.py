"""Dispersion distributions, surrogate MDPs, their solutions and uplifted policies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .abstraction import Abstraction
from .core import DEFAULT_HISTORY_CAP, Environment, History, HistoryTable, PMF_TOL
from .oracle import NearOptimalSet, ValueOracle

TIE_TOL = 1e-9
ROW_TOL = 1e-9
DEFAULT_ROLLOUTS = 256


class IncompleteSupportError(ValueError):
    """A member history can step into a state with no enumerated member."""


class MemberIndex:
    """Realized states of an abstraction at a depth and their member histories.

    Per chain key it tabulates the induced abstract process
    ``mu_psi[k, a, s']`` (summed over percepts in index order), the expected
    reward and, when an oracle is given, ``Q*``.
    """

    def __init__(self, abstraction: Abstraction, env: Environment, depth: int,
                 cap: int = DEFAULT_HISTORY_CAP):
        table = HistoryTable(env, depth, cap)
        chain = table.chain
        key_labels = abstraction.key_labels()
        present = table.present_keys
        states = sorted({key_labels[k] for k in present})
        state_id = {lab: i for i, lab in enumerate(states)}
        K, A, E, S = len(chain), env.n_actions, env.n_percepts, len(states)
        state_of_key = np.array([state_id.get(lab, -1) for lab in key_labels], dtype=np.int64)
        mu_psi = np.zeros((K, A, S))
        missing = set()
        for k in present:
            for a in range(A):
                for e in range(E):
                    nk = chain.succ[k, a, e]
                    if nk < 0:
                        continue
                    s2 = state_of_key[nk]
                    if s2 < 0:
                        missing.add(key_labels[nk])
                    else:
                        mu_psi[k, a, s2] += chain.prob[k, a, e]
        hist_state = state_of_key[table.key]
        self.abstraction = abstraction
        self.env = env
        self.depth = depth
        self.table = table
        self.chain = chain
        self.states = states
        self.state_id = state_id
        self.state_of_key = state_of_key
        self.hist_state = hist_state
        self.members = [np.flatnonzero(hist_state == s) for s in range(S)]
        self.mu_psi = mu_psi
        self.reward = chain.reward
        self.missing = sorted(missing)
        self._rows = [np.ascontiguousarray(mu_psi[:, a, :]) for a in range(A)]
        self._rewards = [np.ascontiguousarray(chain.reward[:, a]) for a in range(A)]

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return self.env.n_actions

    def member_keys(self, s: int) -> np.ndarray:
        return self.table.key[self.members[s]]

    def q_keys(self, oracle: ValueOracle) -> np.ndarray:
        return oracle.q[self.chain.z]

    def v_keys(self, oracle: ValueOracle) -> np.ndarray:
        return oracle.v[self.chain.z]


@dataclass(eq=False)
class DispersionDistribution:
    """Per (state, action) pmf over member histories of mixed length.

    ``support[(s, a)]`` holds ascending history indices into
    ``index.table`` and their weights.
    """

    index: MemberIndex
    kind: str
    support: dict = field(default_factory=dict)

    def pmf(self, s: int, a: int) -> dict[History, float]:
        idx, w = self.support[(s, a)]
        hs = self.index.table.histories
        return {hs[i]: float(x) for i, x in zip(idx, w)}

    def weight(self, h: History, s: int, a: int) -> float:
        i = self.index.table.position.get(h)
        if i is None:
            return 0.0
        idx, w = self.support[(s, a)]
        j = np.searchsorted(idx, i)
        return float(w[j]) if j < len(idx) and idx[j] == i else 0.0

    def validate(self):
        for (s, a), (idx, w) in self.support.items():
            if abs(w.sum() - 1) > PMF_TOL or w.min() < 0:
                raise ValueError(f"B(.|{s},{a}) is not a pmf")
            if np.any(self.index.hist_state[idx] != s):
                raise ValueError(f"B(.|{s},{a}) puts mass off its state")


Selector = Union[str, Callable[[list[History]], int]]


def _select(histories: list[History], selector: Selector) -> int:
    if callable(selector):
        return selector(histories)
    if selector == "shortest":
        return min(range(len(histories)), key=lambda i: (len(histories[i]), histories[i].key))
    if selector == "first":
        return 0
    if selector == "last":
        return len(histories) - 1
    if selector == "longest":
        return max(range(len(histories)), key=lambda i: (len(histories[i]), histories[i].key))
    raise ValueError(f"unknown dirac selector {selector!r}")


def _rollout_counts(index: MemberIndex, rollouts: int, seed: int) -> np.ndarray:
    table, chain, env = index.table, index.chain, index.env
    rng = np.random.default_rng(seed)
    children = table.children
    counts = np.zeros((len(table), env.n_actions))
    roots = {h.last: i for i, h in enumerate(table.histories) if len(h) == 1}
    for _ in range(rollouts):
        i = roots[int(rng.choice(env.n_percepts, p=env.initial))]
        while True:
            a = int(rng.integers(env.n_actions))
            counts[i, a] += 1
            if len(table.histories[i]) == table.depth:
                break
            e = int(rng.choice(env.n_percepts, p=chain.prob[table.key[i], a]))
            i = int(children[i, a, e])
    return counts


def make_dispersion(abstraction: Abstraction, env: Environment, depth: int,
                    kind: str = "uniform", seed: int = 0, *,
                    selector: Selector = "shortest", rollouts: int = DEFAULT_ROLLOUTS,
                    index: Optional[MemberIndex] = None) -> DispersionDistribution:
    """Dispersion distribution of the given kind over enumerated member histories.

    ``uniform``: equal mass on every member. ``dirac``: all mass on the
    member picked by ``selector``. ``rolloutFrequency``: empirical (history,
    action) visit counts of ``rollouts`` uniform-random rollouts; a pair that
    is never visited falls back to uniform. ``randomSimplex``: a seeded flat
    Dirichlet draw per pair.
    """
    if index is None:
        index = MemberIndex(abstraction, env, depth)
    elif index.abstraction is not abstraction or index.depth != depth:
        raise ValueError("member index was built for a different abstraction or depth")
    A = env.n_actions
    B = DispersionDistribution(index, kind)
    if kind == "uniform":
        for s, idx in enumerate(index.members):
            for a in range(A):
                B.support[(s, a)] = (idx, np.full(len(idx), 1.0 / len(idx)))
    elif kind == "dirac":
        hs = index.table.histories
        for s, idx in enumerate(index.members):
            pick = idx[_select([hs[i] for i in idx], selector)]
            for a in range(A):
                B.support[(s, a)] = (np.array([pick]), np.ones(1))
    elif kind == "rolloutFrequency":
        counts = _rollout_counts(index, rollouts, seed)
        for s, idx in enumerate(index.members):
            for a in range(A):
                c = counts[idx, a]
                total = c.sum()
                w = c / total if total > 0 else np.full(len(idx), 1.0 / len(idx))
                B.support[(s, a)] = (idx, w)
    elif kind == "randomSimplex":
        rng = np.random.default_rng(seed)
        for s, idx in enumerate(index.members):
            for a in range(A):
                B.support[(s, a)] = (idx, rng.dirichlet(np.ones(len(idx))))
    else:
        raise ValueError(f"unknown dispersion kind {kind!r}")
    return B


def dirac_dispersion(index: MemberIndex, picks: dict, kind: str = "dirac") -> DispersionDistribution:
    """Dirac distribution from ``picks[(s, a)] = history index``."""
    B = DispersionDistribution(index, kind)
    for s in range(index.n_states):
        for a in range(index.n_actions):
            B.support[(s, a)] = (np.array([picks[(s, a)]]), np.ones(1))
    return B


@dataclass(eq=False)
class SurrogateMDP:
    states: list
    transition: np.ndarray  # (S, A, S)
    reward: np.ndarray  # (S, A)

    def __post_init__(self):
        if self.transition.size and np.any(np.abs(self.transition.sum(axis=2) - 1) > ROW_TOL):
            raise ValueError("surrogate transition rows must sum to 1")
        if self.reward.size and (self.reward.min() < -ROW_TOL or self.reward.max() > 1 + ROW_TOL):
            raise ValueError("surrogate rewards must lie in [0, 1]")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]


def _assemble(B: DispersionDistribution, q_keys: Optional[np.ndarray]):
    index = B.index
    S, A = index.n_states, index.n_actions
    P = np.zeros((S, A, S))
    R = np.zeros((S, A))
    Qbar = np.zeros((S, A))
    zeros = np.zeros(len(index.chain))
    keys = index.table.key
    for s in range(S):
        for a in range(A):
            idx, w = B.support[(s, a)]
            qcol = np.ascontiguousarray(q_keys[:, a]) if q_keys is not None else zeros
            row, r, qb = kernels.assemble(w, keys[idx], index._rows[a], index._rewards[a], qcol)
            P[s, a] = row
            R[s, a] = r
            Qbar[s, a] = qb
    return P, R, Qbar


def _check_consistent(abstraction, B, depth=None):
    if B.index.abstraction is not abstraction:
        raise ValueError("dispersion distribution belongs to a different abstraction")
    if depth is not None and B.index.depth != depth:
        raise ValueError(f"dispersion distribution was built at depth {B.index.depth}, not {depth}")


def build_surrogate(abstraction: Abstraction, env: Environment,
                    B: DispersionDistribution, depth: Optional[int] = None) -> SurrogateMDP:
    """``mu_bar(s'|sa) = sum_h B(h|sa) mu_psi(s'|ha)`` and ``r_bar(sa) = sum_h B(h|sa) r(ha)``.

    Members are accumulated in canonical history order.
    """
    _check_consistent(abstraction, B, depth)
    if B.index.missing:
        raise IncompleteSupportError(
            "successor states without enumerated members at depth "
            f"{B.index.depth}: {[lab.text() for lab in B.index.missing]}")
    P, R, _ = _assemble(B, None)
    return SurrogateMDP(list(B.index.states), P, R)


def b_averaged_q(abstraction: Abstraction, B: DispersionDistribution, oracle) -> np.ndarray:
    """``Qbar(sa) = sum_h B(h|sa) Q*(ha)``."""
    _check_consistent(abstraction, B)
    index = B.index
    if isinstance(oracle, ValueOracle) and oracle.env is index.env:
        return _assemble(B, index.q_keys(oracle))[2]
    S, A = index.n_states, index.n_actions
    out = np.zeros((S, A))
    hs = index.table.histories
    for (s, a), (idx, w) in B.support.items():
        acc = 0.0
        for i, x in zip(idx, w):
            acc += x * float(oracle.q_of(hs[i])[a])
        out[s, a] = acc
    return out


@dataclass(eq=False)
class SurrogateSolution:
    states: list
    q: np.ndarray
    v: np.ndarray
    optimal_actions: list[NearOptimalSet]
    residual: float
    q_bar: Optional[np.ndarray] = None
    uplifted_policy: Optional["UpliftedPolicy"] = None

    @property
    def greedy(self) -> np.ndarray:
        """Lowest-index optimal action per state."""
        return np.array([min(acts) for acts in self.optimal_actions], dtype=np.int64)


def optimal_action_sets(q: np.ndarray, v: np.ndarray, tie_tol: float = TIE_TOL) -> list[NearOptimalSet]:
    A = q.shape[1]
    return [NearOptimalSet.from_actions(np.flatnonzero(v[s] - q[s] <= tie_tol), A)
            for s in range(q.shape[0])]


def solve_surrogate(m: SurrogateMDP, gamma: float, tie_tol: float = TIE_TOL) -> SurrogateSolution:
    """Value iteration to residual 1e-12; ties within ``tie_tol`` of the max are optimal."""
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if m.n_states == 0:
        raise ValueError("surrogate MDP has no states")
    q, v, _, res = kernels.value_iteration(m.transition, m.reward, gamma)
    return SurrogateSolution(list(m.states), q, v, optimal_action_sets(q, v, tie_tol), float(res))


class UpliftedPolicy:
    """``h -> pi*_surrogate(psi(h))``; unseen labels get action 0 and are recorded."""

    def __init__(self, abstraction: Abstraction, states: list, state_actions: np.ndarray):
        self.abstraction = abstraction
        self.lookup = {lab: int(a) for lab, a in zip(states, state_actions)}
        self.fallbacks: set = set()

    def act(self, h: History) -> int:
        label = self.abstraction.classify(h)
        a = self.lookup.get(label)
        if a is None:
            self.fallbacks.add(label)
            return 0
        return a

    def key_actions(self) -> np.ndarray:
        out = []
        for label in self.abstraction.key_labels():
            a = self.lookup.get(label)
            if a is None:
                self.fallbacks.add(label)
                a = 0
            out.append(a)
        return np.array(out, dtype=np.int64)


class KeyPolicy:
    """Policy given as an action per chain key (latent state, last percept)."""

    def __init__(self, env: Environment, actions):
        self.env = env
        self.actions = np.asarray(actions, dtype=np.int64)
        if self.actions.shape != (len(env.chain),):
            raise ValueError("need one action per chain key")

    def act(self, h: History) -> int:
        k = self.env.chain.index[(self.env.latent.fold(h), h.last)]
        return int(self.actions[k])

    def key_actions(self) -> np.ndarray:
        return self.actions


def uplift(solution: SurrogateSolution, abstraction: Abstraction) -> UpliftedPolicy:
    policy = UpliftedPolicy(abstraction, solution.states, solution.greedy)
    solution.uplifted_policy = policy
    return policy


def chain_policy_values(env: Environment, actions: np.ndarray, gamma: float) -> np.ndarray:
    """Exact ``V^pi`` per chain key for a key-measurable policy."""
    T, r = env.chain.policy_matrix(actions)
    return kernels.policy_evaluation(T, r, gamma)[0]


@dataclass
class PolicyEvaluation:
    values: dict  # History -> V^pi
    sup_gap: float
    worst: Optional[History]


def evaluate_policy(env: Environment, policy, gamma: float, oracle: ValueOracle,
                    depth: Optional[int] = None, horizon: Optional[int] = None) -> PolicyEvaluation:
    """``V^pi`` on enumerated histories and ``max_h V*(h) - V^pi(h)``.

    Policies exposing ``key_actions`` are evaluated exactly on the chain.
    Any other policy needs ``horizon``: it is then evaluated by a
    ``horizon``-step lookahead below each history, which can overstate the
    gap by at most ``gamma**horizon / (1 - gamma)``.
    """
    chain = env.chain
    if depth is None:
        depth = chain.coverage_depth
    table = HistoryTable(env, depth)
    if hasattr(policy, "key_actions"):
        vk = chain_policy_values(env, policy.key_actions(), gamma)
        vpi = vk[table.key]
    elif horizon is not None:
        memo: dict = {}

        def value(h, k):
            if k == 0:
                return 0.0
            hit = memo.get((h, k))
            if hit is None:
                a = policy.act(h)
                hit = env.reward(h, a)
                if gamma > 0 and k > 1:
                    pmf = env.step_distribution(h, a)
                    hit += gamma * sum(pmf[e] * value(h.extend(a, e), k - 1)
                                       for e in range(env.n_percepts) if pmf[e] > 0)
                memo[(h, k)] = hit
            return hit

        vpi = np.array([value(h, horizon) for h in table.histories])
    else:
        raise ValueError("policy is not key-measurable; pass a lookahead horizon")
    vstar = oracle.v[chain.z[table.key]]
    gaps = vstar - vpi
    j = int(np.argmax(gaps))
    return PolicyEvaluation(dict(zip(table.histories, vpi.tolist())),
                            max(0.0, float(gaps[j])), table.histories[j])
