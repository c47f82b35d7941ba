"""Exact optimal values: latent value iteration and truncated history trees."""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering

import numpy as np

from . import kernels
from .core import DEFAULT_HISTORY_CAP, Environment, History, ResourceLimitError


@total_ordering
@dataclass(frozen=True)
class NearOptimalSet:
    """Set of actions as a bitmask; bit ``a`` set iff action ``a`` is in the set."""

    mask: int
    n_actions: int

    @classmethod
    def from_actions(cls, actions, n_actions: int) -> NearOptimalSet:
        mask = 0
        for a in actions:
            mask |= 1 << int(a)
        return cls(mask, n_actions)

    def __contains__(self, a: int) -> bool:
        return bool(self.mask >> a & 1)

    def __iter__(self):
        return (a for a in range(self.n_actions) if self.mask >> a & 1)

    def __len__(self):
        return bin(self.mask).count("1")

    def __lt__(self, other: NearOptimalSet):
        return (self.mask, self.n_actions) < (other.mask, other.n_actions)

    def issubset(self, other: NearOptimalSet) -> bool:
        return self.mask & ~other.mask == 0

    def text(self) -> str:
        return "".join("1" if a in self else "0" for a in range(self.n_actions))


def near_optimal_mask(q_row: np.ndarray, v: float, eps_prime: float) -> int:
    mask = 0
    for a, qa in enumerate(q_row):
        if v - qa <= eps_prime:
            mask |= 1 << a
    return mask


class _OracleQueries:
    gamma: float
    n_actions: int

    def q_of(self, h: History) -> np.ndarray:
        raise NotImplementedError

    def v_of(self, h: History) -> float:
        return float(self.q_of(h).max())

    def opt_of(self, h: History) -> int:
        # argmax returns the lowest index among ties
        return int(np.argmax(self.q_of(h)))


@dataclass(eq=False)
class ValueOracle(_OracleQueries):
    """Optimal tables on the latent state space, served to histories by folding."""

    env: Environment
    gamma: float
    q: np.ndarray
    v: np.ndarray
    opt: np.ndarray
    residual: float
    iterations: int
    solve_tolerance: float = kernels.VI_TOL

    @property
    def n_actions(self) -> int:
        return self.q.shape[1]

    def q_of(self, h: History) -> np.ndarray:
        return self.q[self.env.latent.fold(h)]

    def v_of(self, h: History) -> float:
        return float(self.v[self.env.latent.fold(h)])

    def opt_of(self, h: History) -> int:
        return int(self.opt[self.env.latent.fold(h)])

    def obe_residual(self) -> float:
        """Sup-norm violation of the optimal Bellman equation by the tables."""
        lm = self.env.latent
        T = lm.transition_matrix()
        return float(np.max(np.abs(self.q - (lm.reward + self.gamma * T @ self.v))))


def _check_gamma(gamma):
    if not 0 <= gamma < 1:
        raise ValueError(f"discount must lie in [0, 1), got {gamma}")


def solve_latent(env: Environment, gamma: float, tol: float = kernels.VI_TOL) -> ValueOracle:
    """Value iteration on the latent model to Bellman residual <= ``tol``.

    Iteration starts at zero, so with nonnegative rewards the returned
    values approach the fixed point from below.
    """
    _check_gamma(gamma)
    if env.latent is None:
        raise ValueError(f"{env.name} has no latent model")
    lm = env.latent
    Q, V, iters, res = kernels.value_iteration(lm.transition_matrix(), lm.reward, gamma, tol)
    return ValueOracle(env, float(gamma), Q, V, np.argmax(Q, axis=1), float(res), int(iters), tol)


class TreeOracle(_OracleQueries):
    """Backward induction over the depth-``horizon`` history tree below any history.

    ``q_of(h)`` is the ``horizon``-step lookahead value with zero terminal
    value, which is within ``gamma**horizon / (1 - gamma)`` of the optimum.
    It only uses the environment's history-level kernel and reward. With
    ``share_subtrees`` set, subtrees below histories with the same latent
    state and last percept are computed once.
    """

    def __init__(self, env: Environment, gamma: float, horizon: int,
                 share_subtrees: bool | None = None, cap: int = DEFAULT_HISTORY_CAP):
        _check_gamma(gamma)
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if share_subtrees is None:
            share_subtrees = env.latent is not None
        if share_subtrees and env.latent is None:
            raise ValueError("subtree sharing needs a latent model")
        self.env = env
        self.gamma = float(gamma)
        self.horizon = horizon
        self.share_subtrees = share_subtrees
        self.cap = cap
        self.n_actions = env.n_actions
        self._memo: dict = {}

    @property
    def tail_bound(self) -> float:
        return self.gamma ** self.horizon / (1 - self.gamma)

    def _memo_key(self, h: History, k: int):
        if self.share_subtrees:
            return (self.env.latent.fold(h), h.last, k)
        return (h, k)

    def _q(self, h: History, k: int) -> np.ndarray:
        key = self._memo_key(h, k)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        env = self.env
        q = np.empty(env.n_actions)
        for a in range(env.n_actions):
            total = env.reward(h, a)
            if k > 1 and self.gamma > 0:
                pmf = env.step_distribution(h, a)
                cont = 0.0
                for e in range(env.n_percepts):
                    if pmf[e] > 0:
                        cont += pmf[e] * float(self._q(h.extend(a, e), k - 1).max())
                total += self.gamma * cont
            q[a] = total
        self._memo[key] = q
        if len(self._memo) > self.cap:
            raise ResourceLimitError(f"history tree exceeds {self.cap} nodes")
        return q

    def q_of(self, h: History) -> np.ndarray:
        self.env.validate(h)
        return self._q(h, self.horizon)


def solve_tree(env: Environment, gamma: float, horizon: int,
               share_subtrees: bool | None = None,
               cap: int = DEFAULT_HISTORY_CAP) -> TreeOracle:
    return TreeOracle(env, gamma, horizon, share_subtrees, cap)


def near_optimal_set(oracle, h: History, eps_prime: float) -> NearOptimalSet:
    """``{a : V*(h) - Q*(ha) <= eps_prime}``, compared exactly."""
    if eps_prime < 0:
        raise ValueError("eps_prime must be nonnegative")
    q = oracle.q_of(h)
    return NearOptimalSet(near_optimal_mask(q, float(q.max()), eps_prime), len(q))
