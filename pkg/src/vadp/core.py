"""Histories, history-based environments and their finite latent models."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Optional, Protocol, Sequence

import numpy as np

DEFAULT_HISTORY_CAP = 10**6
PMF_TOL = 1e-12


class ResourceLimitError(RuntimeError):
    """An enumeration would exceed its configured cap."""


@dataclass(frozen=True)
class History:
    """Alternating percept/action record ``e1 a1 e2 ... en``.

    Ordering is lexicographic on the interleaved index sequence, so a
    history sorts directly before its own extensions.
    """

    percepts: tuple[int, ...]
    actions: tuple[int, ...] = ()
    _key: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        percepts = tuple(int(e) for e in self.percepts)
        actions = tuple(int(a) for a in self.actions)
        if len(percepts) != len(actions) + 1:
            raise ValueError(
                f"history needs one more percept than actions, got "
                f"{len(percepts)} percepts and {len(actions)} actions")
        key = [percepts[0]]
        for a, e in zip(actions, percepts[1:]):
            key.append(a)
            key.append(e)
        object.__setattr__(self, "percepts", percepts)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "_key", tuple(key))

    def __len__(self):
        return len(self.percepts)

    def __lt__(self, other: History):
        return self._key < other._key

    def __le__(self, other: History):
        return self._key <= other._key

    def __gt__(self, other: History):
        return self._key > other._key

    def __ge__(self, other: History):
        return self._key >= other._key

    @property
    def key(self) -> tuple[int, ...]:
        return self._key

    @property
    def last(self) -> int:
        return self.percepts[-1]

    def extend(self, action: int, percept: int) -> History:
        return History(self.percepts + (percept,), self.actions + (action,))

    def prefix(self, n: int) -> History:
        """The first ``n`` percepts and the actions between them."""
        return History(self.percepts[:n], self.actions[:n - 1])

    def __str__(self):
        parts = [f"e{self.percepts[0]}"]
        for a, e in zip(self.actions, self.percepts[1:]):
            parts.append(f"a{a}")
            parts.append(f"e{e}")
        return "(" + " ".join(parts) + ")"

    @classmethod
    def parse(cls, text: str) -> History:
        """Inverse of ``str``: ``"(e0 a1 e1)"``."""
        tokens = text.strip().strip("()").split()
        percepts = [int(t[1:]) for t in tokens[0::2]]
        actions = [int(t[1:]) for t in tokens[1::2]]
        return cls(tuple(percepts), tuple(actions))


@dataclass(frozen=True, eq=False)
class LatentModel:
    """Finite sufficient statistic of the history.

    ``update[z, a, e]`` is the latent state after taking ``a`` in ``z`` and
    observing ``e``; ``kernel[z, a]`` is the percept pmf and ``reward[z, a]``
    the expected reward.
    """

    init_map: np.ndarray
    update: np.ndarray
    kernel: np.ndarray
    reward: np.ndarray
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        for name, dtype in (("init_map", np.int64), ("update", np.int64),
                            ("kernel", np.float64), ("reward", np.float64)):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        Z, A, E = self.kernel.shape
        if self.update.shape != (Z, A, E) or self.reward.shape != (Z, A):
            raise ValueError("latent tables have inconsistent shapes")
        if self.init_map.shape != (E,):
            raise ValueError("init_map must have one entry per percept")
        if self.update.min() < 0 or self.update.max() >= Z:
            raise ValueError("latent update leaves the latent state space")
        if self.init_map.min() < 0 or self.init_map.max() >= Z:
            raise ValueError("init_map leaves the latent state space")
        if np.any(np.abs(self.kernel.sum(axis=2) - 1.0) > PMF_TOL) or self.kernel.min() < 0:
            raise ValueError("latent kernel rows must be pmfs")
        if self.reward.min() < 0 or self.reward.max() > 1:
            raise ValueError("rewards must lie in [0, 1]")

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    def fold(self, h: History) -> int:
        z = int(self.init_map[h.percepts[0]])
        for a, e in zip(h.actions, h.percepts[1:]):
            z = int(self.update[z, a, e])
        return z

    def transition_matrix(self) -> np.ndarray:
        """Dense ``T[z, a, z']`` marginalising the percept."""
        Z, A, E = self.kernel.shape
        T = np.zeros((Z, A, Z))
        for z in range(Z):
            for a in range(A):
                for e in range(E):
                    T[z, a, self.update[z, a, e]] += self.kernel[z, a, e]
        return T


KernelFn = Callable[[History, int], np.ndarray]
RewardFn = Callable[[History, int], float]


class Environment:
    """History-based environment with finite percept and action alphabets.

    ``kernel_fn`` and ``reward_fn`` describe the environment directly on
    histories. When omitted they are served through ``latent``.
    """

    def __init__(self, name: str, n_actions: int, n_percepts: int,
                 initial: Sequence[float], *, latent: Optional[LatentModel] = None,
                 kernel_fn: Optional[KernelFn] = None,
                 reward_fn: Optional[RewardFn] = None):
        if n_actions < 1 or n_percepts < 1:
            raise ValueError("alphabets must be nonempty")
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (n_percepts,) or abs(initial.sum() - 1) > PMF_TOL or initial.min() < 0:
            raise ValueError("initial percept distribution must be a pmf")
        if latent is None and (kernel_fn is None or reward_fn is None):
            raise ValueError("need either a latent model or direct kernel/reward functions")
        if latent is not None and latent.kernel.shape[1:] != (n_actions, n_percepts):
            raise ValueError("latent model alphabets do not match the environment")
        self.name = name
        self.n_actions = n_actions
        self.n_percepts = n_percepts
        self.initial = initial
        self.initial.setflags(write=False)
        self.latent = latent
        self._kernel_fn = kernel_fn
        self._reward_fn = reward_fn

    def __repr__(self):
        return f"Environment({self.name!r}, A={self.n_actions}, E={self.n_percepts})"

    def validate(self, h: History, action: Optional[int] = None):
        if any(not 0 <= e < self.n_percepts for e in h.percepts):
            raise ValueError(f"percept index out of range in {h}")
        if any(not 0 <= a < self.n_actions for a in h.actions):
            raise ValueError(f"action index out of range in {h}")
        if action is not None and not 0 <= action < self.n_actions:
            raise ValueError(f"invalid action index {action}")

    def step_distribution(self, h: History, action: int) -> np.ndarray:
        """Percept pmf ``mu(. | h, a)``."""
        self.validate(h, action)
        if self._kernel_fn is not None:
            return np.asarray(self._kernel_fn(h, action), dtype=float)
        return self.latent.kernel[self.latent.fold(h), action].copy()

    def reward(self, h: History, action: int) -> float:
        """Expected reward ``r(h, a)`` in [0, 1]."""
        self.validate(h, action)
        if self._reward_fn is not None:
            return float(self._reward_fn(h, action))
        return float(self.latent.reward[self.latent.fold(h), action])

    @cached_property
    def chain(self) -> LatentChain:
        if self.latent is None:
            raise ValueError(f"{self.name} has no latent model")
        return LatentChain(self)


class LatentChain:
    """Reachable (latent state, last percept) pairs of an environment.

    Every label and uplifted policy in this package is a function of such a
    pair, so the pair is the unit at which per-history quantities are
    tabulated.
    """

    def __init__(self, env: Environment):
        lm = env.latent
        A, E = env.n_actions, env.n_percepts
        index: dict[tuple[int, int], int] = {}
        keys: list[tuple[int, int]] = []
        depth: list[int] = []
        frontier = []
        for e in range(E):
            if env.initial[e] > 0:
                k = (int(lm.init_map[e]), e)
                if k not in index:
                    index[k] = len(keys)
                    keys.append(k)
                    depth.append(1)
                    frontier.append(k)
        n = 1
        while frontier:
            n += 1
            nxt = []
            for z, _ in frontier:
                for a in range(A):
                    for e in range(E):
                        if lm.kernel[z, a, e] > 0:
                            k = (int(lm.update[z, a, e]), e)
                            if k not in index:
                                index[k] = len(keys)
                                keys.append(k)
                                depth.append(n)
                                nxt.append(k)
            frontier = nxt
        K = len(keys)
        self.keys = keys
        self.index = index
        self.z = np.array([k[0] for k in keys], dtype=np.int64)
        self.e = np.array([k[1] for k in keys], dtype=np.int64)
        self.depth = np.array(depth, dtype=np.int64)
        self.initial = np.zeros(K)
        for e in range(E):
            if env.initial[e] > 0:
                self.initial[index[(int(lm.init_map[e]), e)]] += env.initial[e]
        self.prob = lm.kernel[self.z].copy()
        self.reward = lm.reward[self.z].copy()
        self.succ = np.full((K, A, E), -1, dtype=np.int64)
        for i, (z, _) in enumerate(keys):
            for a in range(A):
                for e in range(E):
                    if lm.kernel[z, a, e] > 0:
                        self.succ[i, a, e] = index[(int(lm.update[z, a, e]), e)]
        self.n_actions = A
        self.n_percepts = E

    def __len__(self):
        return len(self.keys)

    @property
    def coverage_depth(self) -> int:
        """Smallest history length at which every reachable pair has appeared."""
        return int(self.depth.max())

    def policy_matrix(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Transition matrix and reward vector of a key-measurable policy."""
        K = len(self.keys)
        T = np.zeros((K, K))
        rows = np.arange(K)
        for e in range(self.n_percepts):
            p = self.prob[rows, actions, e]
            s = self.succ[rows, actions, e]
            ok = p > 0
            np.add.at(T, (rows[ok], s[ok]), p[ok])
        return T, self.reward[rows, actions]


class Reached(NamedTuple):
    history: History
    reach: float  # probability of the percept sequence given its actions


def enumerate_histories(env: Environment, max_len: int,
                        cap: int = DEFAULT_HISTORY_CAP) -> list[Reached]:
    """All histories of length <= ``max_len`` with positive probability.

    Works from the environment's history-level kernel; the result is in
    canonical order.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    out: list[Reached] = []
    stack = [(History((e,)), float(env.initial[e]))
             for e in reversed(range(env.n_percepts)) if env.initial[e] > 0]
    while stack:
        h, p = stack.pop()
        out.append(Reached(h, p))
        if len(out) > cap:
            raise ResourceLimitError(f"more than {cap} histories up to length {max_len}")
        if len(h) == max_len:
            continue
        children = []
        for a in range(env.n_actions):
            pmf = env.step_distribution(h, a)
            for e in range(env.n_percepts):
                if pmf[e] > 0:
                    children.append((h.extend(a, e), p * float(pmf[e])))
        stack.extend(reversed(children))
    return out


class HistoryTable:
    """Canonically ordered histories up to ``depth`` tagged with their chain key.

    Same set and order as :func:`enumerate_histories`, built by tracking the
    latent state instead of calling the history-level kernel.
    """

    def __init__(self, env: Environment, depth: int, cap: int = DEFAULT_HISTORY_CAP):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        chain = env.chain
        A, E = env.n_actions, env.n_percepts
        histories: list[History] = []
        keys: list[int] = []
        parents: list[int] = []
        stack = []
        for e in reversed(range(E)):
            if env.initial[e] > 0:
                stack.append((History((e,)), chain.index[(int(env.latent.init_map[e]), e)], -1))
        while stack:
            h, k, parent = stack.pop()
            histories.append(h)
            keys.append(k)
            parents.append(parent)
            if len(histories) > cap:
                raise ResourceLimitError(f"more than {cap} histories up to length {depth}")
            if len(h) == depth:
                continue
            me = len(histories) - 1
            for a in reversed(range(A)):
                for e in reversed(range(E)):
                    nk = chain.succ[k, a, e]
                    if nk >= 0:
                        stack.append((h.extend(a, e), int(nk), me))
        self.env = env
        self.depth = depth
        self.chain = chain
        self.histories = histories
        self.key = np.array(keys, dtype=np.int64)
        self.parent = np.array(parents, dtype=np.int64)
        self.position = {h: i for i, h in enumerate(histories)}

    def __len__(self):
        return len(self.histories)

    @cached_property
    def children(self) -> np.ndarray:
        """``children[i, a, e]``: index of ``h_i a e`` or -1."""
        n = len(self.histories)
        out = np.full((n, self.env.n_actions, self.env.n_percepts), -1, dtype=np.int64)
        for i, h in enumerate(self.histories):
            if self.parent[i] >= 0:
                out[self.parent[i], h.actions[-1], h.percepts[-1]] = i
        return out

    @cached_property
    def present_keys(self) -> np.ndarray:
        return np.unique(self.key)


class Policy(Protocol):
    def act(self, h: History) -> int: ...
