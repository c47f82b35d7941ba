"""Exactly solvable environment instances.

Hand-written instances carry a direct history-level description alongside
their latent model so the two can be checked against each other.
"""

from __future__ import annotations

import ast
import inspect
import re
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .core import Environment, LatentModel


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    args: tuple = ()
    kwargs: tuple[tuple[str, Any], ...] = field(default=())

    def __str__(self):
        parts = [repr(a) for a in self.args]
        parts += [f"{k}={v!r}" for k, v in self.kwargs]
        return self.name + (f"({','.join(parts)})" if parts else "")

    @classmethod
    def parse(cls, spec: Union[str, dict, "InstanceSpec"]) -> InstanceSpec:
        """Accepts ``"randomLatent(3,2,3,seed=1)"`` or ``{"name": ..., **params}``."""
        if isinstance(spec, InstanceSpec):
            return spec
        if isinstance(spec, dict):
            spec = dict(spec)
            try:
                name = spec.pop("name")
            except KeyError:
                raise ValueError("instance spec needs a 'name'") from None
            args = tuple(spec.pop("args", ()))
            return cls(name, args, tuple(sorted(spec.items())))
        if not isinstance(spec, str):
            raise ValueError(f"cannot parse instance spec {spec!r}")
        m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*", spec)
        if m is None:
            raise ValueError(f"malformed instance spec {spec!r}")
        name, body = m.group(1), m.group(2)
        if not body:
            return cls(name)
        call = ast.parse(f"f({body})", mode="eval").body
        try:
            args = tuple(ast.literal_eval(a) for a in call.args)
            kwargs = tuple(sorted((kw.arg, ast.literal_eval(kw.value)) for kw in call.keywords))
        except ValueError:
            raise ValueError(f"instance parameters must be literals: {spec!r}") from None
        return cls(name, args, kwargs)


def chain2() -> Environment:
    """Two-state deterministic chain; percept = latent state.

    a0 keeps the state, a1 flips it; only a0 in z1 pays 1.
    """
    update = np.array([[[0, 1], [0, 1]], [[0, 1], [0, 1]]])
    kernel = np.array([[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]])
    reward = np.array([[0.0, 0.0], [1.0, 0.0]])
    latent = LatentModel(np.array([0, 1]), update, kernel, reward, names=("z0", "z1"))

    def kernel_fn(h, a):
        z = h.last if a == 0 else 1 - h.last
        return np.eye(2)[z]

    def reward_fn(h, a):
        return 1.0 if (h.last == 1 and a == 0) else 0.0

    return Environment("chain2", 2, 2, [1.0, 0.0], latent=latent,
                       kernel_fn=kernel_fn, reward_fn=reward_fn)


def chain3() -> Environment:
    """chain2 plus a third action that behaves like a1 and never pays."""
    update = np.array([[[0, 1]] * 3, [[0, 1]] * 3])
    kernel = np.array([[[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
                       [[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]]])
    reward = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    latent = LatentModel(np.array([0, 1]), update, kernel, reward, names=("z0", "z1"))

    def kernel_fn(h, a):
        z = h.last if a == 0 else 1 - h.last
        return np.eye(2)[z]

    def reward_fn(h, a):
        return 1.0 if (h.last == 1 and a == 0) else 0.0

    return Environment("chain3", 3, 2, [1.0, 0.0], latent=latent,
                       kernel_fn=kernel_fn, reward_fn=reward_fn)


def bandit(k: int = 2, rewards=None) -> Environment:
    """Stationary k-armed bandit with a single percept."""
    if k < 1:
        raise ValueError("bandit needs at least one arm")
    if rewards is None:
        rewards = [0.5] if k == 1 else [0.3 + 0.4 * i / (k - 1) for i in range(k)]
    rewards = np.asarray(rewards, dtype=float)
    if rewards.shape != (k,):
        raise ValueError(f"bandit({k}) needs {k} rewards")
    latent = LatentModel(np.array([0]), np.zeros((1, k, 1), dtype=int),
                         np.ones((1, k, 1)), rewards[None, :])
    return Environment(f"bandit({k})", k, 1, [1.0], latent=latent,
                       kernel_fn=lambda h, a: np.ones(1),
                       reward_fn=lambda h, a: float(rewards[a]))


def parity() -> Environment:
    """Two-cell loop whose payoff depends on the parity of past e1 percepts.

    The percept is the current cell; a0 stays, a1 moves to the other cell.
    a0 pays 1 when the number of e1 percepts seen so far is even. Latent
    state index is ``2 * cell + parity``.
    """
    Z, A, E = 4, 2, 2
    update = np.zeros((Z, A, E), dtype=int)
    kernel = np.zeros((Z, A, E))
    reward = np.zeros((Z, A))
    for cell in range(2):
        for par in range(2):
            z = 2 * cell + par
            for a in range(A):
                nxt = cell if a == 0 else 1 - cell
                kernel[z, a, nxt] = 1.0
                for e in range(E):
                    update[z, a, e] = 2 * e + (par ^ (e == 1))
            reward[z, 0] = 1.0 if par == 0 else 0.0
    latent = LatentModel(np.array([0, 3]), update, kernel, reward,
                         names=("c0even", "c0odd", "c1even", "c1odd"))

    def kernel_fn(h, a):
        nxt = h.last if a == 0 else 1 - h.last
        return np.eye(2)[nxt]

    def reward_fn(h, a):
        return 1.0 if (a == 0 and h.percepts.count(1) % 2 == 0) else 0.0

    return Environment("parity", A, E, [1.0, 0.0], latent=latent,
                       kernel_fn=kernel_fn, reward_fn=reward_fn)


CUE_LEFT, CUE_RIGHT, CORRIDOR, JUNCTION = range(4)


def tmaze(corridor_len: int = 3) -> Environment:
    """T-maze with a cue at the start of a corridor.

    Positions: 0 shows the cue, 1..L are corridor cells, L+1 is the
    junction. Before the junction a0 moves forward and a1 waits. At the
    junction a0 turns left and a1 turns right; turning towards the cue pays
    1, and either turn restarts the maze with a fresh uniform cue.
    """
    if corridor_len < 1:
        raise ValueError("corridor length must be >= 1")
    L = corridor_len
    P = L + 2
    Z, A, E = 2 * P, 2, 4

    def percept(cue, pos):
        if pos == 0:
            return cue
        return JUNCTION if pos == L + 1 else CORRIDOR

    update = np.zeros((Z, A, E), dtype=int)
    kernel = np.zeros((Z, A, E))
    reward = np.zeros((Z, A))
    for cue in range(2):
        for pos in range(P):
            z = cue * P + pos
            for a in range(A):
                if pos == L + 1:
                    kernel[z, a, CUE_LEFT] = kernel[z, a, CUE_RIGHT] = 0.5
                    reward[z, a] = 1.0 if a == cue else 0.0
                    update[z, a, :] = z
                    update[z, a, CUE_LEFT] = 0
                    update[z, a, CUE_RIGHT] = P
                else:
                    npos = pos + 1 if a == 0 else pos
                    kernel[z, a, percept(cue, npos)] = 1.0
                    update[z, a, :] = cue * P + npos
    latent = LatentModel(np.array([0, P, 0, 0]), update, kernel, reward)

    def _state(h):
        cue_at = max(i for i, e in enumerate(h.percepts) if e in (CUE_LEFT, CUE_RIGHT))
        cue = h.percepts[cue_at]
        pos = sum(1 for a in h.actions[cue_at:] if a == 0)
        return cue, pos

    def kernel_fn(h, a):
        out = np.zeros(E)
        if h.last == JUNCTION:
            out[CUE_LEFT] = out[CUE_RIGHT] = 0.5
            return out
        cue, pos = _state(h)
        out[percept(cue, pos + 1 if a == 0 else pos)] = 1.0
        return out

    def reward_fn(h, a):
        if h.last != JUNCTION:
            return 0.0
        cue, _ = _state(h)
        return 1.0 if a == cue else 0.0

    return Environment(f"tmaze({L})", A, E, [0.5, 0.5, 0.0, 0.0], latent=latent,
                       kernel_fn=kernel_fn, reward_fn=reward_fn)


def random_latent(n_latent: int, n_actions: int, n_percepts: int, seed: int = 0) -> Environment:
    """Seeded random latent-state environment with dense Dirichlet kernels."""
    if min(n_latent, n_actions, n_percepts) < 1:
        raise ValueError("randomLatent sizes must be positive")
    rng = np.random.default_rng(seed)
    Z, A, E = n_latent, n_actions, n_percepts
    initial = rng.dirichlet(np.ones(E))
    init_map = rng.integers(Z, size=E)
    update = rng.integers(Z, size=(Z, A, E))
    kernel = rng.dirichlet(np.ones(E), size=(Z, A))
    reward = rng.random((Z, A))
    latent = LatentModel(init_map, update, kernel, reward)
    return Environment(f"randomLatent({Z},{A},{E},seed={seed})", A, E, initial, latent=latent)


_BUILDERS = {
    "chain2": chain2,
    "chain3": chain3,
    "bandit": bandit,
    "parity": parity,
    "tmaze": tmaze,
    "randomLatent": random_latent,
}

_KWARG_ALIASES = {
    "randomLatent": {"Z": "n_latent", "A": "n_actions", "E": "n_percepts"},
    "tmaze": {"corridorLen": "corridor_len", "L": "corridor_len"},
}


def instance_names() -> list[str]:
    return list(_BUILDERS)


def describe_instances() -> list[str]:
    """``name(signature)`` for every instance family."""
    out = []
    for name, builder in _BUILDERS.items():
        params = ", ".join(p.name if p.default is p.empty else f"{p.name}={p.default!r}"
                           for p in inspect.signature(builder).parameters.values())
        out.append(f"{name}({params})")
    return out


def make_instance(spec) -> Environment:
    """Build an environment from an :class:`InstanceSpec` or its text/dict form."""
    spec = InstanceSpec.parse(spec)
    try:
        builder = _BUILDERS[spec.name]
    except KeyError:
        raise ValueError(f"unknown instance {spec.name!r}; known: {', '.join(_BUILDERS)}") from None
    aliases = _KWARG_ALIASES.get(spec.name, {})
    kwargs = {aliases.get(k, k): v for k, v in spec.kwargs}
    try:
        return builder(*spec.args, **kwargs)
    except TypeError as exc:
        raise ValueError(f"invalid parameters for {spec.name}: {exc}") from None
