"""Abstraction maps from histories to finite labelled states.

Four constructions: the value/action/near-optimal-set map (VADP), its
coarser value/action variant (VDP), the Q-value grid (ESA_QGRID), and the
last-percept map (MDP_LAST_PERCEPT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from .core import DEFAULT_HISTORY_CAP, Environment, History, HistoryTable, enumerate_histories
from .oracle import NearOptimalSet, ValueOracle, near_optimal_mask


class Kind(str, Enum):
    VADP = "VADP"
    VDP = "VDP"
    ESA_QGRID = "ESA_QGRID"
    MDP_LAST_PERCEPT = "MDP_LAST_PERCEPT"


@dataclass(frozen=True)
class AbstractionParams:
    """``eps`` is the caller's normalised optimality-gap target.

    ``eps0 = eps (1 - gamma) / (1 + 3 gamma)`` is the value-uniformity width
    and ``eps_prime = eps`` the slack defining the near-optimal action set.
    """

    eps: float
    gamma: float
    kind: Kind = Kind.VADP

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def eps0(self) -> float:
        return self.eps * (1 - self.gamma) / (1 + 3 * self.gamma)

    @property
    def eps_prime(self) -> float:
        return self.eps

    @property
    def grid_width(self) -> float:
        """Q-grid cell width for ESA_QGRID."""
        return self.eps * (1 - self.gamma) / 2


class VADPLabel(NamedTuple):
    value_bin: int
    opt_action: int
    near_opt: NearOptimalSet

    def text(self) -> str:
        return f"({self.value_bin}|{self.opt_action}|{self.near_opt.text()})"


class VDPLabel(NamedTuple):
    value_bin: int
    opt_action: int

    def text(self) -> str:
        return f"({self.value_bin}|{self.opt_action})"


class QGridLabel(NamedTuple):
    bins: tuple[int, ...]

    def text(self) -> str:
        return "(" + "|".join(str(b) for b in self.bins) + ")"


class PerceptLabel(NamedTuple):
    percept: int

    def text(self) -> str:
        return f"({self.percept})"


StateLabel = Union[VADPLabel, VDPLabel, QGridLabel, PerceptLabel]


def value_bin(v: float, width: float) -> int:
    return int(math.ceil(v / width))


class Abstraction:
    """A deterministic map ``psi`` from histories to labels.

    Labels are computed from ``(Q*(h, .), last percept)``; with a latent
    oracle the same label is available per chain key without replaying the
    history.
    """

    def __init__(self, params: Optional[AbstractionParams], env: Environment,
                 oracle, label_fn: Callable[[np.ndarray, int], StateLabel]):
        self.params = params
        self.env = env
        self.oracle = oracle
        self._label_fn = label_fn
        self._key_labels: Optional[list] = None

    @property
    def kind(self) -> Kind:
        return self.params.kind if self.params is not None else Kind.MDP_LAST_PERCEPT

    def __repr__(self):
        return f"Abstraction({self.kind.value}, env={self.env.name})"

    def classify(self, h: History) -> StateLabel:
        q = self.oracle.q_of(h) if self.oracle is not None else None
        return self._label_fn(q, h.last)

    def key_labels(self) -> list:
        """Label of every reachable chain key, in chain order."""
        if self._key_labels is None:
            chain = self.env.chain
            if self.oracle is not None and not isinstance(self.oracle, ValueOracle):
                raise ValueError("per-key labels need a latent oracle")
            labels = []
            for z, e in chain.keys:
                q = self.oracle.q[z] if self.oracle is not None else None
                labels.append(self._label_fn(q, e))
            self._key_labels = labels
        return self._key_labels

    def label_of_key(self, k: int) -> StateLabel:
        return self.key_labels()[k]


def _require(params: AbstractionParams, kind: Kind):
    if params.kind != kind:
        raise ValueError(f"expected {kind.value} parameters, got {params.kind.value}")


def build_vadp(oracle, params: AbstractionParams) -> Abstraction:
    """Label ``(ceil(V*/eps0), pi*, A_eps)`` with value bins of width ``eps0``."""
    _require(params, Kind.VADP)
    width, slack = params.eps0, params.eps_prime
    n_actions = oracle.n_actions

    def label(q, _last):
        v = float(q.max())
        return VADPLabel(value_bin(v, width), int(np.argmax(q)),
                         NearOptimalSet(near_optimal_mask(q, v, slack), n_actions))

    return Abstraction(params, oracle.env, oracle, label)


def build_vdp(oracle, params: AbstractionParams) -> Abstraction:
    """Label ``(ceil(V*/eps0), pi*)``: value and optimal action only."""
    _require(params, Kind.VDP)
    width = params.eps0

    def label(q, _last):
        return VDPLabel(value_bin(float(q.max()), width), int(np.argmax(q)))

    return Abstraction(params, oracle.env, oracle, label)


def build_esa_qgrid(oracle, params: AbstractionParams) -> Abstraction:
    """Label ``(ceil(Q*(h, a) / w))_a`` with ``w = eps (1 - gamma) / 2``."""
    _require(params, Kind.ESA_QGRID)
    width = params.grid_width

    def label(q, _last):
        return QGridLabel(tuple(value_bin(float(x), width) for x in q))

    return Abstraction(params, oracle.env, oracle, label)


def build_mdp_abstraction(env: Environment) -> Abstraction:
    """Label = most recent percept."""
    return Abstraction(None, env, None, lambda _q, last: PerceptLabel(int(last)))


def build_abstraction(oracle, params: AbstractionParams, env: Environment | None = None) -> Abstraction:
    if params.kind == Kind.MDP_LAST_PERCEPT:
        return build_mdp_abstraction(env if env is not None else oracle.env)
    return {Kind.VADP: build_vadp, Kind.VDP: build_vdp,
            Kind.ESA_QGRID: build_esa_qgrid}[params.kind](oracle, params)


def enumerate_states(abstraction: Abstraction, env: Environment, depth: int,
                     cap: int = DEFAULT_HISTORY_CAP) -> list:
    """Distinct labels of all reachable histories up to ``depth``, sorted."""
    if env.latent is not None and (abstraction.oracle is None
                                   or isinstance(abstraction.oracle, ValueOracle)):
        table = HistoryTable(env, depth, cap)
        return sorted({abstraction.label_of_key(int(k)) for k in table.present_keys})
    return sorted({abstraction.classify(r.history) for r in enumerate_histories(env, depth, cap)})
