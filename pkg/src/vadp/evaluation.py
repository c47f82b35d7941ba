"""Per-dispersion evaluation of a surrogate pipeline and search over dispersions.

An :class:`Evaluator` holds one abstraction's member index and answers,
for any dispersion distribution B, the quantities the certification checks
need: the surrogate/B-averaged gap, the max-relationship deviation, the
near-optimal support margin and the uplifted policy's optimality gap.

Dirac distributions are handled per *contribution class*: two member
histories of a state whose (induced abstract process row, reward, Q*) agree
for an action yield bit-identical surrogate entries under a Dirac, so only
one representative per class needs to be tried.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from . import kernels
from .abstraction import VADPLabel
from .surrogate import (TIE_TOL, DispersionDistribution, MemberIndex, _assemble,
                        chain_policy_values, dirac_dispersion, make_dispersion)

OBJECTIVES = ("delta", "uplift_gap", "lemma2")
EXHAUSTIVE_CAP = 10**5
SAMPLED_DIRACS = 200


@dataclass
class RunMetrics:
    """Outcome of one surrogate built from one dispersion distribution."""

    b_name: str
    n_states: int
    delta: float
    delta_state: int
    lemma2_dev: float
    lemma2_state: int
    lemma4_margin: float
    lemma4_violations: int
    lemma4_state: int
    sup_gap: float
    fallbacks: int
    state_actions: np.ndarray = field(repr=False)

    def objective(self, name: str) -> float:
        return {"delta": self.delta, "uplift_gap": self.sup_gap,
                "lemma2": self.lemma2_dev}[name]


GapFn = Callable[[np.ndarray], tuple[float, int]]


class Evaluator:
    def __init__(self, index: MemberIndex, oracle, gamma: float,
                 eps_prime: Optional[float] = None, gap_fn: Optional[GapFn] = None,
                 tie_tol: float = TIE_TOL):
        self.index = index
        self.oracle = oracle
        self.gamma = float(gamma)
        self.eps_prime = eps_prime
        self.tie_tol = tie_tol
        self.q_keys = index.q_keys(oracle)
        self.v_keys = index.v_keys(oracle)
        S, A = index.n_states, index.n_actions
        self.vmin = np.empty(S)
        self.vmax = np.empty(S)
        self.gapmax = np.empty((S, A))
        self.member_key_sets = []
        for s in range(S):
            ks = np.unique(index.member_keys(s))
            self.member_key_sets.append(ks)
            vs = self.v_keys[ks]
            self.vmin[s] = vs.min()
            self.vmax[s] = vs.max()
            self.gapmax[s] = (vs[:, None] - self.q_keys[ks]).max(axis=0)
        labels = index.states
        self.near_opt = None
        if labels and isinstance(labels[0], VADPLabel):
            self.near_opt = np.array([[a in lab.near_opt for a in range(A)] for lab in labels])
        self._gap_fn = gap_fn if gap_fn is not None else self._chain_gap
        self._gap_cache: dict[bytes, tuple[float, int]] = {}
        self._classes = None

    # -- uplift -----------------------------------------------------------
    def key_actions(self, state_actions: np.ndarray) -> tuple[np.ndarray, int]:
        sok = self.index.state_of_key
        acts = np.where(sok >= 0, state_actions[np.maximum(sok, 0)], 0)
        return acts, int(np.count_nonzero(sok < 0))

    def _chain_gap(self, state_actions: np.ndarray) -> tuple[float, int]:
        acts, fallbacks = self.key_actions(state_actions)
        vpi = chain_policy_values(self.index.env, acts, self.gamma)
        present = self.index.table.present_keys
        gaps = self.v_keys[present] - vpi[present]
        return max(0.0, float(gaps.max())), fallbacks

    def uplift_gap(self, state_actions: np.ndarray) -> tuple[float, int]:
        key = state_actions.tobytes()
        hit = self._gap_cache.get(key)
        if hit is None:
            hit = self._gap_fn(state_actions)
            self._gap_cache[key] = hit
        return hit

    # -- per-B metrics ----------------------------------------------------
    def metrics(self, P: np.ndarray, R: np.ndarray, Qbar: np.ndarray, name: str) -> RunMetrics:
        q, v, _, _ = kernels.value_iteration(P, R, self.gamma)
        diff = np.abs(q - Qbar).max(axis=1)
        ds = int(np.argmax(diff))
        mq = Qbar.max(axis=1)
        dev = np.maximum(np.abs(mq - self.vmin), np.abs(mq - self.vmax))
        ls = int(np.argmax(dev))
        opt = (v[:, None] - q) <= self.tie_tol
        state_actions = np.argmax(opt, axis=1).astype(np.int64)
        margin, violations, ws = math.inf, 0, -1
        if self.near_opt is not None:
            violations = int(np.count_nonzero(opt & ~self.near_opt))
            slack = np.where(opt, self.eps_prime - self.gapmax, np.inf)
            flat = int(np.argmin(slack))
            margin = float(slack.flat[flat])
            ws = flat // slack.shape[1]
        gap, fallbacks = self.uplift_gap(state_actions)
        return RunMetrics(name, len(v), float(diff[ds]), ds, float(dev[ls]), ls,
                          margin, violations, ws, gap, fallbacks, state_actions)

    def evaluate(self, B: DispersionDistribution, name: Optional[str] = None) -> RunMetrics:
        P, R, Qbar = _assemble(B, self.q_keys)
        return self.metrics(P, R, Qbar, name or B.kind)

    def lemma1(self) -> tuple[float, int]:
        """Largest ``|max_a min_h Q*(ha) - min_h max_a Q*(ha)|`` over states."""
        worst, ws = 0.0, 0
        for s, ks in enumerate(self.member_key_sets):
            q = self.q_keys[ks]
            d = abs(float(q.min(axis=0).max()) - float(q.max(axis=1).min()))
            if d > worst:
                worst, ws = d, s
        return worst, ws

    # -- Dirac extremes ---------------------------------------------------
    def dirac_classes(self) -> list[list[tuple[int, int]]]:
        """Per coordinate ``s * A + a``: list of ``(representative history, key)``."""
        if self._classes is None:
            index = self.index
            A = index.n_actions
            out = []
            for s in range(index.n_states):
                firsts = {}
                for i in index.members[s]:
                    firsts.setdefault(int(index.table.key[i]), int(i))
                for a in range(A):
                    seen = {}
                    for k, i in firsts.items():
                        sig = (index.mu_psi[k, a].tobytes(), float(index.reward[k, a]),
                               float(self.q_keys[k, a]))
                        seen.setdefault(sig, (i, k))
                    out.append(sorted(seen.values()))
            self._classes = out
        return self._classes

    def dirac_count(self) -> int:
        return math.prod(len(c) for c in self.dirac_classes())

    def _choice_keys(self, choice) -> np.ndarray:
        classes = self.dirac_classes()
        S, A = self.index.n_states, self.index.n_actions
        return np.array([classes[c][j][1] for c, j in enumerate(choice)]).reshape(S, A)

    def evaluate_choice(self, choice, name: str = "dirac") -> RunMetrics:
        keys = self._choice_keys(choice)
        cols = np.arange(self.index.n_actions)[None, :]
        P = self.index.mu_psi[keys, cols]
        R = self.index.reward[keys, cols]
        Qbar = self.q_keys[keys, cols]
        return self.metrics(P, R, Qbar, name)

    def choice_dispersion(self, choice, kind: str = "dirac") -> DispersionDistribution:
        classes = self.dirac_classes()
        A = self.index.n_actions
        picks = {(c // A, c % A): classes[c][j][0] for c, j in enumerate(choice)}
        return dirac_dispersion(self.index, picks, kind)

    def iter_dirac(self) -> Iterator[RunMetrics]:
        sizes = [range(len(c)) for c in self.dirac_classes()]
        for choice in itertools.product(*sizes):
            yield self.evaluate_choice(choice, "diracExtreme")

    def sample_dirac(self, n: int, seed: int) -> Iterator[RunMetrics]:
        rng = np.random.default_rng(seed)
        sizes = np.array([len(c) for c in self.dirac_classes()])
        for _ in range(n):
            yield self.evaluate_choice(rng.integers(sizes), "diracSample")

    def coordinate_ascent(self, objective: str, budget: int, seed: int = 0):
        """Maximise ``objective`` over Dirac choices from seeded random restarts.

        Returns ``(choice or None, metrics)``; ``None`` means no Dirac choice
        beat the uniform distribution, which is also the answer for
        ``budget == 0``.
        """
        if objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {objective!r}")
        uniform = self.evaluate(make_dispersion(self.index.abstraction, self.index.env,
                                                self.index.depth, "uniform", index=self.index))
        best_choice, best = None, uniform
        if budget <= 0:
            return best_choice, best
        rng = np.random.default_rng(seed)
        sizes = np.array([len(c) for c in self.dirac_classes()])
        free = np.flatnonzero(sizes > 1)
        evals = 0
        while evals < budget:
            choice = rng.integers(sizes)
            cur = self.evaluate_choice(choice, "adversarial")
            evals += 1
            improved = True
            while improved and evals < budget:
                improved = False
                for c in rng.permutation(free):
                    for j in range(sizes[c]):
                        if j == choice[c] or evals >= budget:
                            continue
                        trial = choice.copy()
                        trial[c] = j
                        m = self.evaluate_choice(trial, "adversarial")
                        evals += 1
                        if m.objective(objective) > cur.objective(objective):
                            choice, cur, improved = trial, m, True
            if cur.objective(objective) > best.objective(objective):
                best_choice, best = choice, cur
            if len(free) == 0:
                break
        return best_choice, best
