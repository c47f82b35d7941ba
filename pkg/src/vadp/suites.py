"""Named certification suites.

``quick`` covers the hand-solvable instances, ``default`` the full grid plus
the binarized pipeline, the oracle cross-check, the binarizer value scaling,
the bound-calculator regression and a determinism re-run. ``adversarial`` is
``default`` with coordinate-ascent search over Dirac dispersions added to
every run (budget 200 unless overridden) and a logged, never asserted,
search for uplift gaps of the coarser VDP abstraction above the VADP line.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .abstraction import Kind
from .binarizer import binarize, binarized_reports, run_binarized_pipeline
from .bounds import bin_bound_full, bin_bound_simplified, esa_bound, vadp_bound
from .certify import DEFAULT_DEPTH, CheckReport, certify, run_pipeline
from .core import HistoryTable
from .experiment import RUN_COLUMNS, STATE_COLUMNS, ExperimentConfig, render_csv, run_experiment
from .instances import make_instance
from .oracle import solve_latent, solve_tree

RANDOM_INSTANCES = ("randomLatent(3,2,3,seed=1)", "randomLatent(3,2,3,seed=2)",
                    "randomLatent(6,2,3,seed=3)", "randomLatent(6,3,2,seed=4)",
                    "randomLatent(8,2,2,seed=5)")
DEFAULT_INSTANCES = ("chain2", "chain3", "bandit(2)", "parity", "tmaze(3)") + RANDOM_INSTANCES
BINARIZED_INSTANCES = ("chain3",) + RANDOM_INSTANCES
CROSSCHECK_HORIZON = 20
CROSSCHECK_TOL = 1e-9
SCALING_TOL = 1e-8
ADVERSARIAL_BUDGET = 200

BOUND_REGRESSION = (
    ("esa_bound", esa_bound, (0.1, 0.5, 2), 6400),
    ("vadp_bound", vadp_bound, (0.1, 0.5, 2), 400),
    ("vadp_bound", vadp_bound, (0.1, 0.5, 4), 3200),
    ("bin_bound_full", bin_bound_full, (0.1, 0.5, 4), 20000),
    ("bin_bound_simplified", bin_bound_simplified, (0.01, 0.99, 16), 1_088_000_000),
)


@dataclass(frozen=True)
class Suite:
    name: str
    instances: tuple
    gammas: tuple
    epsilons: tuple
    extras: bool = False
    budget: int = 0
    falsification: bool = False


SUITES = {
    "quick": Suite("quick", ("chain2", "bandit(2)", "parity"), (0.0, 0.5), (0.1,)),
    "default": Suite("default", DEFAULT_INSTANCES, (0.0, 0.5, 0.9), (0.05, 0.1, 0.2), extras=True),
    "adversarial": Suite("adversarial", DEFAULT_INSTANCES, (0.0, 0.5, 0.9), (0.05, 0.1, 0.2),
                         extras=True, budget=ADVERSARIAL_BUDGET, falsification=True),
}


@dataclass
class VerifyRow:
    group: str
    report: CheckReport


@dataclass
class SuiteResult:
    name: str
    rows: list[VerifyRow]
    falsification: list[dict]

    @property
    def passed(self) -> bool:
        return all(r.report.passed for r in self.rows)

    def reports(self) -> list[CheckReport]:
        return [r.report for r in self.rows]


def _group(env: str, gamma: float, eps: Optional[float] = None) -> str:
    g = f"{env};gamma={gamma:.12g}"
    return g if eps is None else f"{g};eps={eps:.12g}"


def bound_regression() -> list[CheckReport]:
    out = []
    for name, fn, args, expected in BOUND_REGRESSION:
        got = fn(*args)
        margin = 0.0 if got == expected else -abs(float(got) - expected)
        w = f"{name}{args};expected={expected};observed={got}"
        out.append(CheckReport("bound_regression", 1, margin, w, 0.0))
    return out


def oracle_crosscheck(spec: str, gamma: float, horizon: int = CROSSCHECK_HORIZON) -> CheckReport:
    """Finite-horizon tree values against the latent fixed point on every reachable key."""
    env = make_instance(spec)
    latent = solve_latent(env, gamma)
    tree = solve_tree(env, gamma, horizon)
    table = HistoryTable(env, env.chain.coverage_depth)
    first = {}
    for i, k in enumerate(table.key):
        first.setdefault(int(k), i)
    err, worst = 0.0, None
    for k, i in sorted(first.items()):
        h = table.histories[i]
        d = float(np.abs(tree.q_of(h) - latent.q_of(h)).max())
        if worst is None or d > err:
            err, worst = d, h
    bound = tree.tail_bound
    return CheckReport("oracle_crosscheck", len(first), bound - err,
                       f"{_group(env.name, gamma)};H={horizon};history={worst};observed={err:.12g}",
                       CROSSCHECK_TOL)


def value_scaling(spec: str, gamma: float) -> CheckReport:
    """``V_bin = lambda^(d-1) V_inner`` at every group boundary."""
    env = make_instance(spec)
    benv, lam = binarize(env, gamma)
    vb, vi = solve_latent(benv, lam), solve_latent(env, gamma)
    scale = lam ** (benv.bits - 1)
    err, worst = 0.0, env.chain.keys[0]
    for i, key in enumerate(env.chain.keys):
        kb = benv.boundary_key(key)
        d = abs(float(vb.v[benv.chain.z[kb]]) - scale * float(vi.v[env.chain.z[i]]))
        if d > err:
            err, worst = d, key
    return CheckReport("binarizer_value_scaling", len(env.chain), -err,
                       f"{_group(env.name, gamma)};bits={benv.bits};key={worst};observed={err:.12g}",
                       SCALING_TOL)


def determinism_check(spec: str = "chain2", gamma: float = 0.5, eps: float = 0.1) -> CheckReport:
    cfg = ExperimentConfig.from_dict({"env": spec, "gamma": gamma, "eps": eps})
    bodies = []
    for _ in range(2):
        res = run_experiment(cfg)
        bodies.append(render_csv(RUN_COLUMNS, res.runs) + render_csv(STATE_COLUMNS, res.states))
    same = bodies[0] == bodies[1]
    return CheckReport("determinism", 1, 0.0 if same else -1.0,
                       f"{_group(spec, gamma, eps)};identical={str(same).lower()}", 0.0)


def vdp_falsification(spec: str, gamma: float, eps: float, budget: int,
                      depth: int = DEFAULT_DEPTH, seed: int = 0) -> dict:
    """Largest uplift gap found for the VDP abstraction (logged, not asserted)."""
    env = make_instance(spec)
    pr = run_pipeline(env, gamma, eps, depth, Kind.VDP, ("uniform", "diracExtremes"), (seed,), 0)
    _, m = pr.evaluator.coordinate_ascent("uplift_gap", budget, seed)
    gap = max([m.sup_gap] + [r.metrics.sup_gap for r in pr.runs])
    line = eps / (1 - gamma)
    return {"env": env.name, "gamma": gamma, "eps": eps, "budget": budget, "states": pr.n_states,
            "vdpGap": gap, "vadpLine": line, "exceeds": gap > line}


def run_suite(name: str, budget: Optional[int] = None, depth: int = DEFAULT_DEPTH,
              progress: Optional[Callable[[str], None]] = None) -> SuiteResult:
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; known: {', '.join(SUITES)}") from None
    budget = suite.budget if budget is None else budget
    rows: list[VerifyRow] = []
    falsification: list[dict] = []

    def note(msg):
        if progress is not None:
            progress(msg)

    for spec in suite.instances:
        env = make_instance(spec)
        for g in suite.gammas:
            for e in suite.epsilons:
                note(f"certify {_group(env.name, g, e)}")
                for r in certify(env, g, e, depth, budget=budget):
                    rows.append(VerifyRow(_group(env.name, g, e), r))
    if suite.extras:
        for spec in BINARIZED_INSTANCES:
            env = make_instance(spec)
            for g in (0.5, 0.9):
                for e in suite.epsilons:
                    note(f"binarized {_group(env.name, g, e)}")
                    rep = run_binarized_pipeline(env, g, e, depth, budget=budget)
                    for r in binarized_reports(rep):
                        rows.append(VerifyRow("bin:" + _group(env.name, g, e), r))
        for spec in suite.instances:
            for g in (0.5, 0.9):
                note(f"crosscheck {spec} gamma={g}")
                rows.append(VerifyRow(_group(make_instance(spec).name, g), oracle_crosscheck(spec, g)))
        for g in (0.25, 0.81):
            rows.append(VerifyRow(_group("chain3", g), value_scaling("chain3", g)))
        rows.append(VerifyRow("determinism", determinism_check()))
    for r in bound_regression():
        rows.append(VerifyRow("bounds", r))
    if suite.falsification:
        for spec in RANDOM_INSTANCES:
            for g in suite.gammas:
                for e in suite.epsilons:
                    note(f"falsify {spec} gamma={g} eps={e}")
                    falsification.append(vdp_falsification(spec, g, e, budget))
    return SuiteResult(suite.name, rows, falsification)


__all__ = ["SUITES", "Suite", "SuiteResult", "VerifyRow", "run_suite", "bound_regression",
           "oracle_crosscheck", "value_scaling", "determinism_check", "vdp_falsification"]
