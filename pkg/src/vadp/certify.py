"""Certification of the abstraction guarantees on concrete instances.

Every claim becomes a :class:`CheckReport` whose margin is ``bound -
observed`` at the worst dispersion distribution tried. The set of
distributions is the requested kinds plus, for the Dirac extremes, either
all of them (when at most ``EXHAUSTIVE_CAP`` contribution-class choices
exist) or seeded samples followed by coordinate ascent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .abstraction import AbstractionParams, Kind, build_abstraction
from .bounds import esa_bound, vadp_bound
from .core import Environment
from .evaluation import (EXHAUSTIVE_CAP, OBJECTIVES, SAMPLED_DIRACS, Evaluator,
                         RunMetrics)
from .oracle import ValueOracle, solve_latent
from .surrogate import DispersionDistribution, MemberIndex, make_dispersion

VIOLATION_TOL = 1e-8
LEMMA1_TOL = 1e-9
DEFAULT_DEPTH = 4
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_B_KINDS = ("uniform", "rolloutFrequency", "randomSimplex", "diracExtremes")
B_KINDS = ("uniform", "dirac", "rolloutFrequency", "randomSimplex", "diracExtremes", "adversarial")


@dataclass
class CheckReport:
    check: str
    instances: int
    worst_margin: float
    witness: str
    tolerance: float = VIOLATION_TOL

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tolerance


def merge_reports(reports: Iterable[CheckReport]) -> list[CheckReport]:
    """One report per check name, in first-seen order, keeping the worst witness."""
    merged: dict[str, CheckReport] = {}
    for r in reports:
        m = merged.get(r.check)
        if m is None:
            merged[r.check] = CheckReport(r.check, r.instances, r.worst_margin, r.witness, r.tolerance)
            continue
        m.instances += r.instances
        if r.worst_margin < m.worst_margin:
            m.worst_margin, m.witness = r.worst_margin, r.witness
    return list(merged.values())


@dataclass
class Run:
    b_kind: str
    seed: Optional[int]
    metrics: RunMetrics


def _worst_runs(b_kind: str, runs: Iterable[RunMetrics], seed=None) -> list[Run]:
    """Collapse many runs to the worst one per tracked quantity."""
    worst: dict[str, RunMetrics] = {}
    n = 0
    keys = {"delta": lambda m: m.delta, "lemma2": lambda m: m.lemma2_dev,
            "lemma4": lambda m: -m.lemma4_margin, "uplift_gap": lambda m: m.sup_gap}
    for m in runs:
        n += 1
        for name, f in keys.items():
            if name not in worst or f(m) > f(worst[name]):
                worst[name] = m
    out, seen = [], set()
    for name, m in worst.items():
        if id(m) in seen:
            continue
        seen.add(id(m))
        m.b_name = f"{b_kind}[n={n}]"
        out.append(Run(b_kind, seed, m))
    return out


def collect_runs(ev: Evaluator, b_kinds=DEFAULT_B_KINDS, seeds=DEFAULT_SEEDS,
                 budget: int = 0) -> list[Run]:
    index = ev.index
    ab, env, depth = index.abstraction, index.env, index.depth
    seeds = tuple(seeds) or (0,)
    runs: list[Run] = []

    def disp(kind, seed=0):
        return make_dispersion(ab, env, depth, kind, seed, index=index)

    for kind in b_kinds:
        if kind == "uniform":
            runs.append(Run(kind, None, ev.evaluate(disp(kind), kind)))
        elif kind == "dirac":
            runs.append(Run(kind, None, ev.evaluate(disp(kind), "dirac:shortest")))
        elif kind == "rolloutFrequency":
            runs.append(Run(kind, seeds[0], ev.evaluate(disp(kind, seeds[0]), f"{kind}:{seeds[0]}")))
        elif kind == "randomSimplex":
            for s in seeds:
                runs.append(Run(kind, s, ev.evaluate(disp(kind, s), f"{kind}:{s}")))
        elif kind == "diracExtremes":
            if ev.dirac_count() <= EXHAUSTIVE_CAP:
                runs.extend(_worst_runs(kind, ev.iter_dirac()))
            else:
                runs.extend(_worst_runs("diracSample", ev.sample_dirac(SAMPLED_DIRACS, seeds[0]), seeds[0]))
                for obj in OBJECTIVES:
                    _, m = ev.coordinate_ascent(obj, max(budget, SAMPLED_DIRACS), seeds[0])
                    m.b_name = f"diracAscent:{obj}"
                    runs.append(Run("diracAscent", seeds[0], m))
        elif kind == "adversarial":
            for obj in OBJECTIVES:
                _, m = ev.coordinate_ascent(obj, budget, seeds[0])
                m.b_name = f"adversarial:{obj}"
                runs.append(Run(kind, seeds[0], m))
        else:
            raise ValueError(f"unknown dispersion kind {kind!r}; known: {', '.join(B_KINDS)}")
    if budget > 0 and "adversarial" not in b_kinds:
        for obj in OBJECTIVES:
            _, m = ev.coordinate_ascent(obj, budget, seeds[0])
            m.b_name = f"adversarial:{obj}"
            runs.append(Run("adversarial", seeds[0], m))
    return runs


@dataclass
class PipelineRun:
    """One abstraction of one instance evaluated under a set of dispersions."""

    env: Environment
    params: AbstractionParams
    oracle: ValueOracle
    index: MemberIndex
    evaluator: Evaluator
    runs: list[Run]
    bound: Optional[float]
    reports: list[CheckReport] = field(default_factory=list)

    @property
    def n_states(self) -> int:
        return self.index.n_states

    def witness(self, b_name: str, state: Optional[int] = None, observed=None) -> str:
        parts = [f"env={self.env.name}", f"kind={self.params.kind.value}",
                 f"gamma={self.params.gamma:.12g}", f"eps={self.params.eps:.12g}",
                 f"depth={self.index.depth}", f"B={b_name}"]
        if state is not None and state >= 0:
            parts.append(f"state={self.index.states[state].text()}")
        if observed is not None:
            parts.append(f"observed={observed:.12g}")
        return ";".join(parts)


def _report(pr: PipelineRun, name: str, items, tol=VIOLATION_TOL) -> CheckReport:
    """``items``: iterable of ``(margin, witness)``."""
    items = list(items)
    margin, witness = min(items, key=lambda t: t[0])
    return CheckReport(name, len(items), float(margin), witness, tol)


def abstraction_checks(pr: PipelineRun) -> list[CheckReport]:
    p, ev = pr.params, pr.evaluator
    g, eps0 = p.gamma, p.eps0
    kind = p.kind
    out = []
    if kind in (Kind.VADP, Kind.VDP):
        suffix = "" if kind == Kind.VADP else "_vdp"
        l1, s1 = ev.lemma1()
        out.append(CheckReport("lemma1_maxmin" + suffix, pr.n_states, -l1,
                               pr.witness("none", s1, l1), LEMMA1_TOL))
        out.append(_report(pr, "lemma2_max_relationship" + suffix, (
            (eps0 - r.metrics.lemma2_dev,
             pr.witness(r.metrics.b_name, r.metrics.lemma2_state, r.metrics.lemma2_dev))
            for r in pr.runs)))
        bound3 = 2 * g * eps0 / (1 - g)
        out.append(_report(pr, "lemma3_q_gap" + suffix, (
            (bound3 - r.metrics.delta,
             pr.witness(r.metrics.b_name, r.metrics.delta_state, r.metrics.delta))
            for r in pr.runs)))
    if kind == Kind.VADP:
        out.append(_report(pr, "lemma4_support", (
            (r.metrics.lemma4_margin if r.metrics.lemma4_violations == 0
             else min(r.metrics.lemma4_margin, -1.0),
             pr.witness(r.metrics.b_name, r.metrics.lemma4_state, r.metrics.lemma4_violations))
            for r in pr.runs), tol=0.0))
        gap_bound = p.eps / (1 - g)
        out.append(_report(pr, "theorem3_uplift_gap", (
            (gap_bound - r.metrics.sup_gap, pr.witness(r.metrics.b_name, None, r.metrics.sup_gap))
            for r in pr.runs)))
        out.append(CheckReport("theorem4_state_count", 1, float(pr.bound - pr.n_states),
                               pr.witness("none", None, pr.n_states)))
    if kind == Kind.ESA_QGRID:
        out.append(CheckReport("esa_state_count", 1, float(pr.bound - pr.n_states),
                               pr.witness("none", None, pr.n_states)))
    return out


def run_pipeline(env: Environment, gamma: float, eps: float, depth: int = DEFAULT_DEPTH,
                 kind: Kind = Kind.VADP, b_kinds=DEFAULT_B_KINDS, seeds=DEFAULT_SEEDS,
                 budget: int = 0, oracle: Optional[ValueOracle] = None) -> PipelineRun:
    """Oracle, abstraction, member index and one run per dispersion.

    The enumeration depth is raised to the instance's coverage depth so
    every reachable (latent state, percept) pair has a member history.
    """
    params = AbstractionParams(eps, gamma, Kind(kind))
    if oracle is None:
        oracle = solve_latent(env, gamma)
    depth = max(depth, env.chain.coverage_depth)
    ab = build_abstraction(oracle, params, env)
    index = MemberIndex(ab, env, depth)
    ev = Evaluator(index, oracle, gamma, eps_prime=params.eps_prime)
    runs = collect_runs(ev, b_kinds, seeds, budget)
    bound = {Kind.VADP: lambda: vadp_bound(eps, gamma, env.n_actions),
             Kind.ESA_QGRID: lambda: esa_bound(eps, gamma, env.n_actions),
             Kind.MDP_LAST_PERCEPT: lambda: env.n_percepts}.get(params.kind, lambda: None)()
    pr = PipelineRun(env, params, oracle, index, ev, runs, bound)
    pr.reports = abstraction_checks(pr)
    return pr


def certify(env: Environment, gamma: float, eps: float, depth: int = DEFAULT_DEPTH,
            b_kinds=DEFAULT_B_KINDS, budget: int = 0, seeds=DEFAULT_SEEDS,
            include_vdp: bool = True, include_esa: bool = True) -> list[CheckReport]:
    """All abstraction checks for one instance and parameter pair."""
    oracle = solve_latent(env, gamma)
    reports = run_pipeline(env, gamma, eps, depth, Kind.VADP, b_kinds, seeds, budget, oracle).reports
    if include_vdp:
        reports += run_pipeline(env, gamma, eps, depth, Kind.VDP, b_kinds, seeds, budget, oracle).reports
    if include_esa:
        reports += run_pipeline(env, gamma, eps, depth, Kind.ESA_QGRID, ("uniform",), seeds, 0, oracle).reports
    return reports


def adversarial_b_search(env: Environment, gamma: float, eps: float, depth: int,
                         objective: str, budget: int, seed: int = 0,
                         kind: Kind = Kind.VADP) -> tuple[DispersionDistribution, float]:
    """Worst dispersion found by coordinate ascent over Dirac choices.

    Starts from the uniform distribution's value; with ``budget == 0`` the
    uniform distribution itself is returned.
    """
    oracle = solve_latent(env, gamma)
    params = AbstractionParams(eps, gamma, Kind(kind))
    depth = max(depth, env.chain.coverage_depth)
    ab = build_abstraction(oracle, params, env)
    index = MemberIndex(ab, env, depth)
    ev = Evaluator(index, oracle, gamma, eps_prime=params.eps_prime)
    choice, m = ev.coordinate_ascent(objective, budget, seed)
    if choice is None:
        return make_dispersion(ab, env, depth, "uniform", index=index), m.objective(objective)
    return ev.choice_dispersion(choice, "adversarial"), m.objective(objective)
