"""Experiment configuration and the table rows written by the runner.

A run evaluates one abstraction of one instance under a list of dispersion
kinds. All numbers are rendered with twelve significant digits and rows are
emitted in a fixed order, so the CSV bodies for a fixed configuration are
byte-identical between runs. Wall times are kept in a separate table.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .abstraction import Kind
from .binarizer import binarized_reports, run_binarized_pipeline
from .bounds import bits_per_action
from .certify import (B_KINDS, DEFAULT_B_KINDS, DEFAULT_DEPTH, DEFAULT_SEEDS, CheckReport,
                      PipelineRun, run_pipeline)
from .instances import InstanceSpec, make_instance

KIND_ALIASES = {"VADP": Kind.VADP, "VDP": Kind.VDP, "ESA": Kind.ESA_QGRID,
                "ESA_QGRID": Kind.ESA_QGRID, "MDP": Kind.MDP_LAST_PERCEPT,
                "MDP_LAST_PERCEPT": Kind.MDP_LAST_PERCEPT}

RUN_COLUMNS = ["env", "abstraction", "gamma", "eps", "depth", "bKind", "seed", "bName",
               "states", "bound", "delta", "deltaBound", "lemma1Dev", "lemma2Dev", "lemma2Bound",
               "lemma4Margin", "lemma4Violations", "supGap", "gapBound", "fallbacks", "passed"]
STATE_COLUMNS = ["env", "abstraction", "gamma", "eps", "label", "members", "vMin", "vMax"]
TIMING_COLUMNS = ["env", "abstraction", "gamma", "eps", "seconds"]


class ConfigError(ValueError):
    """Invalid experiment configuration (exit status 2)."""


def fmt(x) -> str:
    """Fixed rendering for CSV cells."""
    if x is None:
        return "n/a"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if x == float("inf"):
            return "inf"
        return format(x + 0.0, ".12g")
    return str(x)


def render_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(columns, rows), encoding="utf-8")


@dataclass
class ExperimentConfig:
    env: InstanceSpec
    gamma: float
    eps: float
    depth: int = DEFAULT_DEPTH
    abstraction: Kind = Kind.VADP
    bKinds: list = field(default_factory=lambda: list(DEFAULT_B_KINDS))
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))
    binarized: bool = False
    outputDir: str = "out"

    KEYS = ("env", "gamma", "eps", "depth", "abstraction", "bKinds", "seeds",
            "binarized", "outputDir")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = sorted(set(data) - set(cls.KEYS))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        for key in ("env", "gamma", "eps"):
            if key not in data:
                raise ConfigError(f"missing configuration key {key!r}")
        kw = dict(data)
        try:
            kw["env"] = InstanceSpec.parse(kw["env"])
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(str(exc)) from None
        if "abstraction" in kw:
            try:
                kw["abstraction"] = KIND_ALIASES[str(kw["abstraction"]).upper()]
            except KeyError:
                raise ConfigError(f"unknown abstraction {kw['abstraction']!r}") from None
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        def number(name):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name} must be a number, got {v!r}")
            return float(v)

        self.gamma, self.eps = number("gamma"), number("eps")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if not 0 <= self.gamma < 1:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if isinstance(self.depth, bool) or not isinstance(self.depth, int) or self.depth < 1:
            raise ConfigError(f"depth must be a positive integer, got {self.depth!r}")
        if not isinstance(self.bKinds, list) or not all(k in B_KINDS for k in self.bKinds):
            raise ConfigError(f"bKinds must be a list drawn from {', '.join(B_KINDS)}")
        if (not isinstance(self.seeds, list) or not self.seeds
                or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in self.seeds)):
            raise ConfigError("seeds must be a non-empty list of non-negative integers")
        if not isinstance(self.binarized, bool):
            raise ConfigError("binarized must be true or false")
        if not isinstance(self.outputDir, str):
            raise ConfigError("outputDir must be a path string")
        try:
            env = make_instance(self.env)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.binarized:
            if self.abstraction != Kind.VADP:
                raise ConfigError("the binarized pipeline builds VADP abstractions only")
            if env.n_actions < 2:
                raise ConfigError("the binarized pipeline needs at least two actions")
            if self.gamma <= 0 and bits_per_action(env.n_actions) > 1:
                raise ConfigError("the binarized pipeline needs gamma > 0 for more than two actions")


@dataclass
class ExperimentResult:
    runs: list[dict]
    states: list[dict]
    timing: list[dict]
    reports: list[CheckReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def _run_rows(pr: PipelineRun, env_name: str, abstraction: str, gap_bound, bound) -> list[dict]:
    p = pr.params
    g, eps0 = p.gamma, p.eps0
    l1, _ = pr.evaluator.lemma1() if p.kind in (Kind.VADP, Kind.VDP) else (None, None)
    certified = p.kind in (Kind.VADP, Kind.VDP)
    rows = []
    for r in pr.runs:
        m = r.metrics
        delta_bound = 2 * g * eps0 / (1 - g) if certified else None
        lemma2_bound = eps0 if certified else None
        ok = True
        if certified:
            ok = m.delta <= delta_bound + 1e-8 and m.lemma2_dev <= lemma2_bound + 1e-8
        if p.kind == Kind.VADP:
            ok = ok and m.lemma4_violations == 0 and m.sup_gap <= gap_bound + 1e-8
        if bound is not None:
            ok = ok and pr.n_states <= bound
        vadp = p.kind == Kind.VADP
        rows.append({
            "env": env_name, "abstraction": abstraction, "gamma": g, "eps": p.eps,
            "depth": pr.index.depth, "bKind": r.b_kind, "seed": r.seed if r.seed is not None else "",
            "bName": m.b_name, "states": pr.n_states, "bound": bound,
            "delta": m.delta, "deltaBound": delta_bound, "lemma1Dev": l1,
            "lemma2Dev": m.lemma2_dev, "lemma2Bound": lemma2_bound,
            "lemma4Margin": m.lemma4_margin if vadp else None,
            "lemma4Violations": m.lemma4_violations if vadp else None,
            "supGap": m.sup_gap, "gapBound": gap_bound if vadp else None,
            "fallbacks": m.fallbacks, "passed": bool(ok),
        })
    return rows


def _state_rows(pr: PipelineRun, env_name: str, abstraction: str) -> list[dict]:
    ev, index = pr.evaluator, pr.index
    return [{"env": env_name, "abstraction": abstraction, "gamma": pr.params.gamma,
             "eps": pr.params.eps, "label": label.text(), "members": len(index.members[s]),
             "vMin": float(ev.vmin[s]), "vMax": float(ev.vmax[s])}
            for s, label in enumerate(index.states)]


def run_experiment(cfg: ExperimentConfig, budget: int = 0,
                   depth: Optional[int] = None) -> ExperimentResult:
    """Run one configuration; ``depth`` overrides the configured depth."""
    env = make_instance(cfg.env)
    depth = cfg.depth if depth is None else depth
    t0 = time.perf_counter()
    if cfg.binarized:
        rep = run_binarized_pipeline(env, cfg.gamma, cfg.eps, depth, cfg.bKinds, cfg.seeds, budget)
        pr = rep.pipeline
        abstraction = "VADP-bin"
        runs = _run_rows(pr, env.name, abstraction, rep.gap_bound, rep.bound)
        for row in runs:
            row["gamma"], row["eps"] = cfg.gamma, cfg.eps
        reports = binarized_reports(rep)
    else:
        pr = run_pipeline(env, cfg.gamma, cfg.eps, depth, cfg.abstraction, cfg.bKinds,
                          cfg.seeds, budget)
        abstraction = cfg.abstraction.value
        runs = _run_rows(pr, env.name, abstraction, cfg.eps / (1 - cfg.gamma), pr.bound)
        reports = pr.reports
    states = _state_rows(pr, env.name, abstraction)
    if cfg.binarized:
        for row in states:
            row["gamma"], row["eps"] = cfg.gamma, cfg.eps
    timing = [{"env": env.name, "abstraction": abstraction, "gamma": cfg.gamma, "eps": cfg.eps,
               "seconds": time.perf_counter() - t0}]
    return ExperimentResult(runs, states, timing, reports)
