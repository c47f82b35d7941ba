"""Command-line runner: ``vadp-lab {bounds,run,sweep,verify,list-envs}``.

Exit status: 0 when every check passed, 1 when at least one certification
failed (or a sweep row failed), 2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .bounds import bound_row
from .certify import merge_reports
from .core import ResourceLimitError
from .experiment import (RUN_COLUMNS, STATE_COLUMNS, TIMING_COLUMNS, ConfigError,
                         ExperimentConfig, fmt, render_csv, run_experiment, write_csv)
from .instances import describe_instances
from .surrogate import IncompleteSupportError
from .suites import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

BOUND_COLUMNS = ["eps", "gamma", "A", "esa", "vadp", "bin_full", "bin_simplified"]
SWEEP_COLUMNS = RUN_COLUMNS + ["ratio", "status"]
VERIFY_COLUMNS = ["group", "check", "instances", "worstMargin", "tolerance", "passed", "witness"]
FALSIFICATION_COLUMNS = ["env", "gamma", "eps", "budget", "states", "vdpGap", "vadpLine", "exceeds"]
SWEEP_KEYS = ("template", "grid")
GRID_KEYS = ("env", "gamma", "eps")


def _out_dir(args, default: str = "out") -> Path:
    return Path(args.out if args.out is not None else default)


def cmd_bounds(args) -> int:
    try:
        row = bound_row(args.eps, args.gamma, args.A)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    row = {"eps": args.eps, "gamma": args.gamma, "A": args.A, **row}
    text = render_csv(BOUND_COLUMNS, [row])
    print(text, end="")
    write_csv(_out_dir(args) / "bounds.csv", BOUND_COLUMNS, [row])
    return EXIT_OK


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.depth is not None:
        cfg.depth = args.depth
    cfg.validate()
    return cfg


def _budget(args) -> int:
    if args.budget is not None and args.budget < 0:
        raise ConfigError("--budget must be non-negative")
    return args.budget or 0


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
        budget = _budget(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    res = run_experiment(cfg, budget)
    out = _out_dir(args, cfg.outputDir)
    write_csv(out / "runs.csv", RUN_COLUMNS, res.runs)
    write_csv(out / "states.csv", STATE_COLUMNS, res.states)
    write_csv(out / "timing.csv", TIMING_COLUMNS, res.timing)
    for r in res.reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check} margin={fmt(r.worst_margin)}")
    print(f"wrote {out / 'runs.csv'}, {out / 'states.csv'}")
    return EXIT_OK if res.passed else EXIT_FAIL


def _load_sweep(args) -> tuple[dict, dict]:
    if args.config is None:
        raise ConfigError("--config is required")
    try:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sweep file {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("sweep file must be a JSON object")
    unknown = sorted(set(data) - set(SWEEP_KEYS))
    if unknown:
        raise ConfigError(f"unknown sweep keys: {', '.join(unknown)}")
    template, grid = data.get("template", {}), data.get("grid", {})
    if not isinstance(template, dict) or not isinstance(grid, dict):
        raise ConfigError("template and grid must be objects")
    unknown = sorted(set(grid) - set(GRID_KEYS))
    if unknown:
        raise ConfigError(f"unknown grid keys: {', '.join(unknown)}")
    for k in GRID_KEYS:
        if k in grid and k in template:
            raise ConfigError(f"{k!r} given in both template and grid")
        if k in grid and not isinstance(grid[k], list):
            raise ConfigError(f"grid entry {k!r} must be a list")
    return template, grid


def _sweep_configs(template: dict, grid: dict, args) -> list[ExperimentConfig]:
    # an axis given nowhere is empty, so the sweep has no rows
    axes = {k: grid[k] if k in grid else [template[k]] if k in template else []
            for k in GRID_KEYS}
    configs = []
    for env in axes["env"]:
        for g in axes["gamma"]:
            for e in axes["eps"]:
                data = {**template, "env": env, "gamma": g, "eps": e}
                if args.seed is not None:
                    data["seeds"] = [args.seed]
                if args.depth is not None:
                    data["depth"] = args.depth
                configs.append(ExperimentConfig.from_dict(data))
    return configs


def _sort_key(row):
    seed = row.get("seed")
    return (str(row["env"]), row["gamma"], row["eps"], str(row.get("bKind", "")),
            -1 if seed in ("", None) else seed)


def cmd_sweep(args) -> int:
    try:
        template, grid = _load_sweep(args)
        configs = _sweep_configs(template, grid, args)
        budget = _budget(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rows, failed = [], False
    for cfg in configs:
        try:
            res = run_experiment(cfg, budget)
        except (ResourceLimitError, IncompleteSupportError, ValueError) as exc:
            failed = True
            rows.append({"env": str(cfg.env), "abstraction": cfg.abstraction.value,
                         "gamma": cfg.gamma, "eps": cfg.eps, "depth": cfg.depth,
                         "status": f"failed: {type(exc).__name__}: {exc}"})
            continue
        for row in res.runs:
            bound = row["bound"]
            row["ratio"] = row["states"] / bound if bound not in (None, 0) else None
            row["status"] = "ok" if row["passed"] else "violation"
            failed = failed or not row["passed"]
            rows.append(row)
    rows.sort(key=_sort_key)
    out = _out_dir(args, template.get("outputDir", "out"))
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_verify(args) -> int:
    suite = args.suite or "quick"
    if suite not in SUITES:
        print(f"error: unknown suite {suite!r}; known: {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        budget = None if args.budget is None else _budget(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    depth = args.depth if args.depth is not None else 4
    res = run_suite(suite, budget, depth)
    out = _out_dir(args)
    rows = [{"group": r.group, "check": r.report.check, "instances": r.report.instances,
             "worstMargin": r.report.worst_margin, "tolerance": r.report.tolerance,
             "passed": r.report.passed, "witness": r.report.witness} for r in res.rows]
    write_csv(out / "verify.csv", VERIFY_COLUMNS, rows)
    if res.falsification:
        write_csv(out / "falsification.csv", FALSIFICATION_COLUMNS, res.falsification)
    for m in merge_reports(res.reports()):
        print(f"{'PASS' if m.passed else 'FAIL'} {m.check:<30} n={m.instances:<5} "
              f"worstMargin={fmt(m.worst_margin)}")
    print(f"suite {suite}: {'passed' if res.passed else 'FAILED'}; wrote {out / 'verify.csv'}")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_list_envs(args) -> int:
    for line in describe_instances():
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vadp-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed list")
        p.add_argument("--depth", type=int, help="history enumeration depth")
        p.add_argument("--budget", type=int, help="adversarial search evaluations")
        p.add_argument("--suite", help="verification suite name")
        return p

    p = common(sub.add_parser("bounds", help="closed-form state-count bounds"))
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("-A", "--actions", dest="A", type=int, required=True)
    p.set_defaults(func=cmd_bounds)
    common(sub.add_parser("run", help="run one configuration")).set_defaults(func=cmd_run)
    common(sub.add_parser("sweep", help="run a grid of configurations")).set_defaults(func=cmd_sweep)
    common(sub.add_parser("verify", help="run a certification suite")).set_defaults(func=cmd_verify)
    common(sub.add_parser("list-envs", help="list instance families")).set_defaults(func=cmd_list_envs)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.depth is not None and args.depth < 1:
        print("error: --depth must be positive", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
