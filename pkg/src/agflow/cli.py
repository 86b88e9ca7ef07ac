"""Command-line front end.

    agflow simulate CONFIG [--set path=value ...] [--out DIR]
    agflow reduce CONFIG ...
    agflow compare-warmstart CONFIG ...
    agflow diagnose CONFIG ...
    agflow reproduce {fig3,fig4,fig5,fig6,all} [--out DIR] [--jobs N]

Validation failures exit with status 2 and a JSON error object on stderr;
runtime failures exit with status 1.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import reproduce as repro
from .scenario import (
    ConfigError,
    NonConvergenceError,
    apply_overrides,
    load_config,
    parse_config,
    run_scenario,
    run_warmstart_comparison,
)


def _load(args):
    data = load_config(args.config)
    data = apply_overrides(data, args.set or [])
    return parse_config(data)


def _print(report: dict):
    print(json.dumps(report, indent=2, sort_keys=True, default=str))


def _summary(report: dict) -> dict:
    keep = ("mode", "steps", "grad_evals", "final_error", "stop_reason", "wall_time", "artifacts")
    return {k: report[k] for k in keep if k in report}


def cmd_simulate(args):
    cfg = _load(args)
    _print(_summary(run_scenario(cfg, args.out)))


def cmd_reduce(args):
    cfg = _load(args)
    if cfg.mode in ("el_flow", "metric_flow"):
        cfg = dataclasses.replace(cfg, mode="reduced_flow",
                                  reduced=dataclasses.replace(cfg.reduced, kind="autonomous"))
    elif cfg.mode == "nesterov_flow":
        cfg = dataclasses.replace(cfg, mode="reduced_flow",
                                  reduced=dataclasses.replace(cfg.reduced, kind="nonautonomous"))
    elif cfg.mode != "reduced_flow":
        raise ConfigError("mode", "reduce needs a flow scenario")
    cfg = dataclasses.replace(
        cfg,
        initial=dataclasses.replace(cfg.initial, v=None, warm_start="none"),
        output=dataclasses.replace(cfg.output, name=cfg.output.name + "_reduced"),
    )
    _print(_summary(run_scenario(cfg, args.out)))


def cmd_compare_warmstart(args):
    cfg = _load(args)
    report = run_warmstart_comparison(cfg, args.out)
    report.pop("config", None)
    _print(report)


def cmd_diagnose(args):
    cfg = _load(args)
    cfg = dataclasses.replace(
        cfg, diagnostics=dataclasses.replace(cfg.diagnostics, distance=True, energy=True, lyapunov=True,
                                             identity_residual=True))
    report = run_scenario(cfg, args.out)
    _print(_summary(report))


def cmd_reproduce(args):
    files = repro.reproduce(args.figure, args.out, args.jobs)
    _print({"figures": files})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agflow", description="Accelerated gradient flows and slow manifolds.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="scenario YAML file")
        p.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="override a config field, e.g. params.mu=4 (repeatable)")
        p.add_argument("--out", default=None, help="output directory (default: output.dir)")
        p.set_defaults(func=fn)

    scenario_cmd("simulate", cmd_simulate, "run a scenario")
    scenario_cmd("reduce", cmd_reduce, "run the reduced flow of a scenario")
    scenario_cmd("compare-warmstart", cmd_compare_warmstart, "cold start against the manifold warm start")
    scenario_cmd("diagnose", cmd_diagnose, "run a scenario with every diagnostic enabled")

    p = sub.add_parser("reproduce", help="write the data behind the example figures")
    p.add_argument("figure", choices=[*repro.FIGURES, "all"])
    p.add_argument("--out", default="figures", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for 'all'")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _fail(payload: dict, code: int) -> int:
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        return _fail(exc.to_dict(), 2)
    except NonConvergenceError as exc:
        return _fail({"error": "nonconvergence", "message": str(exc)}, 1)
    except (ValueError, ArithmeticError, OSError) as exc:
        return _fail({"error": "runtime", "type": type(exc).__name__, "message": str(exc)}, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
