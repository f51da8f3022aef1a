"""Command-line entry point.

Every command writes ``manifest.json`` (and the effective ``config.json``)
into ``--out``. Exit codes: 0 success, 2 config error, 3 numerical failure,
4 hypothesis-validation failure.
"""
from __future__ import annotations

import argparse
import copy
import sys
import time
from pathlib import Path

from . import __version__
from .config import (
    build_control,
    build_optimizer_config,
    build_scenario,
    build_solver_config,
    config_hash,
    load_config,
    parse_config,
    preset_config,
    preset_names,
)
from .dynamics import validate_scenario
from .errors import BlowUpError, ConfigError, ConstraintError, DomainError, EvaluationError, HystRelaxError
from .export import (
    write_csv,
    write_energy_json,
    write_gap_csv,
    write_history_csv,
    write_json,
    write_trajectory_csv,
)
from .functions import available
from .optimizer import ObjectiveError, optimize_relaxed, relaxation_gap_experiment
from .solver import solve, state_gap

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 2, 3, 4


class HypothesisFailure(HystRelaxError):
    def __init__(self, report):
        super().__init__("hypothesis validation failed: " + ", ".join(report.failed))
        self.report = report


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hystrelax", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hystrelax {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config, help="scenario JSON (or a bundled preset name)")
        sp.add_argument("--out", default=None, help="output directory (default runs/<command>)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--dt", type=float, default=None)
        sp.add_argument("--hysteresis", default=None, help="projection | yosida:MU")
        sp.add_argument("--samples", type=int, default=10_000, help="hypothesis sampling budget")
        return sp

    common(sub.add_parser("simulate", help="solve the state system for the configured control"))
    mu = common(sub.add_parser("mu-study", help="Yosida trajectories vs the projection trajectory"))
    mu.add_argument("--mu", type=_float_list, default=None, help="comma-separated mu values")
    rg = common(sub.add_parser("relax-gap", help="relaxed optimum and its chattered approximations"))
    rg.add_argument("--n", type=_int_list, default=None, help="comma-separated chattering refinements")
    common(sub.add_parser("optimize", help="minimize the relaxed cost"))
    common(sub.add_parser("validate", help="sample the model hypotheses"))
    pr = sub.add_parser("presets", help="list bundled scenarios and function presets")
    pr.add_argument("--out", default=None, help="output directory (default runs/presets)")
    return p


def _effective_config(args) -> tuple[dict, dict]:
    raw = copy.deepcopy(load_config(args.config))
    overrides = {}
    if getattr(args, "seed", None) is not None:
        raw["seed"] = overrides["seed"] = args.seed
    if getattr(args, "dt", None) is not None:
        raw.setdefault("solver", {})["dt"] = overrides["solver.dt"] = args.dt
    if getattr(args, "hysteresis", None) is not None:
        raw.setdefault("solver", {})["hysteresis"] = overrides["solver.hysteresis"] = args.hysteresis
    if getattr(args, "n", None) is not None:
        raw.setdefault("experiment", {})["n_list"] = overrides["experiment.n_list"] = args.n
    if getattr(args, "mu", None) is not None:
        raw.setdefault("experiment", {})["mu_list"] = overrides["experiment.mu_list"] = args.mu
    return raw, overrides


def _validated(cfg, samples):
    s = build_scenario(cfg)
    report = validate_scenario(s, samples)
    if not report.passed:
        raise HypothesisFailure(report)
    return s, report


def cmd_simulate(cfg, out: Path, args) -> list[Path]:
    s, _ = _validated(cfg, args.samples)
    scfg = build_solver_config(cfg)
    traj = solve(s, scfg, build_control(cfg, s))
    return [write_trajectory_csv(out / "trajectory.csv", traj), write_energy_json(out / "energy.json", traj)]


def cmd_mu_study(cfg, out: Path, args) -> list[Path]:
    mus = cfg.experiment.mu_list
    if not mus or any(not m > 0 for m in mus):
        raise ConfigError(f"experiment.mu_list: every mu must be positive, got {mus}")
    s, _ = _validated(cfg, args.samples)
    base = build_solver_config(cfg).with_(mode="projection", mu=None)
    u = build_control(cfg, s)
    ref = solve(s, base, u)
    rows = [(m, state_gap(s, solve(s, base.with_(mode="yosida", mu=m), u), ref)) for m in mus]
    return [write_csv(out / "mu_study.csv", ("mu", "sup_state_gap_to_projection"), rows)]


def cmd_relax_gap(cfg, out: Path, args) -> list[Path]:
    s, _ = _validated(cfg, args.samples)
    rep = relaxation_gap_experiment(
        s, build_solver_config(cfg), build_optimizer_config(cfg), cfg.experiment.n_list
    )
    return [write_gap_csv(out / "gap.csv", rep.rows), write_json(out / "gap_report.json", rep.to_dict())]


def cmd_optimize(cfg, out: Path, args) -> list[Path]:
    s, _ = _validated(cfg, args.samples)
    res = optimize_relaxed(s, build_solver_config(cfg), build_optimizer_config(cfg))
    return [
        write_history_csv(out / "history.csv", res.history),
        write_json(out / "optimize_result.json", res.to_dict()),
    ]


def cmd_validate(cfg, out: Path, args) -> list[Path]:
    s = build_scenario(cfg)
    report = validate_scenario(s, args.samples)
    print(report.summary())
    path = write_json(out / "validation.json", report.to_dict())
    if not report.passed:
        raise HypothesisFailure(report)
    return [path]


def cmd_presets(out: Path) -> list[Path]:
    listing = {"scenarios": {}, "functions": available()}
    print("scenarios:")
    for name in preset_names():
        desc = preset_config(name).get("description", "")
        listing["scenarios"][name] = desc
        print(f"  {name:<18} {desc}")
    print("function presets:")
    for role, names in listing["functions"].items():
        print(f"  {role:<10} {', '.join(names)}")
    return [write_json(out / "presets.json", listing)]


COMMANDS = {
    "simulate": cmd_simulate,
    "mu-study": cmd_mu_study,
    "relax-gap": cmd_relax_gap,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
}


def _write_manifest(out, command, config_path, raw, overrides, outputs, t0):
    manifest = {
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "config_hash": config_hash(raw) if raw is not None else None,
        "tool_version": __version__,
        "overrides": overrides,
        "outputs": [str(p) for p in outputs],
        "wall_time": time.perf_counter() - t0,
    }
    write_json(out / "manifest.json", manifest)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    out = Path(args.out or Path("runs") / args.command)
    if args.command == "presets":
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(out, "presets", None, None, {}, cmd_presets(out), t0)
        return EXIT_OK

    raw = None
    try:
        raw, overrides = _effective_config(args)
        cfg = parse_config(raw)
        out.mkdir(parents=True, exist_ok=True)
        outputs = [write_json(out / "config.json", raw)]
        outputs += COMMANDS[args.command](cfg, out, args)
    except (ConfigError, ConstraintError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.command != "validate":
            print(exc.report.summary(), file=sys.stderr)
        _write_manifest(out, args.command, args.config, raw, overrides, [], t0)
        return EXIT_HYPOTHESIS
    except (BlowUpError, EvaluationError, ObjectiveError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if out.is_dir():
            _write_manifest(out, args.command, args.config, raw, overrides, [], t0)
        return EXIT_NUMERIC
    _write_manifest(out, args.command, args.config, raw, overrides, outputs, t0)
    print(f"wrote {', '.join(str(p) for p in outputs)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
