"""Command-line front end.

Exit codes: 0 success, 2 config or input error, 3 scope or budget error,
4 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import warnings
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .delay import NotSpecialCaseError, coded_objective, special_case, uncoded_objective
from .experiments import KINDS, ExperimentConfig, run_experiment
from .greedy import greedy_place
from .io import (FormatError, read_config, read_instance, read_placement, scenario_config,
                 write_instance, write_placement, write_scenario)
from .lp import LPSolveError, solve_coded
from .model import (CodedPlacement, FileLibrary, InfeasiblePlacementError, check_placement,
                    validate, zipf_popularity)
from .oracle import BudgetExceededError, DEFAULT_BUDGET, exact_uncoded
from .pipage import lp_pipage_solve
from .scenario import (CalibrationError, average_download_rate, calibrate_grid, compile_scenario,
                       make_scenario)

EXIT_OK, EXIT_CONFIG, EXIT_SCOPE, EXIT_SOLVER = 0, 2, 3, 4
MANIFEST_FORMAT = "helpercache-manifest"
FIGURE_FILES = {"helpers_sweep": "fig4.csv", "users_sweep": "fig5.csv", "mobility": "fig6.csv"}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def config_digest(obj) -> str:
    """sha256 of canonical JSON (sorted keys, no whitespace, repr floats)."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


class Manifest:
    def __init__(self, argv, config, seeds):
        self.data = {"format": MANIFEST_FORMAT, "tool_version": __version__,
                     "command_line": list(argv), "config": config,
                     "config_digest": config_digest(config), "seeds": list(seeds),
                     "wall_clock_s": {}}

    @contextmanager
    def phase(self, name):
        t0 = time.perf_counter()
        yield
        self.data["wall_clock_s"][name] = time.perf_counter() - t0

    def write(self, path):
        Path(path).write_text(json.dumps(self.data, indent=1) + "\n")


def _out_dir(args) -> Path:
    if not args.out:
        raise CliError(EXIT_CONFIG, "--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- generate --------------------------------------------------------------

def cmd_generate(args, argv) -> int:
    raw = read_config(args.config)
    cfg = scenario_config(raw, str(args.config))
    seed = cfg["seed"] if args.seed is None else args.seed
    out = _out_dir(args)
    manifest = Manifest(argv, {**raw, "seed": seed}, [seed])
    with manifest.phase("generate"):
        geom = cfg["geometry"]
        if "helpers" in cfg:
            try:
                geom = calibrate_grid(geom, cfg["helpers"])
            except CalibrationError as exc:
                raise CliError(EXIT_CONFIG, f"{args.config}: field 'helpers': {exc}") from None
        scenario = make_scenario(geom, cfg["radio"], cfg["users"], seed)
        lib = FileLibrary(cfg["files"], cfg["file_size_bits"])
        inst, _ = compile_scenario(scenario, lib, zipf_popularity(cfg["files"], cfg["zipf_gamma"]),
                                   cfg["cache_size"])
    write_scenario(scenario, out / "scenario.json")
    write_instance(inst, out / "instance.json")
    manifest.write(out / "manifest.json")
    print(f"helpers={inst.H} users={inst.U} files={inst.F} cache_size={inst.M} "
          f"max_degree={inst.max_degree} out={out}")
    return EXIT_OK


# -- solve / evaluate / validate ---------------------------------------------

def _summary(inst, placement) -> tuple[float, float]:
    base = float(inst.omega_bs.sum())
    if isinstance(placement, CodedPlacement):
        delay = coded_objective(inst, placement)
        return delay, base - delay
    savings = uncoded_objective(inst, placement)
    return base - savings, savings


def cmd_solve(args, argv) -> int:
    inst = read_instance(args.instance)
    if not args.out:
        raise CliError(EXIT_CONFIG, "--out is required")
    budget = args.budget if args.budget is not None else DEFAULT_BUDGET
    manifest = Manifest(argv, {"algorithm": args.algorithm, "backend": args.backend,
                               "budget": budget,
                               "instance_sha256": hashlib.sha256(
                                   Path(args.instance).read_bytes()).hexdigest()}, [])
    trace: list = []
    t0 = time.perf_counter()
    with manifest.phase("solve"):
        if args.algorithm == "greedy":
            placement, gt = greedy_place(inst)
            trace = gt.to_rows()
        elif args.algorithm == "coded":
            placement, _ = solve_coded(inst, backend=args.backend)
        elif args.algorithm == "lp-pipage":
            steps: list = []
            placement = lp_pipage_solve(special_case(inst), backend=args.backend, trace=steps)
            trace = [s._asdict() for s in steps]
        else:
            res = exact_uncoded(inst, budget)
            placement = res.placements[0]
    wall = time.perf_counter() - t0
    write_placement(placement, args.out)
    manifest.write(str(args.out) + ".manifest.json")
    if args.trace:
        Path(args.trace).write_text(json.dumps(trace, indent=1) + "\n")
    delay, savings = _summary(inst, placement)
    print(f"algorithm={args.algorithm} objective={delay!r} savings={savings!r} "
          f"wall_time={wall:.3f}s")
    return EXIT_OK


def cmd_evaluate(args, argv) -> int:
    inst = read_instance(args.instance)
    placement = read_placement(args.placement)
    try:
        check_placement(inst, placement, binary=not isinstance(placement, CodedPlacement))
    except InfeasiblePlacementError as exc:
        raise CliError(EXIT_CONFIG, f"infeasible placement: {exc}") from None
    delay, savings = _summary(inst, placement)
    print(f"objective={delay!r} savings={savings!r} "
          f"avg_rate_bps={average_download_rate(inst, placement)!r} "
          f"bs_only_rate_bps={average_download_rate(inst)!r}")
    return EXIT_OK


def cmd_validate(args, argv) -> int:
    inst = read_instance(args.instance)
    problems = validate(inst)
    for v in problems:
        print(f"violation: {v.invariant}: {v.detail}")
    if args.placement:
        placement = read_placement(args.placement)
        try:
            check_placement(inst, placement, binary=not isinstance(placement, CodedPlacement))
        except InfeasiblePlacementError as exc:
            print(f"violation: placement: {exc}")
            problems.append(exc)
    if problems:
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


# -- experiment ------------------------------------------------------------

def _experiment_setup(args):
    """Resolve kind, effective config and seeds from flags or a manifest."""
    raw = read_config(args.config) if args.config else {}
    if raw.get("format") == MANIFEST_FORMAT:
        cfg = raw["config"]
        kind = args.kind or cfg["kind"]
        if kind != cfg["kind"]:
            raise CliError(EXIT_CONFIG, f"manifest is for {cfg['kind']!r}, not {kind!r}")
        params = {k: v for k, v in cfg.items() if k != "kind"}
        return kind, ExperimentConfig.from_dict(params)
    if not args.kind:
        raise CliError(EXIT_CONFIG, "experiment kind is required")
    try:
        config = ExperimentConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"{args.config}: {exc}") from None
    if args.scale is not None:
        config = config.scaled(args.scale)
    if args.seed is not None or args.seeds is not None:
        first = config.seeds[0] if args.seed is None else args.seed
        n = len(config.seeds) if args.seeds is None else args.seeds
        config = ExperimentConfig.from_dict({**config.to_dict(), "seeds": range(first, first + n)})
    return args.kind, config


def cmd_experiment(args, argv) -> int:
    kind, config = _experiment_setup(args)
    out = _out_dir(args)
    manifest = Manifest(argv, {"kind": kind, **config.to_dict()}, config.seeds)
    with manifest.phase(kind):
        result = run_experiment(kind, config, threads=args.threads)
    (out / FIGURE_FILES[kind]).write_text(result.to_csv())
    manifest.write(out / "manifest.json")
    schemes = list(dict.fromkeys(r.scheme for r in result.rows))
    summary = result.summary()
    print("param " + " ".join(f"{s:>22}" for s in schemes))
    for p in result.params():
        cells = [f"{summary[(p, s)][0] / 1e3:10.1f}+-{summary[(p, s)][1] / 1e3:<8.1f}kbps"
                 for s in schemes]
        print(f"{p:5d} " + " ".join(cells))
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="seed (generate) or first seed (experiment)")
    common.add_argument("--scale", type=float, help="shrink files, cache, users and seeds")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes for experiments (default: all cores)")
    common.add_argument("--budget", type=int, help="enumeration budget for the exact solver")
    common.add_argument("--out", help="output file (solve) or directory")

    p = argparse.ArgumentParser(prog="helpercache", description="Cache placement for wireless helper networks.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="scenario config -> instance")
    g.add_argument("config")

    s = sub.add_parser("solve", parents=[common], help="instance -> placement")
    s.add_argument("instance")
    s.add_argument("--algorithm", required=True,
                   choices=("greedy", "coded", "lp-pipage", "exact"))
    s.add_argument("--backend", default="highs", help="LP backend (simplex or highs)")
    s.add_argument("--trace", help="write the solver trace as JSON")

    e = sub.add_parser("evaluate", parents=[common], help="score a placement")
    e.add_argument("instance")
    e.add_argument("placement")

    x = sub.add_parser("experiment", parents=[common], help="run a sweep, write CSV")
    x.add_argument("kind", nargs="?", choices=KINDS)
    x.add_argument("--config", help="experiment config or a manifest to rerun")
    x.add_argument("--seeds", type=int, help="number of seeds")

    v = sub.add_parser("validate", parents=[common], help="check instance invariants")
    v.add_argument("instance")
    v.add_argument("--placement")
    return p


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "evaluate": cmd_evaluate,
            "experiment": cmd_experiment, "validate": cmd_validate}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return COMMANDS[args.command](args, ["helpercache", *argv])
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except (BudgetExceededError, NotSpecialCaseError) as exc:
        code, msg = EXIT_SCOPE, str(exc)
    except (LPSolveError, RuntimeError) as exc:
        code, msg = EXIT_SOLVER, f"solver failure: {exc}"
    except (FormatError, InfeasiblePlacementError, OSError, ValueError, KeyError) as exc:
        code, msg = EXIT_CONFIG, str(exc)
    print(f"error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
