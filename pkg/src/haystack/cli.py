"""Command-line entry point: ``haystack {simulate,detect,risk,figure3,bounds}``.

Exit status is 0 on success, 2 for a bad config and 3 for a failure while running.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .bounds import BoundInputs, bounds_table, bounds_table_csv, default_bound_inputs
from .detector import DetectorConfig, detect, verdict_to_json
from .harness import SpecError, run_experiment_file
from .likelihood import figure3_sweep, sweep_to_csv
from .signal_model import DynamicsConfig, simulate_trajectory, trajectory_to_csv, world_oracle

EXIT_OK, EXIT_SPEC, EXIT_RUNTIME = 0, 2, 3


def _load_config(path: str | None) -> dict | list:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read config {path}: {exc}") from exc


def _pick(cfg: dict, key: str, default=None, kind=float):
    if key not in cfg:
        if default is None:
            raise SpecError(f"config is missing {key!r}")
        return default
    try:
        return kind(cfg[key])
    except (TypeError, ValueError) as exc:
        raise SpecError(f"bad value for {key!r}: {cfg[key]!r}") from exc


def _dynamics(cfg: dict) -> DynamicsConfig:
    try:
        return DynamicsConfig(
            n=_pick(cfg, "n", kind=int), s=_pick(cfg, "s", kind=int),
            p=_pick(cfg, "p", 0.0), mu=_pick(cfg, "mu", 0.0),
        )
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def _seed(args, cfg: dict) -> int:
    return args.seed if args.seed is not None else _pick(cfg, "seed", 0, int)


def cmd_simulate(args, out) -> None:
    cfg = _load_config(args.config)
    dyn = _dynamics(cfg)
    m = _pick(cfg, "m", 100, int)
    traj = simulate_trajectory(dyn, m, np.random.default_rng(_seed(args, cfg)))
    trajectory_to_csv(traj, out)


def cmd_detect(args, out) -> None:
    cfg = _load_config(args.config)
    dyn = _dynamics(cfg)
    eps = _pick(cfg, "epsilon", 0.05)
    hyp = cfg.get("hypothesis", "alternative")
    try:
        dcfg = DetectorConfig.for_problem(dyn.n, dyn.s, eps, m=cfg.get("m"))
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    world_seed, det_seed = np.random.SeedSequence(_seed(args, cfg)).spawn(2)
    world = world_oracle(dyn, hyp, dcfg.m, np.random.default_rng(world_seed))
    verdict = detect(dcfg, dyn.n, world, np.random.default_rng(det_seed))
    out.write(verdict_to_json(verdict) + "\n")


def cmd_risk(args, out) -> None:
    if args.config is None:
        raise SpecError("risk needs --config pointing at a spec file")
    run_experiment_file(args.config, out, workers=args.threads, seed_override=args.seed,
                        trials_override=args.trials_override)


def cmd_figure3(args, out) -> None:
    cfg = _load_config(args.config)
    panel = args.panel or cfg.get("panel", "left")
    if panel not in ("left", "right"):
        raise SpecError(f"panel must be left or right, got {panel!r}")
    n_outer = args.trials_override or _pick(cfg, "n_outer", 100, int)
    kwargs = {}
    if "p_list" in cfg:
        kwargs["p_list"] = [float(p) for p in cfg["p_list"]]
    if "t_grid" in cfg:
        kwargs["t_grid"] = [float(t) for t in cfg["t_grid"]]
    seed = _seed(args, cfg)
    points = figure3_sweep(
        panel, sim_counts=(n_outer, _pick(cfg, "n_inner", 50_000, int)), seed=seed,
        n=_pick(cfg, "n", 5000, int), s=_pick(cfg, "s", 9, int), epsilon=_pick(cfg, "epsilon", 0.05), **kwargs,
    )
    sweep_to_csv(points, panel, seed, out)


def cmd_bounds(args, out) -> None:
    cfg = _load_config(args.config)
    if not cfg:
        inputs = default_bound_inputs()
    else:
        items = cfg if isinstance(cfg, list) else [cfg]
        try:
            inputs = [BoundInputs(**item) for item in items]
        except (TypeError, ValueError) as exc:
            raise SpecError(f"bad bound inputs: {exc}") from exc
    bounds_table_csv(bounds_table(inputs), out)


COMMANDS = {
    "simulate": (cmd_simulate, "dump a support trajectory as CSV"),
    "detect": (cmd_detect, "run the adaptive detector once and print the verdict as JSON"),
    "risk": (cmd_risk, "estimate risk for every spec in a JSON file, CSV out"),
    "figure3": (cmd_figure3, "sweep the non-adaptive risk lower bound, CSV out"),
    "bounds": (cmd_bounds, "evaluate the closed-form bounds, CSV out"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haystack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON config or spec file")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("--trials-override", type=int, help="replace every trial count")
        if name == "figure3":
            sp.add_argument("--panel", choices=("left", "right"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    out = None
    try:
        out = open(args.out, "w", newline="") if args.out else sys.stdout
        func(args, out)
    except SpecError as exc:
        print(f"haystack: config error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except Exception as exc:  # anything else is a run failure
        print(f"haystack: run failed: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        if out is not None and out is not sys.stdout:
            out.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
