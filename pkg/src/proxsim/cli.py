"""Operator entry point: batch trials, omega sweeps, scene generation, serving.

    proxsim run scenario.yaml --walker --seed 7 --out results/
    proxsim sweep --omegas 0:1:0.25 --conditions 0,1,2,3,4 --blocks 10 --seed 1 --out sweep/
    proxsim gen --n 10 --distractors 3 --seed 1 --out scenes/
    proxsim serve --scenario scenario.yaml --port 8000

Every subcommand is deterministic given its flags (serve excepted: it
consumes live input). Errors exit nonzero with a single-line message.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .geometry import Arena, SimConfig
from .harness import (
    TrialSpec,
    derive_seed,
    generate_trial,
    replay_trace,
    run_sweep,
    run_trial,
    two_phase_sweep,
)
from .persistence import (
    Scenario,
    ScenarioError,
    TraceError,
    load_scenario,
    load_trace,
    save_scenario,
    write_results,
)
from .walker import WalkerParams


class CliError(Exception):
    pass


def _parse_omegas(text: str) -> list[float]:
    """Either a comma list ("0,0.25") or an inclusive grid ("start:end:step")."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"bad omega grid {text!r}, expected start:end:step")
        start, end, step = (float(p) for p in parts)
        if step <= 0 or end < start:
            raise CliError(f"bad omega grid {text!r}")
        values = []
        k = 0
        while True:
            v = round(start + k * step, 9)
            if v > end + 1e-12:
                break
            values.append(min(v, end))
            k += 1
        return values
    return [float(p) for p in text.split(",") if p.strip()]


def _parse_conditions(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _spec_from_scenario(scenario: Scenario, seed: int) -> TrialSpec:
    target = scenario.target()
    vois = (target, *(v for v in scenario.vois if v.id != target.id))
    return TrialSpec(
        seed=seed,
        n_distractors=len(vois) - 1,
        vois=vois,
        user_start=scenario.start_pose(),
    )


def _result_line(result) -> str:
    payload = dataclasses.asdict(result)
    payload["min_user_proxy_clearance"] = (
        None
        if payload["min_user_proxy_clearance"] == float("inf")
        else payload["min_user_proxy_clearance"]
    )
    return json.dumps(payload)


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    config = scenario.build_config()
    if args.trace is not None:
        trace = load_trace(args.trace)
        if trace.meta.scenario is not None:
            result, _ = replay_trace(trace)
        else:
            spec = _spec_from_scenario(scenario, args.seed)
            result = run_trial(spec, trace, config, scenario.arena,
                               record_path=_trace_out(args))
    else:
        spec = _spec_from_scenario(scenario, args.seed)
        params = scenario.walker if scenario.walker is not None else WalkerParams()
        result = run_trial(spec, params, config, scenario.arena,
                           record_path=_trace_out(args))
    print(_result_line(result))
    return 0


def _trace_out(args: argparse.Namespace) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / "trial.jsonl"


def cmd_sweep(args: argparse.Namespace) -> int:
    conditions = _parse_conditions(args.conditions)
    config = SimConfig()
    if args.scenario is not None:
        config = load_scenario(args.scenario).build_config()
    kwargs = dict(
        target_prior=args.target_prior,
        jobs=args.jobs,
    )
    if args.omegas == "two-phase":
        sweep = two_phase_sweep(conditions, args.blocks, args.seed, config, **kwargs)
    else:
        omegas = _parse_omegas(args.omegas)
        if not omegas:
            raise CliError("empty omega grid")
        sweep = run_sweep(omegas, conditions, args.blocks, args.seed, config, **kwargs)
    if args.out is not None:
        summary_path, trials_path = write_results(sweep, args.out)
        print(f"wrote {summary_path} and {trials_path}")
    overall = sweep.fitted_omega()
    print(f"fitted omega (mean success across conditions): {overall:g} "
          f"(mean success {sweep.mean_success(overall):.3f})")
    for condition in conditions:
        best = sweep.fitted_omega(condition)
        rate, hw = sweep.success_ci(best, condition)
        print(f"condition {condition}: argmax omega {best:g} "
              f"success {rate:.3f} +/- {hw:.3f}")
    curve = sweep.detection_failure_curve()
    if curve:
        print("success rate by detection-time bin (s):")
        for entry in curve:
            label = entry["detection_bin"]
            label = "none" if label == "none" else f"{label:>4.0f}+"
            print(f"  {label}: {entry['success_rate']:.3f} (n={entry['n']})")
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    arena = Arena()
    for i in range(args.n):
        spec = generate_trial(derive_seed(args.seed, "gen", i), args.distractors, arena)
        scenario = Scenario(
            arena=arena,
            vois=spec.vois,
            user_start=spec.user_start,
            target_id=spec.vois[0].id,
        )
        save_scenario(scenario, out / f"scene-{i:03d}.yaml")
    print(f"wrote {args.n} scenario files to {out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    scenario = load_scenario(args.scenario) if args.scenario else Scenario()
    static_dir = args.static
    if static_dir is None:
        default_static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = default_static if default_static.is_dir() else None
    app = create_app(scenario, static_dir=static_dir)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as e:  # uvicorn wraps bind failures
        raise CliError(f"server failed to start on port {args.port}") from e
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one trial from a scenario file")
    p.add_argument("scenario", help="scenario YAML path")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--walker", action="store_true", default=True,
                       help="drive the user with the synthetic walker (default)")
    group.add_argument("--trace", default=None, help="replay a recorded trace instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="directory for the frame trace")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="full factorial omega sweep")
    p.add_argument("--omegas", default="two-phase",
                   help='"start:end:step", comma list, or "two-phase" (default)')
    p.add_argument("--conditions", default="0,1,2,3,4")
    p.add_argument("--blocks", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", default=None, help="scenario supplying config overrides")
    p.add_argument("--target-prior", type=float, default=None,
                   help="prior on the target; distractors split the rest")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="directory for summary.csv / trials.csv")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("gen", help="generate random scenario files")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--distractors", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("serve", help="start the live service")
    p.add_argument("--scenario", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default=None, help="UI asset directory")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ScenarioError, TraceError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e.filename or e}: file not found", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
