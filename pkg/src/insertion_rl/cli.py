"""Command-line entry point.

Subcommands: train, eval, demo-collect, bench, plot. Experiment cells
are described either by a JSON config file (--config) or by the
individual flags; flags override the file, and --seed overrides both.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from .bench import Algo, ExperimentSpec, Method, Perturbation, evaluate, restore_agent, train
from .env import ObservationMode
from .persist import load_run, save_demos


def _spec_from_args(args) -> ExperimentSpec:
    d = {}
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        if "experiment" in loaded:
            loaded = loaded["experiment"]
        d.update(loaded)
    for key in (
        "profile", "method", "algo", "obs_mode", "reward_mode",
        "perturbation", "episodes", "n_demos", "eval_episodes",
    ):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    if args.seed is not None:
        d["seed"] = args.seed
    return ExperimentSpec(**d)


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with experiment fields")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--profile", choices=sorted(bench_mod.PROFILES))
    p.add_argument("--method", choices=[m.value for m in Method])
    p.add_argument("--algo", choices=[a.value for a in Algo])
    p.add_argument("--obs-mode", dest="obs_mode",
                   choices=[m.value for m in ObservationMode])
    p.add_argument("--reward-mode", dest="reward_mode",
                   choices=list(bench_mod.REWARD_MODES))
    p.add_argument("--perturbation", choices=[p_.value for p_ in Perturbation])
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--n-demos", dest="n_demos", type=int, default=None)
    p.add_argument("--eval-episodes", dest="eval_episodes", type=int, default=None)


def _cmd_train(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out) if args.out else Path("runs") / spec.cell_name
    result = train(spec, out)
    ev = evaluate(result.agent, spec)
    print(f"cell: {spec.cell_name}")
    print(f"run dir: {out}")
    print(f"episodes: {spec.episodes}  steps: {result.total_steps}")
    first = result.first_success_episode
    print(f"first training success: {'none' if first is None else f'episode {first}'}")
    print(f"eval success rate: {ev.success_rate:.2f}")
    print(f"eval mean final distance: {ev.mean_final_distance * 1e3:.3f} mm")
    return 0


def _cmd_eval(args) -> int:
    data = load_run(args.run)
    spec = ExperimentSpec.from_json(data.config["experiment"])
    if args.seed is not None:
        spec.seed = args.seed
    n = args.episodes
    agent = None if args.hand_only else restore_agent(spec, data.networks, data.extra)
    ev = evaluate(agent, spec, n)
    label = "hand controller" if args.hand_only else f"{spec.algo.value} policy"
    print(f"cell: {spec.cell_name} ({label})")
    print(f"success rate: {ev.success_rate:.2f}")
    print(f"mean final distance: {ev.mean_final_distance * 1e3:.3f} mm")
    print(f"bound-hit rate: {ev.bound_hit_rate:.2f}")
    return 0


def _cmd_demo_collect(args) -> int:
    spec = _spec_from_args(args)
    observe_fn = bench_mod.make_observer(spec)
    transitions = bench_mod.collect_demos(spec, observe_fn)
    out = Path(args.out) if args.out else Path("demos.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_demos(out, transitions)
    print(f"wrote {len(transitions)} transitions "
          f"({spec.n_demos} episodes) to {out}")
    return 0


def _cmd_bench(args) -> int:
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        specs = [ExperimentSpec.from_json(d) for d in loaded]
        if args.seed is not None:
            for s in specs:
                s.seed = args.seed
    else:
        specs = bench_mod.default_grid(
            seed=args.seed if args.seed is not None else 0,
            episodes=args.episodes,
        )
    out = Path(args.out) if args.out else Path("runs") / "grid"
    rows = bench_mod.run_grid(specs, out)
    width = max(len(r["cell"]) for r in rows)
    for r in rows:
        if r["error"]:
            print(f"{r['cell']:<{width}}  FAILED  {r['error']}")
        else:
            print(
                f"{r['cell']:<{width}}  success {r['success_rate']:.2f}  "
                f"dist {r['mean_final_distance_m'] * 1e3:.3f} mm"
            )
    print(f"table: {out / 'table.csv'}")
    return 0


def _cmd_plot(args) -> int:
    from . import plots

    out = Path(args.out) if args.out else Path("figure.svg")
    if args.kind == "bars":
        if not args.table:
            print("plot --kind bars needs --table", file=sys.stderr)
            return 2
        plots.success_bars_from_table(args.table, out)
    else:
        if not args.metrics:
            print("plot --kind curves needs --metrics", file=sys.stderr)
            return 2
        labels = args.labels or [f"run{i}" for i in range(len(args.metrics))]
        if len(labels) != len(args.metrics):
            print("--labels must match --metrics", file=sys.stderr)
            return 2
        runs = {
            label: [Path(p) for p in entry.split(",")]
            for label, entry in zip(labels, args.metrics)
        }
        plots.plot_learning_curves(runs, out, column=args.column)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="insertion-rl",
        description="Connector-insertion simulator and RL toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one experiment cell")
    _add_spec_flags(p)
    p.add_argument("--out", help="run directory (default runs/<cell>)")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved run")
    p.add_argument("--run", required=True, help="run directory to load")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hand-only", action="store_true",
                   help="evaluate the hand controller without the policy")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("demo-collect", help="collect scripted demonstrations")
    _add_spec_flags(p)
    p.add_argument("--out", help="output JSON-lines file")
    p.set_defaults(fn=_cmd_demo_collect)

    p = sub.add_parser("bench", help="run a grid of experiment cells")
    p.add_argument("--config", help="JSON list of experiment specs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--out", help="grid output directory")
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("plot", help="render figures from run files")
    p.add_argument("--kind", choices=("curves", "bars"), default="curves")
    p.add_argument("--metrics", nargs="+",
                   help="metrics.csv per label; comma-join paths for a band")
    p.add_argument("--labels", nargs="+")
    p.add_argument("--table", help="grid table.csv (for --kind bars)")
    p.add_argument("--column", default="final_distance_m")
    p.add_argument("--out", help="output figure path")
    p.set_defaults(fn=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
