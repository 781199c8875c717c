"""Benchmark command line: desk-scale experiments with plot-ready CSV
outputs and rendered figures.

Subcommands
-----------
ap-bench
    Single-robot AP localization shoot-out (multi-level search at 1..K
    levels vs dense/sparse single-level grids vs gradient ascent).
simulate
    Multi-robot trials with per-iteration metrics, optional sweeps over
    noise, robot count, or hierarchy levels, and final field dumps.
rendezvous
    Consensus task driven purely by the estimated relative positions.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
Timing columns are zero unless --perf is given, keeping default outputs
byte-identical across reruns with the same seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots, report
from .bench import run_ap_bench
from .config import (
    ConfigInvalid,
    SimConfig,
    SimOptions,
    apply_overrides,
    default_config,
    load_config,
)
from .runtime import run_trial, summarize_trial
from .search import HierarchyConfig

SWEEP_AXES = ("noise", "robots", "levels")


def _parse_world(text: str) -> tuple[float, float]:
    try:
        w, h = text.lower().split("x")
        return float(w), float(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected WxH, e.g. 3.2x2") from exc


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None, help="YAML config file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--robots", type=int, default=None, help="robot count override")
    parser.add_argument("--world", type=_parse_world, default=None, metavar="WxH",
                        help="workspace size override, e.g. 6x5")
    parser.add_argument("--trials", type=int, default=None, help="trial count override")
    parser.add_argument("--iters", type=int, default=None, help="iterations per trial override")
    parser.add_argument("--perf", action="store_true",
                        help="record wall times into the CSVs (non-reproducible bytes)")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rssiloc", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("ap-bench", help="AP search method comparison")
    _add_common(p_bench)
    p_bench.add_argument("--samples", type=int, default=50, help="training samples per field")
    p_bench.add_argument("--repeats", type=int, default=1, help="timing repeats per method")

    p_sim = sub.add_parser("simulate", help="multi-robot localization trials")
    _add_common(p_sim)
    p_sim.add_argument("--sweep", nargs=2, metavar=("AXIS", "VALUES"), default=None,
                       help=f"sweep one axis ({'|'.join(SWEEP_AXES)}) over comma-separated values")

    p_rdv = sub.add_parser("rendezvous", help="consensus rendezvous task")
    _add_common(p_rdv)
    return parser


def _load(args, controller_type: str = "walk") -> SimConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = default_config(controller_type=controller_type)
    config = apply_overrides(
        config,
        seed=args.seed,
        robots=args.robots,
        world_size=args.world,
        trials=args.trials,
        iterations=args.iters,
        controller_type=controller_type if args.config is None else None,
    )
    if controller_type == "rendezvous":
        config = replace(config, controller=replace(config.controller, type="rendezvous"))
    return config


def _run_trials(config: SimConfig, options: SimOptions):
    results = [run_trial(config, trial, options) for trial in range(config.run.trials)]
    summaries = [summarize_trial(r, config) for r in results]
    return results, summaries


def _sweep_config(config: SimConfig, axis: str, token: str) -> SimConfig:
    if axis == "noise":
        return replace(config, channel=replace(config.channel, shadow_sigma=float(token)))
    if axis == "robots":
        return apply_overrides(config, robots=int(token))
    if axis == "levels":
        k = int(token)
        if not 1 <= k <= config.hierarchy.levels:
            raise ConfigInvalid("sweep.levels", f"must be in 1..{config.hierarchy.levels}")
        return replace(
            config,
            hierarchy=HierarchyConfig(
                resolutions=config.hierarchy.resolutions[:k],
                grid_points=config.hierarchy.grid_points,
            ),
        )
    raise ConfigInvalid("sweep.axis", f"must be one of {SWEEP_AXES}")


def cmd_ap_bench(args) -> int:
    config = _load(args)
    seeds = list(range(config.run.trials))
    rows = run_ap_bench(
        seeds,
        n_samples=args.samples,
        width=config.world.width,
        height=config.world.height,
        channel=config.channel,
        hierarchy=config.hierarchy,
        repeats=args.repeats,
    )
    if not args.perf:
        rows = [{**row, "train_ms": 0.0, "infer_ms": 0.0} for row in rows]
    out = Path(args.out)
    report.write_apbench_csv(rows, out / "summary.csv")
    if not args.no_plots:
        plots.plot_ap_bench(rows, out / "fig_ap_bench.png")
    by_method: dict[str, list[float]] = {}
    for row in rows:
        by_method.setdefault(row["method"], []).append(row["ale_m"])
    for method, ales in by_method.items():
        print(f"{method}: mean ALE {np.mean(ales):.4f} m over {len(ales)} seeds")
    print(f"wrote {out / 'summary.csv'}")
    return 0


def _write_sim_outputs(out: Path, results, summaries, config, options, args,
                       summary_columns, rendezvous: bool):
    records = [r for result in results for r in result.records]
    trajectories = [t for result in results for t in result.trajectories]
    report.write_metrics_csv(records, out / "metrics.csv")
    report.write_trajectories_csv(trajectories, out / "trajectories.csv")
    report.write_summary_csv(summaries, summary_columns, out / "summary.csv")
    dump_paths = report.write_field_dumps(results[-1], config.hierarchy, out)
    if not args.no_plots:
        plots.plot_error_curves(records, out / "fig_errors.png")
        last = results[-1]
        plots.plot_trajectories(
            last.trajectories,
            (config.world.width, config.world.height),
            last.world.config.ap_position,
            out / "fig_trajectories.png",
            epsilon=config.controller.rendezvous_epsilon_m if rendezvous else None,
        )
        if rendezvous:
            plots.plot_pairwise_distance(
                {r.trial: r.pairwise_max for r in results},
                config.controller.rendezvous_epsilon_m,
                out / "fig_pairwise.png",
            )
        finest = None
        for rid in sorted(last.agents):
            agent = last.agents[rid]
            if agent.model is not None and agent.ap_estimate is not None:
                finest = rid
                break
        if finest is not None and dump_paths:
            level = config.hierarchy.levels
            rows = np.loadtxt(out / f"field_lvl{level}_robot{finest}.csv", delimiter=",", skiprows=1)
            plots.plot_field(
                rows,
                last.world.true_ap_local(finest),
                last.agents[finest].ap_estimate.position,
                out / f"fig_field_robot{finest}.png",
            )


def cmd_simulate(args) -> int:
    config = _load(args)
    options = SimOptions(perf=args.perf)
    out = Path(args.out)
    if args.sweep is not None:
        axis, tokens = args.sweep[0], [t for t in args.sweep[1].split(",") if t]
        if axis not in SWEEP_AXES:
            raise ConfigInvalid("sweep.axis", f"must be one of {SWEEP_AXES}")
        if not tokens:
            raise ConfigInvalid("sweep.values", "must be non-empty")
        sweep_rows = []
        for token in tokens:
            sub_config = _sweep_config(config, axis, token)
            results, summaries = _run_trials(sub_config, options)
            sub_out = out / f"{axis}_{token}"
            _write_sim_outputs(sub_out, results, summaries, sub_config, options, args,
                               report.SUMMARY_COLUMNS_SIMULATE, rendezvous=False)
            sweep_rows.append(report.aggregate_sweep_row(axis, token, summaries))
            print(f"{axis}={token}: rmse {sweep_rows[-1]['rmse_mean_m']:.4f} m "
                  f"over {len(summaries)} trials")
        report.write_summary_csv(sweep_rows, report.SUMMARY_COLUMNS_SWEEP, out / "summary.csv")
        if not args.no_plots:
            plots.plot_sweep(sweep_rows, out / "fig_sweep.png")
        print(f"wrote {out / 'summary.csv'}")
        return 0
    results, summaries = _run_trials(config, options)
    _write_sim_outputs(out, results, summaries, config, options, args,
                       report.SUMMARY_COLUMNS_SIMULATE, rendezvous=False)
    rmse = np.array([s["rmse_mean_m"] for s in summaries], dtype=float)
    finite = rmse[np.isfinite(rmse)]
    if finite.size:
        print(f"relative RMSE: {finite.mean():.4f} +/- {finite.std():.4f} m "
              f"over {len(summaries)} trials")
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def cmd_rendezvous(args) -> int:
    config = _load(args, controller_type="rendezvous")
    options = SimOptions(perf=args.perf)
    out = Path(args.out)
    results, summaries = _run_trials(config, options)
    _write_sim_outputs(out, results, summaries, config, options, args,
                       report.SUMMARY_COLUMNS_RENDEZVOUS, rendezvous=True)
    successes = 0
    for summary in summaries:
        status = "success" if summary["success"] else "failure"
        successes += summary["success"]
        when = summary["time_to_converge_iter"]
        when_text = f"converged at iter {when}" if when >= 0 else "never within epsilon"
        print(f"trial {summary['trial']}: {status}, {when_text}, "
              f"final max pairwise {summary['max_pairwise_final_m']:.3f} m")
    print(f"{successes}/{len(summaries)} trials reached epsilon = "
          f"{config.controller.rendezvous_epsilon_m} m")
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"ap-bench": cmd_ap_bench, "simulate": cmd_simulate, "rendezvous": cmd_rendezvous}
    try:
        return handlers[args.command](args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
