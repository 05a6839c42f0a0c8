"""Command-line interface: ``postfixgp {run,resume,predict,report,show}``."""

import argparse
import math
import sys
from pathlib import Path

from postfixgp import _accel
from postfixgp.engine import GpParams, continue_run, predict_multi_step, predict_one_step, run
from postfixgp.errors import PostfixGPError
from postfixgp.evaluator import fitness_report, metrics
from postfixgp.genome import PrimitiveSet, render_infix
from postfixgp.io import (
    load_constants,
    load_dataset,
    load_functions,
    load_params,
    load_prediction_rows,
    load_state,
    population_log_block,
    read_stats_csv,
    save_state,
    write_plot_data,
    write_population_log,
    write_predictions,
    write_stats_csv,
)

STATS_FILE = "stats.csv"
LOG_FILE = "run.log"
SNAPSHOT_FILE = "final.snapshot"
PREDICTIONS_FILE = "predictions.csv"

PLOT_FILES = {
    "best_adjusted.dat": ("best_adj",),
    "archive_mean_adjusted.dat": ("archive_mean_adj",),
    "archive_mean_nodes.dat": ("archive_mean_nodes",),
    "combined.dat": ("best_adj", "archive_mean_adj", "archive_mean_nodes"),
}


def _fmt(v):
    return "undefined" if isinstance(v, float) and math.isnan(v) else f"{v:.6g}"


def solution_line(rank, g, state):
    rep = fitness_report(g, state.dataset, state.pset)
    return (
        f"#{rank} size={g.valid_length} adj={_fmt(rep.adjusted)} MAE={_fmt(rep.mae)} "
        f"NMSE={_fmt(rep.nmse)} r={_fmt(rep.r)}  y = {render_infix(g, state.pset)}"
    )


def _print_top(state, top):
    for i, g in enumerate(state.archive[:top]):
        print(solution_line(i, g, state))


def _build_params(args):
    data = load_params(args.params) if args.params else {}
    params = GpParams.from_dict(data)
    for name in ("seed", "generations", "population_size"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(params, name, value)
    # re-run validation after overrides
    return GpParams.from_dict(params.to_dict())


def _run_and_write(state_factory, out_dir, top):
    out_dir = Path(out_dir)
    blocks = []

    def log(state):
        blocks.append(population_log_block(state))

    state = state_factory(log)
    write_stats_csv(state.records, out_dir / STATS_FILE)
    write_population_log(state, out_dir / LOG_FILE, blocks[:-1])
    save_state(state, out_dir / SNAPSHOT_FILE)
    _print_top(state, top)
    return state


def cmd_run(args):
    dataset = load_dataset(args.data)
    binary, unary = load_functions(args.functions)
    constants = load_constants(args.constants) if args.constants else ()
    pset = PrimitiveSet(dataset.variable_names, constants, binary, unary)
    params = _build_params(args)
    _accel.set_threads(args.threads)
    _run_and_write(lambda cb: run(params, dataset, pset, callback=cb, threads=args.threads), args.out, args.top)
    return 0


def cmd_resume(args):
    state = load_state(args.snapshot)
    state.threads = args.threads
    _accel.set_threads(args.threads)
    target = args.generations if args.generations is not None else state.params.generations
    if target < state.generation:
        raise PostfixGPError(f"snapshot is already at generation {state.generation}, beyond {target}")

    def go(cb):
        cb(state)
        return continue_run(state, target, callback=cb)

    # earlier generations' log blocks live in the original run directory
    _run_and_write(go, args.out, args.top)
    return 0


def cmd_predict(args):
    state = load_state(args.snapshot)
    if not 0 <= args.solution < len(state.archive):
        raise PostfixGPError(f"--solution {args.solution}: archive holds {len(state.archive)} solution(s)")
    g = state.archive[args.solution]
    inputs, targets = load_prediction_rows(args.test, state.pset.variables)
    if args.mode == "one-step":
        preds = predict_one_step(g, inputs, state.pset)
        rows = inputs
        truncated = False
    else:
        if len(inputs) == 0:
            raise PostfixGPError(f"{args.test}: multi-step prediction needs a seed row")
        horizon = args.horizon if args.horizon is not None else len(inputs)
        preds, truncated = predict_multi_step(g, inputs[0], horizon, state.pset)
        rows = [inputs[0]] * len(preds)
        if targets is not None:
            targets = targets[: len(preds)] if len(targets) >= len(preds) else None
    out = Path(args.out) / PREDICTIONS_FILE
    write_predictions(out, state.pset.variables, rows, targets, preds)
    print(f"solution: {render_infix(g, state.pset)}")
    print(f"predictions: {len(preds)} -> {out}")
    if truncated:
        print("note: multi-step prediction stopped at a non-finite value", file=sys.stderr)
    if targets is not None and len(preds):
        m = metrics(preds, targets)
        print(f"MAE={_fmt(m.mae)} NMSE={_fmt(m.nmse)} r={_fmt(m.r)}")
    return 0


def cmd_report(args):
    rows = read_stats_csv(args.stats)
    out = Path(args.out)
    gens = [int(r["generation"]) for r in rows]
    for name, cols in PLOT_FILES.items():
        write_plot_data(out / name, ("generation",) + cols, [gens] + [[r[c] for r in rows] for c in cols])
    print(f"wrote {len(PLOT_FILES)} plot files ({len(rows)} generations) to {out}")
    return 0


def cmd_show(args):
    state = load_state(args.snapshot)
    if args.top > len(state.archive):
        print(f"note: archive holds {len(state.archive)} solution(s); showing all", file=sys.stderr)
    _print_top(state, args.top)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="postfixgp", description="Postfix genetic programming for symbolic regression.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evolve expressions on a training CSV")
    p.add_argument("--data", required=True, help="training CSV (header row, last column is the target)")
    p.add_argument("--functions", required=True, help="CSV of 'symbol,arity' lines")
    p.add_argument("--constants", help="one CSV line of constants")
    p.add_argument("--params", help="JSON parameter file")
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--population-size", type=int, dest="population_size")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--top", type=int, default=5, help="archive solutions to print")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a run from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--generations", type=int, help="total generation count to reach")
    p.add_argument("--out", default="run")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("predict", help="predict out-of-sample points with an archived solution")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--test", required=True, help="CSV of inputs, optionally with a target column")
    p.add_argument("--out", default="predict", help="output directory")
    p.add_argument("--mode", choices=("one-step", "multi-step"), default="one-step")
    p.add_argument("--horizon", type=int)
    p.add_argument("--solution", type=int, default=0, help="archive index (0 is the best)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="write plot data from a stats CSV")
    p.add_argument("--stats", required=True)
    p.add_argument("--out", default="report")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("show", help="print the best archived solutions")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_show)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "horizon", None) is not None and args.horizon < 1:
        parser.error("--horizon must be >= 1")
    if getattr(args, "top", 0) < 0:
        parser.error("--top must be >= 0")
    try:
        return args.func(args)
    except (PostfixGPError, OSError) as exc:
        print(f"postfixgp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
