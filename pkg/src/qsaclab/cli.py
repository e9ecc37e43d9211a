"""Command-line entry points: train, grid, aggregate, plot.

Agent names map onto policy backends: ``sac`` is the classical baseline,
``qsac-vanilla`` and ``qsac-reuploading`` are the hybrid circuit policies.
A flat key=value config file may seed any agent field; explicit flags
override file values, and the fully resolved configuration is persisted
next to every run.  The QSAC_WORKERS environment variable caps how many
runs execute concurrently.
"""

from __future__ import annotations

import argparse
import sys

from . import exp
from .sac import AgentConfig

AGENT_NAMES = {
    "sac": "classical",
    "qsac-vanilla": "vanilla-vqc",
    "qsac-reuploading": "reuploading-vqc",
}


def _add_agent_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--agent", choices=sorted(AGENT_NAMES), default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--policy-lr", type=float, default=None)
    p.add_argument("--critic-lr", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--config", default=None, help="key=value file with agent fields")
    p.add_argument("--grad-method", choices=("adjoint", "shift"), default=None)


def _resolve_agent(args) -> AgentConfig:
    values = exp.parse_key_value_file(args.config) if args.config else {}
    flag_map = {
        "policy_kind": AGENT_NAMES[args.agent] if args.agent else None,
        "n_layers": args.layers,
        "policy_lr": args.policy_lr,
        "critic_lr": args.critic_lr,
        "total_steps": args.steps,
        "grad_method": args.grad_method,
    }
    for key, value in flag_map.items():
        if value is not None:
            values[key] = str(value)
    cfg = exp.agent_config_from_strings(values)
    cfg.validate()
    return cfg


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qsaclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training seed")
    _add_agent_flags(p_train)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--label", default="")

    p_grid = sub.add_parser("grid", help="step-size grid search")
    _add_agent_flags(p_grid)
    p_grid.add_argument("--lrs", default=",".join(str(x) for x in exp.DEFAULT_LR_GRID))
    p_grid.add_argument("--seeds", default="0,1,2")
    p_grid.add_argument("--out", required=True)

    p_agg = sub.add_parser("aggregate", help="combine run CSVs into a curve summary")
    p_agg.add_argument("--runs", nargs="+", required=True)
    p_agg.add_argument("--out", required=True)

    p_plot = sub.add_parser("plot", help="render summaries as an SVG chart")
    p_plot.add_argument("--summaries", nargs="+", required=True)
    p_plot.add_argument("--labels", required=True, help="comma-separated, one per summary")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--smooth", type=float, default=exp.DEFAULT_SMOOTH_WEIGHT)

    args = parser.parse_args(argv)

    if args.command == "train":
        rc = exp.RunConfig(_resolve_agent(args), args.seed, args.out, args.label)
        records, csv_path, meta_path = exp.run_experiment(rc)
        tail = exp.trailing_mean(records) if len(records) >= 10 else float("nan")
        print(f"wrote {csv_path} and {meta_path} ({len(records)} episodes, trailing mean {tail:.1f})")
    elif args.command == "grid":
        best, rows = exp.grid_search(
            _resolve_agent(args), _parse_floats(args.lrs), _parse_ints(args.seeds), args.out
        )
        for lr, mean, stderr, status in rows:
            print(f"lr={lr:g} mean={mean:.1f} stderr={stderr:.1f} [{status}]")
        print(f"best policy_lr: {best:g}")
    elif args.command == "aggregate":
        summary = exp.aggregate_runs(args.runs, args.out)
        print(f"wrote {args.out} ({summary.n_runs} runs, {len(summary.episode)} episodes)")
    elif args.command == "plot":
        labels = [x for x in args.labels.split(",") if x]
        summaries = [exp.load_summary_csv(p) for p in args.summaries]
        exp.plot_svg(summaries, labels, args.out, args.smooth)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
