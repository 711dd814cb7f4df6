"""Command-line entry point.

    kgcm <subcommand> --config <path> [--set key=value ...] --out <dir>

Subcommands: make-data, ingest, treatment, synth, train, eval, benchmark,
ablate, lag-sweep, plot.  Exit codes: 0 success, 1 config error, 2 data
error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, TrainingDiverged


class _Parser(argparse.ArgumentParser):
    def error(self, message):   # bad usage is a config error (exit 1), not argparse's 2
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="kgcm", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="config file (flat key = value lines)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("--out", required=True, help="run/output directory")

    for name, desc in (
        ("make-data", "generate a deterministic demo dataset (<out>/data.csv)"),
        ("ingest", "load, split, and standardize the input series"),
        ("treatment", "generate the velocity-modulated treatment signal"),
        ("synth", "generate synthetic counterfactual outcomes"),
        ("train", "train the configured model on the prepared run directory"),
        ("eval", "evaluate the trained checkpoint on the configured split"),
        ("benchmark", "train and score the main model plus all baselines"),
        ("ablate", "2x2 ablation grid: MMD on/off x adjacency on/off"),
        ("lag-sweep", "full pipeline per treatment lag"),
        ("plot", "emit static figures from finished run directories"),
    ):
        sub.add_parser(name, parents=[common], help=desc)
    return parser


def _parse_plot_runs(cfg: ExperimentConfig) -> list[tuple[str, Path]]:
    spec = cfg["plot.runs"].strip()
    if not spec:
        return []
    runs = []
    for item in spec.split(","):
        if "=" not in item:
            raise ConfigError(f"plot.runs entries must be scenario=dir, got {item!r}")
        scenario, run_dir = item.split("=", 1)
        runs.append((scenario.strip(), Path(run_dir.strip())))
    return runs


def _dispatch(args: argparse.Namespace) -> None:
    from . import experiment
    from .demo import make_demo_frame
    from .plots import emit_plots

    cfg = load_config(args.config, args.set)
    out = Path(args.out)
    cmd = args.command

    if cmd == "make-data":
        out.mkdir(parents=True, exist_ok=True)
        frame = make_demo_frame(cfg["demo.days"], cfg["demo.seed"])
        frame.to_csv(out / "data.csv")
        print(f"wrote {out / 'data.csv'} ({len(frame)} days)")
    elif cmd == "ingest":
        experiment.cmd_ingest(cfg, out)
        print(f"wrote prepared splits under {out / 'prepared'}")
    elif cmd == "treatment":
        experiment.cmd_treatment(cfg, out)
        print(f"wrote treatment series under {out / 'treatment'}")
    elif cmd == "synth":
        experiment.cmd_synth(cfg, out)
        print(f"wrote counterfactual outcomes under {out / 'counterfactual'}")
    elif cmd == "train":
        result = experiment.run_train(cfg, out)
        print(f"trained {cfg['train.model']}: best epoch {result.best_epoch}, "
              f"best val MSE {result.best_val_mse:.6g} "
              f"({result.n_epochs} epochs run)")
    elif cmd == "eval":
        report = experiment.run_eval(cfg, out)
        line = f"eval[{cfg['eval.split']}]: rmse={report.rmse:.6g}"
        if report.pehe is not None:
            line += f" pehe={report.pehe:.6g} pehe_zero={report.pehe_zero:.6g}"
        line += f" latent_mmd2={report.latent_mmd2:.6g}"
        print(line)
    elif cmd == "benchmark":
        table = experiment.run_benchmark(cfg, out)
        print(table.to_json())
    elif cmd == "ablate":
        table = experiment.run_ablation(cfg, out)
        print(table.to_json())
    elif cmd == "lag-sweep":
        table = experiment.run_lag_sweep(cfg, out_dir=out)
        print(table.to_json())
    elif cmd == "plot":
        made = emit_plots(_parse_plot_runs(cfg), out)
        for path in made:
            print(f"wrote {path}")
    else:   # pragma: no cover - argparse enforces the choices
        raise ConfigError(f"unknown command {cmd!r}")


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        _dispatch(args)
    except ConfigError as exc:
        print(f"kgcm: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"kgcm: data error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"kgcm: training diverged: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
