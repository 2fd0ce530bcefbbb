"""
Command line interface for wayshape.

    wayshape run      --config FILE [--seed N ...] [--out DIR] [--provider P] [--formulation F] [--steps N]
    wayshape ablate   --config FILE ...
    wayshape moka     --config FILE ...
    wayshape label    --config FILE --episode IN.jsonl [--output OUT.jsonl]
    wayshape plot     --curves curves.csv [--out DIR]
    wayshape serve-mock [--host H] [--port P]

Exit codes: 0 success, 1 invalid config, 2 runtime failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.config import Config
from core.models import ConfigError, ExperimentConfig, load_config

logger = logging.getLogger("wayshape")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config file (key = value)")
    parser.add_argument("--seed", type=int, action="append", help="seed to run; repeat for several")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--provider", choices=["oracle", "file", "remote"], help="waypoint provider")
    parser.add_argument("--formulation", choices=["dense_only", "sparse_only", "combined"], help="reward formulation")
    parser.add_argument("--steps", type=int, help="online step budget of the standard regime")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wayshape", description="VLM-waypoint dense reward shaping experiments")
    parser.add_argument("--log-level", default=Config.LOG_LEVEL, help="logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_experiment_flags(sub.add_parser("run", help="run one experiment for every seed"))
    _add_experiment_flags(sub.add_parser("ablate", help="formulation x demo regime ablation suite"))
    moka = sub.add_parser("moka", help="open-loop executor vs fine-tuned policy")
    _add_experiment_flags(moka)
    moka.add_argument("--trials", type=int, help="trials per method")

    label = sub.add_parser("label", help="label an external episode log")
    _add_experiment_flags(label)
    label.add_argument("--episode", required=True, help="episode log (JSON Lines)")
    label.add_argument("--output", help="labeled log path (default: <episode>.labeled.jsonl)")

    plot = sub.add_parser("plot", help="plot learning curves from a curves CSV")
    plot.add_argument("--curves", required=True, help="curves.csv written by run or ablate")
    plot.add_argument("--out", help="plot directory (default: next to the curves file)")

    serve = sub.add_parser("serve-mock", help="serve the mock chat-completions endpoint")
    serve.add_argument("--host", default=Config.MOCK_HOST)
    serve.add_argument("--port", type=int, default=Config.MOCK_PORT)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides: Dict[str, Any] = {
        "seeds": args.seed,
        "out_dir": args.out,
        "provider": args.provider,
        "formulation": args.formulation,
        "online_steps": args.steps,
    }
    return load_config(args.config, overrides)


def _print_table(table) -> None:
    print(table.to_frame().to_string(index=False))


def cmd_run(args: argparse.Namespace) -> int:
    from core.experiment import run_experiment
    result = run_experiment(config_from_args(args))
    _print_table(result.table)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    from core.experiment import ablation_suite
    result = ablation_suite(config_from_args(args))
    _print_table(result.table)
    return EXIT_OK


def cmd_moka(args: argparse.Namespace) -> int:
    from core.experiment import moka_comparison
    _print_table(moka_comparison(config_from_args(args), trials=args.trials))
    return EXIT_OK


def cmd_label(args: argparse.Namespace) -> int:
    from core.experiment import label_episode_log
    episode = Path(args.episode)
    output = args.output or str(episode.with_name(episode.stem + ".labeled.jsonl"))
    labels = label_episode_log(config_from_args(args), str(episode), output)
    print(json.dumps({"frames": len(labels), "output": output}))
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    from core.type_adapters import read_curves_csv
    from utils.plotting import emit_plots
    curves = Path(args.curves)
    written = emit_plots(read_curves_csv(curves), args.out or curves.parent / "plots")
    for path in written:
        print(path)
    return EXIT_OK


def cmd_serve_mock(args: argparse.Namespace) -> int:
    import uvicorn
    uvicorn.run("app:app", host=args.host, port=args.port)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "ablate": cmd_ablate,
    "moka": cmd_moka,
    "label": cmd_label,
    "plot": cmd_plot,
    "serve-mock": cmd_serve_mock,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
