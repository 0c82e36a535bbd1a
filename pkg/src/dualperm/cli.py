"""
Command-line interface.

    dualperm <verb> [--config run.cfg] [--seed N] [--out DIR] [--threads N] [--deterministic]

Verbs:
    reference, num, sbm, frm, pinn, hybrid   run one methodology
    sweep                                    multi-seed comparison report
    dataset                                  label the surrogate grids
    train-surrogate                          fit the emulator on a dataset

Exit codes: 0 success, 1 run failure, 2 configuration error, 130 cancelled.
"""

import argparse
import sys
from typing import Dict, List, Optional

from dualperm.config.run_schemas import METHODS, RunConfig, load_run_config, parse_run_config
from dualperm.main import run_dataset, run_pipeline, run_sweep, run_train_surrogate
from dualperm.utils.exceptions import CancellationError, DualPermError, RunConfigError
from dualperm.utils.logger import clear_correlation_ids, configure_logging, get_logger

logger = get_logger(__name__)

UTILITY_VERBS = ("sweep", "dataset", "train-surrogate")
VERBS = (*METHODS, *UTILITY_VERBS)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CANCELLED = 130


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualperm",
        description="Dual-scale permeability prediction for fibrous porous media.",
    )
    parser.add_argument("verb", choices=VERBS, help="Methodology or utility to run")
    parser.add_argument("--config", default=None, help="Run file (dotted key = value, or .json)")
    parser.add_argument("--seed", type=int, default=None, help="Run a single seed instead of config.seeds")
    parser.add_argument("--out", default=None, help="Base output directory")
    parser.add_argument("--threads", type=int, default=None, help="torch intra-op threads")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        help="Single thread, deterministic kernels, null wall-clock fields",
    )
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Build the RunConfig of a CLI invocation.

    Method verbs force config.method; utility verbs keep the file's method
    and fall back to "num" when it has none.
    """
    overrides: Dict[str, object] = {}
    defaults: Dict[str, object] = {}
    if args.verb in METHODS:
        overrides["method"] = args.verb
    else:
        defaults["method"] = "num"
    if args.seed is not None:
        overrides["seeds"] = [args.seed]

    if args.config:
        return load_run_config(args.config, overrides=overrides, defaults=defaults)
    return parse_run_config({**defaults, **overrides})


def dispatch(args: argparse.Namespace, config: RunConfig) -> None:
    common = dict(out=args.out, progress_callback=_print_progress)
    if args.verb == "sweep":
        report = run_sweep(config, deterministic=args.deterministic, threads=args.threads, **common)
        for row in report.rows:
            print(f"{row.method}\t{row.parameter}\tMV={row.mv}\tSD={row.sd}\tCV={row.cv}")
    elif args.verb == "dataset":
        dataset = run_dataset(config, seed=args.seed, **common)
        print(f"dataset rows: {len(dataset)}")
    elif args.verb == "train-surrogate":
        model = run_train_surrogate(config, **common)
        print(f"emulator degree {model.degree}, holdout median error {model.holdout_median_error}")
    else:
        result = run_pipeline(config, deterministic=args.deterministic, threads=args.threads, **common)
        for row, run_dir in zip(result["rows"], result["run_dirs"]):
            print(f"{row.method}\tseed={row.seed}\tK={row.value}\t{run_dir}")


def _print_progress(phase: str, message: str) -> None:
    print(f"[{phase}] {message}", file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)

    try:
        config = resolve_config(args)
        dispatch(args, config)
    except RunConfigError as e:
        logger.error("Configuration error", extra={"extra_fields": {"error": str(e)}})
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CancellationError as e:
        print(f"cancelled: {e}", file=sys.stderr)
        return EXIT_CANCELLED
    except (RuntimeError, DualPermError) as e:
        cause = e.__cause__ if isinstance(e.__cause__, DualPermError) else e
        if isinstance(cause, RunConfigError):
            print(f"configuration error: {cause}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_FAILURE
    finally:
        clear_correlation_ids()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
