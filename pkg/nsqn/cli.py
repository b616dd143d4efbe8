"""
Command-line entry point: `nsqn run | compare | grad-check | oracle-check | cost | serve`.

Exit status: 0 on success, 1 when a check fails or a run ends on a numeric
error, 2 on bad configuration or unreadable data.
"""
import argparse
import logging
import os
import sys
from pathlib import Path

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

from pydantic import ValidationError

from nsqn.config import OPTIMIZERS, ConfigError, parse_config
from nsqn.cost_model import cost_table, format_cost_table
from nsqn.experiment import TerminationReason, best_optimizer, compare, run_experiment
from nsqn.idx_format import IdxConsistencyError, IdxFormatError
from nsqn.numkit import DimensionError, ParameterError
from nsqn.verify import all_passed, corrupted_backward, run_grad_check, run_oracle_check

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

# OSError covers missing files and truncated IDX payloads
_INPUT_ERRORS = (
    ConfigError, IdxFormatError, IdxConsistencyError, OSError, ValidationError, ParameterError, DimensionError,
)


def _load_config(args: argparse.Namespace):
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"train.seed={args.seed}")
    if getattr(args, "out", None):
        overrides.append(f"out={args.out}")
    return parse_config(Path(args.config).read_text(encoding="utf-8"), overrides)


def _print_checks(results) -> int:
    for r in results:
        print(f"{r.name:<20} max_error={r.max_error:.3e}  tol={r.tolerance:.0e}  {'ok' if r.passed else 'FAIL'}")
    return EXIT_OK if all_passed(results) else EXIT_FAILED


def cmd_run(args: argparse.Namespace) -> int:
    summary = run_experiment(_load_config(args))
    print(
        f"{summary.reason.value}: steps={summary.steps} loss={summary.final_loss:.6g} "
        f"metric={summary.final_metric:.6g} wall_ms={summary.wall_ms} -> {summary.csv_path}"
    )
    return EXIT_FAILED if summary.reason is TerminationReason.NUMERIC_ERROR else EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    optimizers = [o.strip() for o in args.optimizers.split(",") if o.strip()]
    unknown = [o for o in optimizers if o not in OPTIMIZERS]
    if unknown:
        raise ConfigError(f"unknown optimizer(s): {', '.join(unknown)}")
    if args.expect_best and args.expect_best not in optimizers:
        raise ConfigError(f"--expect-best {args.expect_best} is not among --optimizers")
    seeds = [int(s) for s in args.seeds.split(",")]
    results = compare(cfg, optimizers, seeds, out_dir=args.out_dir, max_workers=args.workers)
    print(f"{'optimizer':<10}{'median loss':>14}{'median ' + cfg.metric:>18}")
    for r in results:
        print(f"{r.optimizer:<10}{r.median_loss:>14.6g}{r.median_metric:>18.6g}")
    if args.expect_best:
        best = best_optimizer(results, cfg.metric)
        if best != args.expect_best:
            print(f"expected {args.expect_best} to have the best median {cfg.metric}, got {best or 'a tie'}", file=sys.stderr)
            return EXIT_FAILED
        print(f"{best} has the best median {cfg.metric}")
    return EXIT_OK


def cmd_grad_check(args: argparse.Namespace) -> int:
    kwargs = {"gradient_fn": corrupted_backward} if args.corrupt else {}
    return _print_checks(run_grad_check(args.seed or 0, **kwargs))


def cmd_oracle_check(args: argparse.Namespace) -> int:
    return _print_checks(run_oracle_check(args.seed or 0, args.trials))


def cmd_cost(args: argparse.Namespace) -> int:
    table = cost_table(n=args.n, b=args.b, d=args.d, m_L=args.m_L, m_F=args.m_F, L=args.L, zeta=args.zeta)
    print(format_cost_table(table))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn
    uvicorn.run("nsqn.main:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsqn", description="Quasi-Newton training of recurrent networks.")
    parser.add_argument("--log-level", default=os.getenv("NSQN_LOG_LEVEL") or "INFO", help="logging level (default INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="config override applied after the file; repeatable")

    def with_seed(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None, help="seed (overrides train.seed for runs)")

    p = sub.add_parser("run", help="train one configuration, writing a metrics CSV")
    with_config(p)
    with_seed(p)
    p.add_argument("--out", default=None, help="metrics CSV path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several optimizers over several seeds and report medians")
    with_config(p)
    with_seed(p)
    p.add_argument("--optimizers", default="asnaq,adaqn,adam,adagrad")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--out-dir", default="runs")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--expect-best", default=None, metavar="OPTIMIZER",
                   help="exit 1 unless OPTIMIZER has the strictly best median metric")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("grad-check", help="BPTT against central differences for T in 1, 5, 20, 50")
    with_seed(p)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("oracle-check", help="limited-memory code against dense reference computations")
    with_seed(p)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("cost", help="per-iteration compute and storage cost table")
    p.add_argument("--n", type=int, default=60000, help="training-set size")
    p.add_argument("--b", type=int, default=128)
    p.add_argument("--d", type=int, default=1000)
    p.add_argument("--m-L", dest="m_L", type=int, default=10)
    p.add_argument("--m-F", dest="m_F", type=int, default=100)
    p.add_argument("--L", type=int, default=5)
    p.add_argument("--zeta", type=int, default=1, help="line-search evaluations per iteration")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
