# info_mapf.py

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor

from utils.baseline_utils import run_scenario
from utils.config_utils import ConfigError, load_scenario, load_sweep
from utils.info_utils import MAX_QUADRATURE_ORDER
from utils.record_utils import (
    failed_record,
    format_summary,
    record_from_metrics,
    records_frame,
    save_summary,
    summarize,
    write_records,
)
from utils.validate_utils import SUITES, run_suite

logger = logging.getLogger("info_mapf")

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_USAGE = 2


def configure_logging(verbose=False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(asctime)s] [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )


def _execute(config):
    """(record, trajectories) for one run; failures become a failed record."""
    try:
        metrics = run_scenario(config)
    except Exception as e:
        logger.error(f"Run {config.run_id} failed: {type(e).__name__}: {e}")
        return failed_record(config, e), None
    return record_from_metrics(config, metrics), metrics.trajectories


# --- Subcommands ---
def cmd_run(scenario, seed, out):
    try:
        config = load_scenario(scenario, seed=seed)
    except ConfigError as e:
        logger.error(f"Invalid scenario: {e}")
        return EXIT_USAGE

    record, trajectories = _execute(config)
    if record.status != "ok":
        return EXIT_RUN_FAILURE
    write_records([record], out, trajectories={record.run_id: trajectories})
    print(f"[✓] {record.run_id}: {record.unique_phenomena_discovered} unique phenomena "
          f"(search ratio {record.search_ratio:.3f})")
    return EXIT_OK


def cmd_bench(sweep, out, workers=1, xlsx=False):
    try:
        configs = load_sweep(sweep)
    except ConfigError as e:
        logger.error(f"Invalid sweep: {e}")
        return EXIT_USAGE

    with ProcessPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(_execute, configs))

    records = [record for record, _ in results]
    trajectories = {record.run_id: traj for record, traj in results if traj is not None}
    write_records(records, out, trajectories=trajectories)

    summary = summarize(records_frame(records))
    save_summary(summary, out, xlsx=xlsx)
    print(format_summary(summary).to_string(index=False))

    failed = [r.run_id for r in records if r.status != "ok"]
    if failed:
        logger.error(f"{len(failed)} of {len(records)} run(s) failed: {', '.join(failed)}")
        return EXIT_RUN_FAILURE
    print(f"✅ Bench complete: {len(records)} runs.")
    return EXIT_OK


def cmd_validate(suite="all", trials=None, quadrature_order=5, seed=0):
    names = SUITES if suite == "all" else (suite,)
    exit_code = EXIT_OK
    for name in names:
        result = run_suite(name, trials=trials, order=quadrature_order, base_seed=seed)
        if result.passed:
            note = f" ({result.detail})" if result.detail else ""
            print(f"[PASS] {name}: {result.trials} trial(s), 0 failures{note}")
        else:
            print(f"[FAIL] {name}: {result.trials} trial(s), {result.failures} failure(s); "
                  f"counterexample seed {result.counterexample_seed}: {result.detail}")
            exit_code = EXIT_RUN_FAILURE
    return exit_code


# --- Argument parsing ---
def build_parser():
    parser = argparse.ArgumentParser(
        prog="info_mapf",
        description="Information-driven multi-agent path finding: missions, sweeps and property checks.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one mission from a scenario file")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="run a sweep of scenarios x algorithms x seeds")
    bench.add_argument("--sweep", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--xlsx", action="store_true", help="also write summary.xlsx")

    validate = sub.add_parser("validate", help="run the property suites")
    validate.add_argument("--suite", choices=("all",) + SUITES, default="all")
    validate.add_argument("--trials", type=int, default=None)
    validate.add_argument("--quadrature-order", type=int, default=5)
    validate.add_argument("--seed", type=int, default=0, help="base seed; trial i uses seed + i")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    if args.command == "run":
        return cmd_run(args.scenario, args.seed, args.out)
    if args.command == "bench":
        return cmd_bench(args.sweep, args.out, workers=args.workers, xlsx=args.xlsx)

    if not 1 <= args.quadrature_order <= MAX_QUADRATURE_ORDER:
        parser.error(f"--quadrature-order must lie in 1..{MAX_QUADRATURE_ORDER}")
    if args.trials is not None and args.trials < 1:
        parser.error("--trials must be >= 1")
    return cmd_validate(args.suite, args.trials, args.quadrature_order, args.seed)


if __name__ == "__main__":
    sys.exit(main())
