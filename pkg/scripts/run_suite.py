"""Run a named experiment suite from configs/benchmark/suites.yml and write one table.

Usage:
    python scripts/run_suite.py convergence
    python scripts/run_suite.py drop_study --report json
    python scripts/run_suite.py --list
"""

import argparse
import logging
import os
import sys

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(SCRIPT_DIR)
sys.path.insert(0, PROJECT_ROOT)

from logging_config import get_benchmark_logger, log_benchmark_row, setup_logging  # noqa: E402

from contact_tlamg.benchmark import (  # noqa: E402
    REPORT_FORMATS,
    load_config,
    load_suites,
    run_suite,
    timestamped_report_path,
    write_report,
)
from contact_tlamg.exceptions import ContactSolverError  # noqa: E402

logger = logging.getLogger(__name__)

DEFAULT_SUITES = os.path.join(PROJECT_ROOT, "configs", "benchmark", "suites.yml")
DEFAULT_CONFIG = os.path.join(PROJECT_ROOT, "configs", "benchmark", "benchmark_config.yml")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description="Run a benchmark suite")
    p.add_argument("suite", nargs="?", help="suite name")
    p.add_argument("--suites", default=DEFAULT_SUITES, help="suite file")
    p.add_argument("--config", default=DEFAULT_CONFIG, help="base run configuration")
    p.add_argument("--report", choices=REPORT_FORMATS, default="csv")
    p.add_argument("--output", help="report path (default outputs/benchmark/<suite>_<ts>.<fmt>)")
    p.add_argument("--list", action="store_true", help="list the available suites and exit")
    p.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    args = p.parse_args(argv)

    try:
        suites = load_suites(args.suites)
    except ContactSolverError as e:
        print(f"错误: {e}")
        return 1
    if args.list or not args.suite:
        for name, suite in suites.items():
            print(f"  {name:<14} {len((suite or {}).get('cases') or []):>3} cases  {(suite or {}).get('description', '')}")
        return 0

    setup_logging(level=getattr(logging, args.log_level))
    suite_log = get_benchmark_logger("suite", os.path.join(PROJECT_ROOT, "logs"))
    suite_log.info("[Suite] %s from %s", args.suite, args.suites)

    try:
        config = load_config(args.config if os.path.exists(args.config) else None)
        df = run_suite(args.suite, suites, config)
    except ContactSolverError as e:
        logger.error("Suite aborted: %s", e)
        suite_log.error("[Suite] %s aborted: %s", args.suite, e)
        return 1

    for rec in df.to_dict(orient="records"):
        log_benchmark_row(suite_log, rec)
    report_dir = config.get("output", {}).get("report_dir") or "outputs/benchmark"
    path = args.output or timestamped_report_path(report_dir, args.suite, args.report)
    write_report(df, path, args.report)

    cols = [c for c in ("case", "model", "method", "NIT", "r_rel", "converged", "nnz_row_P", "nnz_row_AH")
            if c in df.columns]
    print(df[cols].to_string(index=False))
    print(f"\n报告已保存: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
