"""Single benchmark run: model (or imported system) x preconditioner -> one report row.

Examples:
    python scripts/run_benchmark.py --model 3 --resolution 32 --interp simplified --smoother exactf
    python scripts/run_benchmark.py --model 2 --precond simple --max-it 2000 --restart 100
    python scripts/run_benchmark.py --import outputs/systems/model3-r8 --report json
"""

import argparse
import logging
import os
import sys

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(SCRIPT_DIR)
sys.path.insert(0, PROJECT_ROOT)

from logging_config import default_log_file, log_benchmark_row, setup_logging  # noqa: E402

from contact_tlamg.benchmark import (  # noqa: E402
    PRECONDITIONER_KINDS,
    REPORT_FORMATS,
    BenchmarkRunner,
    load_config,
    timestamped_report_path,
    write_report,
)
from contact_tlamg.exceptions import ContactSolverError  # noqa: E402

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="Two-level preconditioned GCR for mortar tied contact")
    p.add_argument("--config", help="YAML run configuration (defaults < file < flags)")
    src = p.add_argument_group("problem")
    src.add_argument("--model", help="model1, model2, model3 (or 1, 2, 3)")
    src.add_argument("--resolution", type=int, help="master elements per unit length")
    src.add_argument("--mismatch", help="slave:master element ratio, e.g. 3/2")
    src.add_argument("--import", dest="import_dir", metavar="DIR", help="load an exported saddle system")
    pre = p.add_argument_group("preconditioner")
    pre.add_argument("--precond", choices=PRECONDITIONER_KINDS)
    pre.add_argument("--interp", choices=("ideal", "simplified"))
    pre.add_argument("--restriction", choices=("ideal", "simplified", "auto"))
    pre.add_argument("--approx-eps", type=float, help="drop tolerance for P = D^-1 M (0 keeps P exact)")
    pre.add_argument("--smoother", choices=("jac", "exactf", "ssimple", "none"))
    pre.add_argument("--coarse", choices=("amg", "direct"))
    sol = p.add_argument_group("solver")
    sol.add_argument("--tol", type=float, help="relative residual tolerance (default 1e-8)")
    sol.add_argument("--max-it", type=int, help="iteration cap (default 100)")
    sol.add_argument("--restart", type=int, help="GCR restart length (default: none)")
    out = p.add_argument_group("output")
    out.add_argument("--export", dest="export_dir", metavar="DIR", help="write the system and A_H as MatrixMarket")
    out.add_argument("--report", choices=REPORT_FORMATS, help="report format (default csv)")
    out.add_argument("--output", help="report path (default outputs/benchmark/benchmark_<ts>.<fmt>)")
    p.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return p


def overrides_from_args(args: argparse.Namespace) -> dict:
    """CLI flags as a config override; unset flags stay None and are skipped by the merge."""
    problem = {
        "model": args.model,
        "resolution": args.resolution,
        "mismatch": args.mismatch,
        "import_dir": args.import_dir,
    }
    if args.import_dir:
        problem["model"] = ""
    return {
        "problem": problem,
        "preconditioner": {
            "kind": args.precond,
            "interpolation": args.interp,
            "restriction": args.restriction,
            "approx_eps": args.approx_eps,
            "smoother": args.smoother,
            "coarse": args.coarse,
        },
        "solver": {"rel_tolerance": args.tol, "max_iterations": args.max_it, "restart": args.restart},
        "output": {"export_dir": args.export_dir, "report_format": args.report},
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log_file = default_log_file("benchmark", os.path.join(PROJECT_ROOT, "logs"))
    setup_logging(level=getattr(logging, args.log_level), log_file=log_file)
    logger.info("=" * 60)
    logger.info("Benchmark run, log file: %s", log_file)
    logger.info("=" * 60)

    try:
        runner = BenchmarkRunner(load_config(args.config))
        overrides = overrides_from_args(args)
        run = runner.run_config(overrides)
        row = runner.run(run)
    except ContactSolverError as e:
        logger.error("Benchmark aborted: %s", e)
        return 1

    log_benchmark_row(logger, row)
    fmt = runner.get_config("output.report_format", "csv")
    if args.report:
        fmt = args.report
    path = args.output or timestamped_report_path(runner.get_config("output.report_dir", "outputs/benchmark"),
                                                  "benchmark", fmt)
    write_report([row], path, fmt)
    print(f"{row.model}  {row.method}  NIT={row.NIT}  r_rel={row.r_rel:.3e}  "
          f"converged={row.converged}  report: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
