"""Dense verification of the two-level construction on small instances of the three models.

Usage:
    python scripts/verify_theory.py
    python scripts/verify_theory.py --resolution 3 --models 1 3
"""

import argparse
import logging
import os
import sys
from fractions import Fraction

import pandas as pd

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(SCRIPT_DIR)
sys.path.insert(0, PROJECT_ROOT)

from logging_config import default_log_file, setup_logging  # noqa: E402

from contact_tlamg.exceptions import ContactSolverError  # noqa: E402
from contact_tlamg.meshgen import ContactModelSpec, ModelId, generate_model  # noqa: E402
from contact_tlamg.oracle import run_all_checks  # noqa: E402
from contact_tlamg.saddle import build_saddle_system  # noqa: E402

logger = logging.getLogger(__name__)


def verify_models(models, resolution: int = 2, mismatch: Fraction = Fraction(3, 2)) -> pd.DataFrame:
    records = []
    for model in models:
        spec = ContactModelSpec(model_id=ModelId.parse(model), resolution=resolution, mismatch_ratio=mismatch)
        sys_ = build_saddle_system(generate_model(spec))
        logger.info(f"[Oracle] {sys_.summary()}")
        for check in run_all_checks(sys_):
            records.append({"model": sys_.name, "dofs": sys_.n, **check.to_dict()})
    return pd.DataFrame.from_records(records)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description="Dense checks of the two-level preconditioner")
    p.add_argument("--models", nargs="+", default=["1", "2", "3"], help="model ids")
    p.add_argument("--resolution", type=int, default=2)
    p.add_argument("--mismatch", default="3/2")
    p.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    args = p.parse_args(argv)

    log_file = default_log_file("verify", os.path.join(PROJECT_ROOT, "logs"))
    setup_logging(level=getattr(logging, args.log_level), log_file=log_file)

    try:
        df = verify_models(args.models, args.resolution, Fraction(args.mismatch))
    except (ContactSolverError, ValueError) as e:
        logger.error("Verification aborted: %s", e)
        return 1

    with pd.option_context("display.max_rows", None, "display.width", 120):
        print(df.to_string(index=False, formatters={"value": "{:.2e}".format, "tolerance": "{:.0e}".format}))
    n_failed = int((~df["passed"]).sum())
    print(f"\n{len(df) - n_failed}/{len(df)} 项检查通过")
    return 0 if n_failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
