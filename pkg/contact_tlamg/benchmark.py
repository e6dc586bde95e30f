"""Benchmark driver: build or load a system, set up a preconditioner, solve, report.

Provides ``RunConfig`` (one run), ``BenchmarkRow`` (one table row), the
``BenchmarkRunner`` class that resolves YAML configuration and caches
assembled systems, and the ``run_benchmark`` / ``run_suite`` /
``write_report`` functions used by the scripts.
"""

import copy
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .baselines import PlainAmgPreconditioner, SimplePreconditioner
from .coarse_amg import AmgConfig
from .elasticity import MaterialParams
from .exceptions import (
    Breakdown,
    ConfigError,
    ContactSolverError,
    InvalidMaterial,
    InvalidSpec,
    NotTridiagonalizable,
    SetupFailure,
    SingularPivot,
    ZeroDiagonal,
    ZeroPivot,
)
from .krylov import SolverConfig, SolveReport, gcr_solve
from .meshgen import ContactModelSpec, ModelId, generate_model, write_mesh_text
from .saddle import SaddleSystem, build_saddle_system
from .system_io import export_system, import_system
from .twolevel import (
    CoarseSolverKind,
    InterpolationKind,
    RestrictionKind,
    SmootherKind,
    TwoLevelConfig,
    TwoLevelPreconditioner,
)

try:
    import yaml
except Exception:
    yaml = None

try:
    import diskcache
except Exception:
    diskcache = None

logger = logging.getLogger(__name__)

PRECONDITIONER_KINDS = ("two_level", "simple", "plain_amg", "none")
REPORT_FORMATS = ("csv", "json")

# failures that end a run with a non-converged row instead of an exception
_SOLVER_FAILURES = (Breakdown, SingularPivot, ZeroPivot, ZeroDiagonal, SetupFailure, NotTridiagonalizable)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PreconditionerSpec:
    kind: str = "two_level"
    interpolation: str = "simplified"
    restriction: Optional[str] = None
    approx_eps: float = 1e-10
    smoother: str = "exactf"
    coarse: str = "amg"
    ssimple_sweeps: int = 1
    jacobi_sweeps: int = 1

    def validate(self) -> None:
        if self.kind not in PRECONDITIONER_KINDS:
            raise ConfigError(f"unknown preconditioner {self.kind!r} (choose from {', '.join(PRECONDITIONER_KINDS)})")
        if self.kind == "two_level":
            self.two_level_config()

    def two_level_config(self, amg: Optional[AmgConfig] = None) -> TwoLevelConfig:
        return TwoLevelConfig(
            interpolation=InterpolationKind(_enum_value(InterpolationKind, self.interpolation, "interpolation")),
            restriction=None if self.restriction in (None, "", "auto")
            else RestrictionKind(_enum_value(RestrictionKind, self.restriction, "restriction")),
            approx_eps=float(self.approx_eps),
            smoother=SmootherKind(_enum_value(SmootherKind, self.smoother, "smoother")),
            coarse=CoarseSolverKind(_enum_value(CoarseSolverKind, self.coarse, "coarse solver")),
            amg=amg or AmgConfig(),
            jacobi_sweeps=int(self.jacobi_sweeps),
            ssimple_sweeps=int(self.ssimple_sweeps),
        )

    @property
    def label(self) -> str:
        if self.kind == "two_level":
            return self.two_level_config().label
        return {"simple": "SIMPLE", "plain_amg": "AMG", "none": "GCR"}[self.kind]


def _enum_value(enum_cls, value, what: str) -> str:
    text = str(value).lower()
    if text not in {m.value for m in enum_cls}:
        raise ConfigError(f"unknown {what} {value!r} (choose from {', '.join(m.value for m in enum_cls)})")
    return text


def _parse_ratio(value) -> Fraction:
    try:
        ratio = Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"mismatch ratio must be a number or a fraction like 3/2, got {value!r}") from None
    if ratio <= 0:
        raise ConfigError(f"mismatch ratio must be positive, got {value!r}")
    return ratio


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run; exactly one of ``model`` and ``import_dir`` is set."""

    model: Optional[ModelId] = None
    resolution: int = 16
    mismatch: Fraction = Fraction(3, 2)
    traction: Optional[float] = None
    material: MaterialParams = field(default_factory=MaterialParams)
    import_dir: Optional[Path] = None
    precond: PreconditionerSpec = field(default_factory=PreconditionerSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    amg: AmgConfig = field(default_factory=AmgConfig)
    export_dir: Optional[Path] = None

    def validate(self) -> None:
        if (self.model is None) == (self.import_dir is None):
            raise ConfigError("specify exactly one problem source: a model or an import directory")
        if self.model is not None:
            ModelId.parse(self.model)
            if int(self.resolution) < 2:
                raise ConfigError(f"resolution must be >= 2, got {self.resolution}")
        self.precond.validate()

    @property
    def problem_label(self) -> str:
        if self.model is not None:
            return f"{ModelId.parse(self.model).value}-r{self.resolution}"
        return Path(self.import_dir).name

    @classmethod
    def from_mapping(cls, cfg: Dict[str, Any]) -> "RunConfig":
        """Build from a sectioned mapping (``problem``, ``material``, ``preconditioner``, ``solver``, ``amg``, ``output``)."""
        problem = cfg.get("problem") or {}
        material = cfg.get("material") or {}
        pre = cfg.get("preconditioner") or {}
        solver = cfg.get("solver") or {}
        amg = cfg.get("amg") or {}
        output = cfg.get("output") or {}
        try:
            model = problem.get("model")
            run = cls(
                model=ModelId.parse(model) if model not in (None, "") else None,
                resolution=int(problem.get("resolution", 16)),
                mismatch=_parse_ratio(problem.get("mismatch", "3/2")),
                traction=problem.get("traction"),
                material=MaterialParams(
                    youngs_modulus=float(material.get("youngs_modulus", 20.0)),
                    poisson_ratio=float(material.get("poisson_ratio", 0.3)),
                ),
                import_dir=Path(problem["import_dir"]) if problem.get("import_dir") else None,
                precond=PreconditionerSpec(
                    kind=str(pre.get("kind", "two_level")),
                    interpolation=str(pre.get("interpolation", "simplified")),
                    restriction=pre.get("restriction"),
                    approx_eps=float(pre.get("approx_eps", 1e-10)),
                    smoother=str(pre.get("smoother", "exactf")),
                    coarse=str(pre.get("coarse", "amg")),
                    ssimple_sweeps=int(pre.get("ssimple_sweeps", 1)),
                    jacobi_sweeps=int(pre.get("jacobi_sweeps", 1)),
                ),
                solver=SolverConfig(
                    max_iterations=int(solver.get("max_iterations", 100)),
                    rel_tolerance=float(solver.get("rel_tolerance", 1e-8)),
                    restart=int(solver["restart"]) if solver.get("restart") else None,
                ),
                amg=AmgConfig(
                    theta=float(amg.get("theta", 0.25)),
                    omega=float(amg.get("omega", 2.0 / 3.0)),
                    max_coarse=int(amg.get("max_coarse", 200)),
                    max_levels=int(amg.get("max_levels", 25)),
                    block_size=int(amg.get("block_size", 2)),
                    presweeps=int(amg.get("presweeps", 1)),
                    postsweeps=int(amg.get("postsweeps", 1)),
                ),
                export_dir=Path(output["export_dir"]) if output.get("export_dir") else None,
            )
        except (TypeError, KeyError, InvalidSpec, InvalidMaterial) as e:
            raise ConfigError(f"malformed run configuration: {e}") from e
        run.validate()
        return run


DEFAULT_CONFIG: Dict[str, Any] = {
    "problem": {"model": "model3", "resolution": 16, "mismatch": "3/2"},
    "material": {"youngs_modulus": 20.0, "poisson_ratio": 0.3},
    "preconditioner": {"kind": "two_level", "interpolation": "simplified", "approx_eps": 1e-10,
                       "smoother": "exactf", "coarse": "amg"},
    "solver": {"max_iterations": 100, "rel_tolerance": 1e-8, "restart": None},
    "amg": {},
    "output": {"report_dir": "outputs/benchmark", "report_format": "csv"},
    "runtime": {"cache_dir": None},
}


def deep_merge(base: Dict[str, Any], override: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Recursive dict merge; values of ``override`` win, ``None`` values are skipped."""
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Defaults overlaid with a YAML file (when given)."""
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    path = Path(path)
    if yaml is None:
        raise ConfigError("pyyaml is required to read configuration files")
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return deep_merge(DEFAULT_CONFIG, data)


# ---------------------------------------------------------------------------
# Result rows
# ---------------------------------------------------------------------------
@dataclass
class BenchmarkRow:
    model: str
    method: str
    dofs: int = 0
    n_coarse: int = 0
    n_fine: int = 0
    n_pairs: int = 0
    NIT: int = 0
    converged: bool = False
    r_rel: float = float("nan")
    setup_time: float = 0.0
    solve_time: float = 0.0
    total_time: float = 0.0
    nnz_row_P: float = float("nan")
    nnz_row_interp: float = float("nan")
    nnz_row_AH: float = float("nan")
    nnz_P: int = -1
    nnz_interp: int = -1
    nnz_AH: int = -1
    constraint_residual: float = float("nan")
    error: str = ""
    residual_history: List[float] = field(default_factory=list)

    def to_record(self, with_history: bool = False) -> Dict[str, Any]:
        rec = asdict(self)
        if not with_history:
            rec.pop("residual_history")
        return rec


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------
class BenchmarkRunner:
    """Runs benchmark cases from a sectioned configuration dict.

    Attributes:
        config: Merged configuration (defaults < YAML < overrides).
        cache: Optional ``diskcache.Cache`` of assembled saddle systems.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = deep_merge(DEFAULT_CONFIG, config or {})
        self.cache = None
        cache_dir = self.get_config("runtime.cache_dir")
        if cache_dir:
            if diskcache is None:
                logger.warning("[Setup] diskcache not installed; system cache disabled")
            else:
                self.cache = diskcache.Cache(str(cache_dir))
                logger.info(f"[Setup] system cache at {cache_dir}")

    # ---- config helpers ----
    def get_config(self, key_path: str, default=None):
        """Get a config value by dot-separated path."""
        val = self.config
        for k in key_path.split("."):
            if isinstance(val, dict) and k in val:
                val = val[k]
            else:
                return default
        return val if val is not None else default

    def run_config(self, override: Optional[Dict[str, Any]] = None) -> RunConfig:
        return RunConfig.from_mapping(deep_merge(self.config, override))

    # ---- problem ----
    def build_system(self, run: RunConfig) -> SaddleSystem:
        if run.import_dir is not None:
            return import_system(run.import_dir)
        spec = ContactModelSpec(
            model_id=ModelId.parse(run.model),
            resolution=int(run.resolution),
            mismatch_ratio=run.mismatch,
            traction_magnitude=run.traction,
            material=run.material,
        )
        key = (f"system:{spec.model_id.value}:{spec.resolution}:{spec.mismatch_ratio}:"
               f"{run.material.E}:{run.material.nu}:{spec.traction}")
        if self.cache is not None:
            cached = self.cache.get(key)
            if cached is not None:
                logger.info(f"[Mesh] {key} loaded from cache")
                return cached
        start = time.perf_counter()
        mesh = generate_model(spec)
        sys = build_saddle_system(mesh, run.material)
        logger.info(f"[Mesh] {mesh.name}: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles, "
                    f"assembled in {time.perf_counter() - start:.2f}s")
        if self.cache is not None:
            self.cache.set(key, sys)
        if run.export_dir is not None:
            write_mesh_text(mesh, Path(run.export_dir) / "mesh.txt")
        return sys

    def build_preconditioner(self, sys: SaddleSystem, run: RunConfig):
        kind = run.precond.kind
        if kind == "two_level":
            return TwoLevelPreconditioner.setup(sys, run.precond.two_level_config(run.amg))
        if kind == "simple":
            return SimplePreconditioner.setup(sys, run.amg)
        if kind == "plain_amg":
            return PlainAmgPreconditioner.setup(sys, run.amg)
        return None

    # ---- one run ----
    def run(self, run: RunConfig) -> BenchmarkRow:
        run.validate()
        sys = self.build_system(run)
        if run.export_dir is not None:
            export_system(sys, run.export_dir)

        row = BenchmarkRow(model=run.problem_label, method=run.precond.label, dofs=sys.n,
                           n_coarse=sys.n_coarse, n_fine=sys.n_fine, n_pairs=sys.n_pairs)
        report = SolveReport()
        try:
            pc = self.build_preconditioner(sys, run)
            setup_time = getattr(pc, "setup_time", 0.0) if pc is not None else 0.0
            if isinstance(pc, TwoLevelPreconditioner):
                stats = pc.stats
                row.nnz_row_P, row.nnz_P = stats.nnz_row_P, stats.nnz_P
                row.nnz_row_interp, row.nnz_interp = stats.nnz_row_interp, stats.nnz_interp
                row.nnz_row_AH, row.nnz_AH = stats.nnz_row_AH, stats.nnz_AH
                if run.export_dir is not None:
                    pc.export_coarse(Path(run.export_dir) / "A_H.mtx")
            M = pc.as_linear_operator() if pc is not None else None
            x, report = gcr_solve(sys.A, M, sys.rhs, run.solver)
            report.setup_time = setup_time
            d = x[sys.ranges["U"]]
            dnorm = np.linalg.norm(d)
            row.constraint_residual = float(np.linalg.norm(sys.G @ d) / dnorm) if dnorm > 0 else 0.0
        except _SOLVER_FAILURES as e:
            logger.warning(f"[GCR] {row.method} on {row.model} failed: {e}")
            row.error = str(e)
            failed = getattr(e, "report", None)
            if failed is not None:
                report = failed

        row.NIT = report.iterations
        row.converged = report.converged and not row.error
        row.r_rel = report.final_residual
        row.setup_time = report.setup_time
        row.solve_time = report.solve_time
        row.total_time = report.total_time
        row.residual_history = list(report.residual_history)
        logger.info(f"[Report] {row.model} {row.method}: NIT={row.NIT} r_rel={row.r_rel:.3e} "
                    f"converged={row.converged}")
        return row


def run_benchmark(cfg: RunConfig, runner: Optional[BenchmarkRunner] = None) -> BenchmarkRow:
    return (runner or BenchmarkRunner()).run(cfg)


# ---------------------------------------------------------------------------
# Suites and reports
# ---------------------------------------------------------------------------
def load_suites(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if yaml is None:
        raise ConfigError("pyyaml is required to read suite files")
    if not path.exists():
        raise ConfigError(f"suite file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    suites = data.get("suites", data)
    if not isinstance(suites, dict):
        raise ConfigError(f"{path}: expected a mapping of suites")
    return suites


def run_suite(suite_name: str, suites: Dict[str, Any], config: Optional[Dict[str, Any]] = None,
              progress: bool = True) -> pd.DataFrame:
    """Run every case of one suite; each case is a config override on top of the suite base."""
    if suite_name not in suites:
        raise ConfigError(f"unknown suite {suite_name!r} (available: {', '.join(sorted(suites))})")
    suite = suites[suite_name] or {}
    cases = suite.get("cases") or []
    if not cases:
        raise ConfigError(f"suite {suite_name!r} has no cases")
    runner = BenchmarkRunner(deep_merge(config or {}, suite.get("base")))
    logger.info(f"[Suite] {suite_name}: {len(cases)} cases. {suite.get('description', '')}".rstrip())

    rows = []
    for case in tqdm(cases, desc=suite_name, disable=not progress):
        case = dict(case)
        name = case.pop("name", None)
        run = None
        try:
            run = runner.run_config(case)
            row = runner.run(run)
        except ContactSolverError as e:
            model, method = (run.problem_label, run.precond.label) if run is not None else ("invalid", "invalid")
            logger.error(f"[Suite] case {name or model} aborted: {e}")
            row = BenchmarkRow(model=model, method=method, error=str(e))
        rec = row.to_record()
        rec["case"] = name or f"{row.model}:{row.method}"
        rows.append(rec)
    return pd.DataFrame(rows)


def write_report(rows: Union[pd.DataFrame, List[BenchmarkRow]], path: Union[str, Path], fmt: str = "csv") -> Path:
    if fmt not in REPORT_FORMATS:
        raise ConfigError(f"unknown report format {fmt!r} (choose from {', '.join(REPORT_FORMATS)})")
    if isinstance(rows, pd.DataFrame):
        df = rows
    else:
        df = pd.DataFrame([r.to_record(with_history=(fmt == "json")) for r in rows])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        df.to_csv(path, index=False, encoding="utf-8")
    else:
        df.to_json(path, orient="records", indent=2)
    logger.info(f"[Report] {len(df)} rows -> {path}")
    return path


def timestamped_report_path(report_dir: Union[str, Path], stem: str, fmt: str) -> Path:
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    return Path(report_dir) / f"{stem}_{timestamp}.{fmt}"
