"""Export / import of a saddle system as a directory of MatrixMarket files.

Layout::

    <dir>/A.mtx          full saddle matrix (coordinate, general, 1-based)
    <dir>/D.mtx, M.mtx   mortar blocks, for inspection and consistency checks
    <dir>/rhs.mtx        right-hand side [f; 0] (array)
    <dir>/manifest.yml   index ranges of N, M, S and lambda plus metadata
"""

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import yaml

from .exceptions import FormatError
from .saddle import SaddleSystem
from .sparsela import read_matrix_market, read_vector, write_matrix_market

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.yml"
FORMAT_VERSION = 1
_RANGE_KEYS = ("interior", "master", "slave", "lambda")


def export_system(sys: SaddleSystem, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_market(directory / "A.mtx", sys.A, comment=f"saddle matrix {sys.name}")
    write_matrix_market(directory / "D.mtx", sys.D)
    write_matrix_market(directory / "M.mtx", sys.M)
    write_matrix_market(directory / "rhs.mtx", sys.rhs)

    r = sys.ranges
    manifest = {
        "format_version": FORMAT_VERSION,
        "name": sys.name,
        "n": sys.n,
        "n_pairs": sys.n_pairs,
        "ranges": {
            "interior": [r["N"].start, r["N"].stop],
            "master": [r["M"].start, r["M"].stop],
            "slave": [r["S"].start, r["S"].stop],
            "lambda": [r["L"].start, r["L"].stop],
        },
        "files": {"A": "A.mtx", "D": "D.mtx", "M": "M.mtx", "rhs": "rhs.mtx"},
    }
    with open(directory / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    logger.info(f"[Export] {sys.summary()} -> {directory}")
    return directory


def _read_manifest(path: Path) -> Dict:
    if not path.exists():
        raise FormatError(path, "manifest not found")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        line = None
        mark = getattr(e, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise FormatError(path, f"invalid YAML ({e})", line) from e
    if not isinstance(manifest, dict) or "ranges" not in manifest:
        raise FormatError(path, "manifest must be a mapping with a 'ranges' entry")
    return manifest


def _validate_ranges(path: Path, ranges: Dict, n: int) -> List[Tuple[int, int]]:
    """Ranges must be [start, stop) pairs that tile 0..n in the order N, M, S, lambda."""
    if not isinstance(ranges, dict) or set(ranges) != set(_RANGE_KEYS):
        raise FormatError(path, f"ranges must name exactly {', '.join(_RANGE_KEYS)}")
    spans = []
    for key in _RANGE_KEYS:
        value = ranges[key]
        if not (isinstance(value, (list, tuple)) and len(value) == 2 and all(isinstance(v, int) for v in value)):
            raise FormatError(path, f"range {key!r} must be a pair of integers, got {value!r}")
        start, stop = value
        if not 0 <= start <= stop <= n:
            raise FormatError(path, f"range {key!r} = [{start}, {stop}) lies outside 0..{n}")
        spans.append((start, stop))
    ordered = sorted(zip(spans, _RANGE_KEYS))
    for ((s0, e0), k0), ((s1, e1), k1) in zip(ordered, ordered[1:]):
        if s1 < e0:
            raise FormatError(path, f"ranges {k0!r} and {k1!r} overlap")
    position = 0
    for (start, stop), key in zip(spans, _RANGE_KEYS):
        if start != position:
            raise FormatError(path, f"range {key!r} must start at {position}, got {start}")
        position = stop
    if position != n:
        raise FormatError(path, f"ranges cover {position} unknowns, matrix has {n}")
    return spans


def import_system(directory: Union[str, Path]) -> SaddleSystem:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    manifest = _read_manifest(manifest_path)
    files = manifest.get("files") or {}
    A_path = directory / files.get("A", "A.mtx")
    A = read_matrix_market(A_path)
    if A.shape[0] != A.shape[1]:
        raise FormatError(A_path, f"saddle matrix must be square, got {A.shape}")
    n = A.shape[0]
    if "n" in manifest and manifest["n"] != n:
        raise FormatError(manifest_path, f"manifest declares n={manifest['n']}, A.mtx has {n}")
    (n0, n1), (m0, m1), (s0, s1), (l0, l1) = _validate_ranges(manifest_path, manifest["ranges"], n)
    if s1 - s0 != l1 - l0:
        raise FormatError(manifest_path, f"|S| = {s1 - s0} differs from |lambda| = {l1 - l0}")

    rhs_path = directory / files.get("rhs", "rhs.mtx")
    rhs = read_vector(rhs_path)
    if rhs.shape[0] != n:
        raise FormatError(rhs_path, f"rhs has {rhs.shape[0]} entries, matrix has {n}")

    # the mortar files must agree with the blocks of A
    for key, block, sign in (("D", A[l0:l1, s0:s1], 1.0), ("M", A[l0:l1, m0:m1], -1.0)):
        path = directory / files.get(key, f"{key}.mtx")
        if not path.exists():
            continue
        stored = read_matrix_market(path)
        if stored.shape != block.shape or abs(stored - sign * block).sum() > 0.0:
            raise FormatError(path, f"{key} does not match the corresponding block of A")

    sys = SaddleSystem(
        A=A,
        rhs=rhs,
        n_interior=n1 - n0,
        n_master=m1 - m0,
        n_slave=s1 - s0,
        n_lambda=l1 - l0,
        name=str(manifest.get("name") or directory.name),
        n_pairs=int(manifest.get("n_pairs", 0)),
    )
    logger.info(f"[Import] {sys.summary()} <- {directory}")
    return sys
