"""Dataset ingestion, run configuration, and convergence-log serialization.

File formats are deliberately plain: LibSVM text for data, a flat
key = value file for run configuration, and a fixed-header CSV for
convergence traces.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Tuple

import numpy as np

from .errors import UsageError
from .metrics import ConvergenceRecord

CSV_HEADER = "k,wall_time_s,objective,gap_ref,pd_gap,iterate_norm"

ALGORITHMS = (
    "acv-general",
    "acv-sc",
    "acv-sc-dual",
    "acv-sc-smooth",
    "cv-book",
    "cv-tuned",
    "apgd",
    "pdhg",
)

PROBLEM_FAMILIES = ("fused-elastic-net", "imaging")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus regression targets; immutable after load."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: Optional[Tuple[str, ...]] = None
    source: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise UsageError("features must be a non-empty n x d matrix")
        if y.shape != (X.shape[0],):
            raise UsageError("labels must have one entry per row")
        if np.isnan(X).any() or np.isnan(y).any():
            raise UsageError("dataset contains NaN entries")


def read_libsvm(path) -> Dataset:
    """Parse sparse "label index:value" lines (1-based indices) densely.

    The feature count is the largest index seen; blank lines are skipped;
    repeated indices within a line keep the last value.
    """
    rows = []
    labels = []
    max_idx = 0
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
        entries = []
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise UsageError(f"{path}:{lineno}: malformed token {tok!r} (expected index:value)")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: malformed token {tok!r}") from None
            if idx < 1:
                raise UsageError(f"{path}:{lineno}: indices are 1-based, got {idx}")
            entries.append((idx, val))
            max_idx = max(max_idx, idx)
        rows.append(entries)
    if not rows:
        raise UsageError(f"{path}: no rows")
    if max_idx == 0:
        raise UsageError(f"{path}: no feature indices")
    X = np.zeros((len(rows), max_idx))
    for r, entries in enumerate(rows):
        for idx, val in entries:
            X[r, idx - 1] = val
    return Dataset(features=X, labels=np.array(labels), source=str(path))


def write_libsvm(dataset: Dataset, path):
    """Serialize a dataset in the sparse text format; exact zeros are omitted."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for row, label in zip(dataset.features, dataset.labels):
                toks = ["%.17g" % label]
                for j in np.nonzero(row)[0]:
                    toks.append("%d:%s" % (j + 1, "%.17g" % row[j]))
                fh.write(" ".join(toks) + "\n")
    except OSError as err:
        raise UsageError(f"cannot write {path}: {err}") from None


def rescale_columns(dataset: Dataset) -> Dataset:
    """Divide each column by its max absolute value (zero columns kept).

    Idempotent; labels are left untouched.
    """
    X = np.asarray(dataset.features, dtype=float)
    scale = np.max(np.abs(X), axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return Dataset(
        features=X / scale,
        labels=dataset.labels,
        feature_names=dataset.feature_names,
        source=dataset.source + " [rescaled]" if dataset.source else "[rescaled]",
    )


def _fmt(value) -> str:
    return "" if value is None else "%.17g" % value


def write_convergence_csv(record: ConvergenceRecord, path):
    """Write the fixed-header trace with >= 15 significant digits per value."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for i in range(len(record)):
                fh.write(
                    "%d,%s,%s,%s,%s,%s\n"
                    % (
                        record.ks[i],
                        _fmt(record.wall_times[i]),
                        _fmt(record.objectives[i]),
                        _fmt(record.gap_refs[i]),
                        _fmt(record.pd_gaps[i]),
                        _fmt(record.iterate_norms[i]),
                    )
                )
    except OSError as err:
        raise UsageError(f"cannot write {path}: {err}") from None


def read_convergence_csv(path) -> ConvergenceRecord:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}") from None
    if not lines or lines[0] != CSV_HEADER:
        raise UsageError(f"{path}: missing or wrong header")
    record = ConvergenceRecord()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != 6:
            raise UsageError(f"{path}:{lineno}: expected 6 fields")
        try:
            record.append(
                k=int(cells[0]),
                wall_time_s=float(cells[1]),
                objective=float(cells[2]),
                gap_ref=None if cells[3] == "" else float(cells[3]),
                pd_gap=None if cells[4] == "" else float(cells[4]),
                iterate_norm=float(cells[5]),
            )
        except ValueError:
            raise UsageError(f"{path}:{lineno}: malformed number") from None
    return record


@dataclass
class RunConfig:
    """Flat run description; every key has the same name in config files.

    log_every = 0 means automatic (1 for runs up to 10^4 iterations,
    otherwise 10). x0_fill / y0_fill override the all-zeros initialization
    with constant-filled vectors.
    """

    problem: str = "fused-elastic-net"
    algorithm: str = "acv-general"
    max_iters: int = 1000
    seed: int = 0
    output_path: str = "runs"
    log_every: int = 0
    reference_iters_multiplier: int = 10
    deterministic_timing: bool = True
    gap_threshold: float = 1e-6
    pd_gap: bool = False
    x0_fill: float = 0.0
    y0_fill: float = 0.0
    tune_grid: str = "primal"
    tune_jmax: int = 4

    dataset: str = "synthetic"
    n_samples: int = 200
    n_features: int = 50
    density: float = 0.2
    noise_std: float = 0.1

    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 1e3
    beta: float = 0.5
    smoothed: bool = False
    pair_fraction: float = 0.1

    height: int = 32
    width: int = 32
    forward: str = "mask"
    keep_fraction: float = 0.25
    blur_half_width: int = 2
    image_noise_std: float = 0.02
    mu_g: float = 0.0
    rho1: float = 1.0

    def __post_init__(self):
        if self.problem not in PROBLEM_FAMILIES:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {PROBLEM_FAMILIES}")
        if self.algorithm not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.max_iters < 0:
            raise UsageError("max_iters must be >= 0")
        if self.log_every < 0:
            raise UsageError("log_every must be >= 0 (0 = automatic)")
        if self.reference_iters_multiplier < 1:
            raise UsageError("reference_iters_multiplier must be >= 1")
        if self.tune_grid not in ("primal", "dual"):
            raise UsageError("tune_grid must be 'primal' or 'dual'")

    def resolved_log_every(self) -> int:
        if self.log_every > 0:
            return self.log_every
        return 1 if self.max_iters <= 10_000 else 10


def _parse_bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_CONVERTERS = {bool: _parse_bool, int: int, float: float, str: str}


def read_config(path) -> RunConfig:
    """Parse a flat key = value file with '#' comments into a RunConfig.

    Unknown keys are an error listing every offender; later duplicates of
    a key override earlier ones.
    """
    field_types = {f.name: f.type for f in fields(RunConfig)}
    # dataclass field types arrive as strings under deferred annotations
    type_map = {"str": str, "int": int, "float": float, "bool": bool}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}") from None
    values = {}
    unknown = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = key.strip(), val.strip()
        if key not in field_types:
            unknown.append(key)
            continue
        ftype = field_types[key]
        pytype = type_map[ftype] if isinstance(ftype, str) else ftype
        try:
            values[key] = _CONVERTERS[pytype](val)
        except ValueError as err:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {err}") from None
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {', '.join(sorted(set(unknown)))}")
    return RunConfig(**values)
