"""Benchmark problem generation and CSV loading.

Benchmark definitions (formula, variables, sampling of train and test
partitions) live in `benchmarks.yaml` next to this module; the file is the
single source of truth for ranges and sample counts, so results stay
comparable across versions.  Random partitions derive from the benchmark
name and the caller's seed; grids ignore the seed entirely.
"""
from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np
import yaml

__all__ = [
    "Dataset", "DatasetError", "benchmark_ids", "benchmark_info", "generate",
    "load_csv",
]

_DATA_STREAM = 0xDA7A


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    name: str
    feature_names: tuple[str, ...]
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray | None = None
    y_test: np.ndarray | None = None

    def __post_init__(self):
        if len(self.feature_names) == 0:
            raise DatasetError("dataset needs at least one feature")
        if self.X_train.ndim != 2 or self.X_train.shape[1] != len(self.feature_names):
            raise DatasetError(
                f"X_train shape {self.X_train.shape} does not match "
                f"{len(self.feature_names)} features")
        if self.X_train.shape[0] == 0:
            raise DatasetError("training partition is empty")
        if self.y_train.shape != (self.X_train.shape[0],):
            raise DatasetError("y_train length does not match X_train")
        if not np.isfinite(self.X_train).all() or not np.isfinite(self.y_train).all():
            raise DatasetError("training data contains non-finite values")
        if (self.X_test is None) != (self.y_test is None):
            raise DatasetError("test features and targets must come together")
        if self.X_test is not None:
            if self.X_test.ndim != 2 or self.X_test.shape[1] != len(self.feature_names):
                raise DatasetError("X_test feature count mismatch")
            if self.y_test.shape != (self.X_test.shape[0],):
                raise DatasetError("y_test length does not match X_test")
            if not np.isfinite(self.X_test).all() or not np.isfinite(self.y_test).all():
                raise DatasetError("test data contains non-finite values")


def _harmonic(x: np.ndarray) -> np.ndarray:
    return np.array([np.sum(1.0 / np.arange(1.0, round(v) + 1.0)) for v in x])


_FORMULA_ENV = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "cbrt": np.cbrt, "arcsinh": np.arcsinh, "abs": np.abs,
    "harmonic": _harmonic, "pi": math.pi,
}

_catalog_cache: dict | None = None


def _catalog() -> dict:
    global _catalog_cache
    if _catalog_cache is None:
        text = resources.files("enumsr").joinpath("benchmarks.yaml").read_text()
        _catalog_cache = yaml.safe_load(text)
    return _catalog_cache


def benchmark_ids() -> list[str]:
    return list(_catalog()["benchmarks"])


def benchmark_info(benchmark_id: str) -> dict:
    """Raw catalog entry (formula, variables, partition definitions)."""
    benchmarks = _catalog()["benchmarks"]
    if benchmark_id not in benchmarks:
        known = ", ".join(benchmarks)
        raise DatasetError(f"unknown benchmark {benchmark_id!r} (known: {known})")
    return benchmarks[benchmark_id]


def _axis_grid(spec: dict) -> np.ndarray:
    start, stop, step_size = (float(spec["start"]), float(spec["stop"]),
                              float(spec["step"]))
    count = int(round((stop - start) / step_size)) + 1
    return np.linspace(start, stop, count)


def _sample_partition(part: dict, variables: Sequence[str],
                      rng: np.random.Generator) -> np.ndarray:
    kind = part["sampling"]
    if kind == "grid":
        axes = [_axis_grid(part["axes"][name]) for name in variables]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    if kind == "uniform":
        n = int(part["n"])
        cols = []
        for name in variables:
            low, high = part["ranges"][name]
            cols.append(rng.uniform(float(low), float(high), n))
        return np.column_stack(cols)
    raise DatasetError(f"unknown sampling kind {kind!r}")


def _apply_formula(formula: str, variables: Sequence[str], X: np.ndarray
                   ) -> np.ndarray:
    env = dict(_FORMULA_ENV)
    for j, name in enumerate(variables):
        env[name] = X[:, j]
    y = eval(formula, {"__builtins__": {}}, env)  # catalog text is package data
    return np.asarray(y, dtype=np.float64) + np.zeros(X.shape[0])


def generate(benchmark_id: str, seed: int = 1) -> Dataset:
    """Materialize a benchmark problem.

    The same (benchmark_id, seed) pair always produces identical matrices;
    different benchmarks draw from unrelated streams even with equal seeds.
    """
    info = benchmark_info(benchmark_id)
    variables = list(info["variables"])
    rng = np.random.default_rng(np.random.SeedSequence(
        [_DATA_STREAM, zlib.crc32(benchmark_id.encode()), seed]))
    X_train = _sample_partition(info["train"], variables, rng)
    X_test = _sample_partition(info["test"], variables, rng)
    y_train = _apply_formula(info["formula"], variables, X_train)
    y_test = _apply_formula(info["formula"], variables, X_test)
    return Dataset(benchmark_id, tuple(variables), X_train, y_train,
                   X_test, y_test)


def load_csv(path: str, target_column: str, train_fraction: float = 0.75,
             seed: int = 1, train_rows: tuple[int, int] | None = None,
             test_rows: tuple[int, int] | None = None) -> Dataset:
    """Load a numeric CSV with a header row.

    All non-target columns become features, in file order.  The split is
    either explicit half-open row ranges (train_rows/test_rows) or a
    seed-shuffled fraction; mixing the two is an error.
    """
    if (train_rows is None) != (test_rows is None):
        raise DatasetError("train_rows and test_rows must be given together")
    if train_rows is None and not 0.0 < train_fraction <= 1.0:
        raise DatasetError(f"train_fraction {train_fraction} not in (0, 1]")
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DatasetError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise DatasetError(
                f"target column {target_column!r} not in header {header}")
        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{line_no}: expected {len(header)} cells, got {len(row)}")
            parsed = []
            for name, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DatasetError(
                        f"{path}:{line_no}: non-numeric value {cell.strip()!r} "
                        f"in column {name!r}") from None
            rows.append(parsed)
    if not rows:
        raise DatasetError(f"{path} has no data rows")
    table = np.asarray(rows, dtype=np.float64)
    target_idx = header.index(target_column)
    feature_names = tuple(h for h in header if h != target_column)
    feature_idx = [i for i, h in enumerate(header) if h != target_column]
    X = table[:, feature_idx]
    y = table[:, target_idx]

    n = len(rows)
    if train_rows is not None:
        tr = _check_range("train_rows", train_rows, n)
        te = _check_range("test_rows", test_rows, n)
        train_sel = np.arange(tr[0], tr[1])
        test_sel = np.arange(te[0], te[1])
    else:
        order = np.random.default_rng(np.random.SeedSequence(
            [_DATA_STREAM, zlib.crc32(b"csv-split"), seed])).permutation(n)
        n_train = max(1, int(round(train_fraction * n)))
        train_sel = order[:n_train]
        test_sel = order[n_train:]
    if len(test_sel) == 0:
        return Dataset(path, feature_names, X[train_sel], y[train_sel])
    return Dataset(path, feature_names, X[train_sel], y[train_sel],
                   X[test_sel], y[test_sel])


def _check_range(label: str, bounds: tuple[int, int], n: int) -> tuple[int, int]:
    start, stop = bounds
    if not 0 <= start < stop <= n:
        raise DatasetError(
            f"{label} {start}:{stop} out of bounds for {n} rows")
    return start, stop
