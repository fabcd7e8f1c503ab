"""Tabular loading, feature standardization, and density-based test partitioning."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .density import DensityModel, fit_kde, log_densities


class DataError(Exception):
    """Raised for unreadable files, bad cells, or degenerate columns."""


@dataclass(frozen=True)
class RawTable:
    """Parsed regression table: named feature columns plus a target vector."""

    feature_names: list[str]
    rows: np.ndarray
    target: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform to zero mean and unit population std."""

    means: np.ndarray
    std_devs: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.std_devs

    def inverse(self, X_std: np.ndarray) -> np.ndarray:
        return np.asarray(X_std, dtype=float) * self.std_devs + self.means


@dataclass(frozen=True)
class SplitDataset:
    """Train / test-interpolation / test-extrapolation partition.

    Feature matrices are stored in the standardized frame the density model
    and all downstream models operate in; `standardizer` maps back to
    original units. Index lists refer to rows of the source table and are
    pairwise disjoint.
    """

    train: tuple[np.ndarray, np.ndarray]
    test_interp: tuple[np.ndarray, np.ndarray]
    test_extrap: tuple[np.ndarray, np.ndarray]
    standardizer: Standardizer
    train_idx: np.ndarray
    interp_idx: np.ndarray
    extrap_idx: np.ndarray
    seed: int


def load_csv(path, target_column: str) -> RawTable:
    """Load an RFC-4180 CSV with a header row into a RawTable.

    All non-target columns become features, in header order. Any cell that
    does not parse as a finite number is an error naming its row and column.
    """
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not in header {header}")
        target_pos = header.index(target_column)
        feature_names = [name for i, name in enumerate(header) if i != target_pos]
        if not feature_names:
            raise DataError(f"{path}: no feature columns besides target {target_column!r}")

        rows: list[list[float]] = []
        target: list[float] = []
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise DataError(
                    f"{path}: row {line_no} has {len(record)} cells, expected {len(header)}"
                )
            parsed = []
            for col, cell in zip(header, record):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {line_no}, column {col!r}: unparseable cell {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: row {line_no}, column {col!r}: non-finite cell {cell!r}"
                    )
                parsed.append(value)
            target.append(parsed.pop(target_pos))
            rows.append(parsed)

    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows)}")
    return RawTable(
        feature_names=feature_names,
        rows=np.array(rows, dtype=float),
        target=np.array(target, dtype=float),
    )


def fit_standardizer(X: np.ndarray, feature_names: list[str] | None = None) -> Standardizer:
    """Column means and population standard deviations of X.

    Population (ddof=0) std is used so that transforming the fitted data
    gives exactly unit variance. Zero-variance columns are rejected.
    """
    X = np.asarray(X, dtype=float)
    means = X.mean(axis=0)
    std_devs = X.std(axis=0)  # population std
    bad = np.flatnonzero(std_devs == 0.0)
    if bad.size:
        names = (
            [feature_names[i] for i in bad]
            if feature_names is not None
            else [f"column {i}" for i in bad]
        )
        raise DataError(f"zero-variance feature(s): {', '.join(map(str, names))}")
    return Standardizer(means=means, std_devs=std_devs)


def train_test_indices(n_rows: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled train/test row split.

    The same (n_rows, test_fraction, seed) always yields the same split;
    split_by_density re-derives it, so a density model fitted on the train
    rows of this split satisfies its precondition.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    perm = np.random.default_rng(seed).permutation(n_rows)
    n_test = max(1, int(round(n_rows * test_fraction)))
    if n_test >= n_rows:
        n_test = n_rows - 1
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return train_idx, test_idx


def split_by_density(
    table: RawTable, density: DensityModel, test_fraction: float, seed: int
) -> SplitDataset:
    """Split rows into train / test, then classify test rows by train density.

    Precondition: `density` was fitted on the standardized train rows this
    (test_fraction, seed) pair designates. Test rows whose log-density under
    it falls strictly below the train threshold land in test_extrap, the
    rest in test_interp.
    """
    train_idx, test_idx = train_test_indices(table.n_rows, test_fraction, seed)
    std = fit_standardizer(table.rows[train_idx], table.feature_names)
    if density.n_features != table.n_features:
        raise ValueError(
            f"density model has {density.n_features} features, table has {table.n_features}"
        )

    X_test_std = std.transform(table.rows[test_idx])
    scores = log_densities(density, X_test_std)
    extrap_mask = scores < density.log_threshold
    interp_idx = test_idx[~extrap_mask]
    extrap_idx = test_idx[extrap_mask]
    if extrap_idx.size == 0:
        warnings.warn(
            "no test row fell below the density threshold; test_extrap is empty",
            stacklevel=2,
        )

    X_train_std = std.transform(table.rows[train_idx])
    return SplitDataset(
        train=(X_train_std, table.target[train_idx].copy()),
        test_interp=(std.transform(table.rows[interp_idx]), table.target[interp_idx].copy()),
        test_extrap=(std.transform(table.rows[extrap_idx]), table.target[extrap_idx].copy()),
        standardizer=std,
        train_idx=train_idx,
        interp_idx=interp_idx,
        extrap_idx=extrap_idx,
        seed=seed,
    )


def prepare_split(
    table: RawTable,
    test_fraction: float,
    seed: int,
    bandwidth: float = 0.3,
    percentile: float = 0.10,
) -> tuple[SplitDataset, DensityModel]:
    """Standardize the train rows, fit the KDE on them, and split the table."""
    train_idx, _ = train_test_indices(table.n_rows, test_fraction, seed)
    std = fit_standardizer(table.rows[train_idx], table.feature_names)
    density = fit_kde(std.transform(table.rows[train_idx]), bandwidth, percentile)
    return split_by_density(table, density, test_fraction, seed), density


def split_manifest(split: SplitDataset) -> dict:
    """JSON-ready record of the partition: seed plus the three index lists."""
    return {
        "seed": split.seed,
        "train_idx": [int(i) for i in split.train_idx],
        "interp_idx": [int(i) for i in split.interp_idx],
        "extrap_idx": [int(i) for i in split.extrap_idx],
    }


def save_split_manifest(split: SplitDataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(split_manifest(split), fh, indent=2, sort_keys=True)
        fh.write("\n")
