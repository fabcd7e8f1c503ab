"""Gaussian kernel density estimation with percentile-based extrapolation flagging.

The density model scores points in standardized feature space with an
isotropic Gaussian kernel. Points scoring below a percentile threshold of
the reference scores (default: the bottom 10%) count as extrapolation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class DensityModel:
    """Fitted KDE: reference points, bandwidth, and the log-density threshold.

    reference_points : (M, d) array, standardized feature rows
    bandwidth        : isotropic kernel width, > 0
    log_threshold    : percentile of the reference points' own log-densities
    percentile       : threshold level in (0, 1)
    """

    reference_points: np.ndarray
    bandwidth: float
    log_threshold: float
    percentile: float

    @property
    def n_features(self) -> int:
        return self.reference_points.shape[1]


def fit_kde(X_std: np.ndarray, bandwidth: float = 0.3, percentile: float = 0.10) -> DensityModel:
    """Fit a Gaussian KDE on standardized rows and compute the flag threshold.

    The threshold is the linear-interpolation percentile of the reference
    rows' own log-density scores; scores strictly below it flag as
    extrapolation.
    """
    X_std = np.asarray(X_std, dtype=float)
    if X_std.ndim != 2 or X_std.shape[0] < 1:
        raise ValueError("reference matrix must be 2-D with at least one row")
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if not 0 < percentile < 1:
        raise ValueError(f"percentile must lie in (0, 1), got {percentile}")

    refs = X_std.copy()
    scores = _mixture_log_densities(refs, float(bandwidth), refs)
    threshold = float(np.percentile(scores, 100.0 * percentile, method="linear"))
    return DensityModel(
        reference_points=refs,
        bandwidth=float(bandwidth),
        log_threshold=threshold,
        percentile=float(percentile),
    )


def _mixture_log_densities(refs: np.ndarray, h: float, X: np.ndarray) -> np.ndarray:
    # (n, M) squared distances; M is small per the design, exact sums only
    sq = np.sum((X[:, None, :] - refs[None, :, :]) ** 2, axis=-1)
    log_kernel = logsumexp(-sq / (2.0 * h * h), axis=1)
    norm = np.log(refs.shape[0]) + 0.5 * refs.shape[1] * np.log(2.0 * np.pi * h * h)
    return log_kernel - norm


def log_densities(model: DensityModel, X: np.ndarray) -> np.ndarray:
    """Log of the Gaussian-mixture density for each row of X.

    log p(x) = logsumexp_j( -|x - x_j|^2 / (2 h^2) ) - log M - (d/2) log(2 pi h^2)

    Evaluated with log-sum-exp so far-away queries underflow to large
    negative values instead of -inf surprises from exp() rounding.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    refs = model.reference_points
    if X.shape[1] != refs.shape[1]:
        raise ValueError(f"query has {X.shape[1]} features, model expects {refs.shape[1]}")
    return _mixture_log_densities(refs, model.bandwidth, X)


def log_density(model: DensityModel, x: np.ndarray) -> float:
    """Log-density of a single d-vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a single d-vector; use log_densities for batches")
    return float(log_densities(model, x[None, :])[0])


def is_extrapolation(model: DensityModel, x: np.ndarray) -> bool:
    """True iff the point scores strictly below the threshold (ties interpolate)."""
    return log_density(model, x) < model.log_threshold


def low_density_subset(model: DensityModel, X: np.ndarray) -> np.ndarray:
    """Indices of rows flagged as extrapolation, in row order."""
    scores = log_densities(model, X)
    return np.flatnonzero(scores < model.log_threshold)


def export_scores(model: DensityModel, X: np.ndarray, path) -> None:
    """Write per-row log-density scores and flags as CSV (index, score, flag)."""
    scores = log_densities(model, X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "log_density", "extrapolation"])
        for i, s in enumerate(scores):
            writer.writerow([i, format(s, ".17g"), int(s < model.log_threshold)])
