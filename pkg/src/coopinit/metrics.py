"""Mode coverage and energy distance for low-dimensional samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ContractError


@dataclass(frozen=True)
class CoverageReport:
    modes_total: int
    modes_covered: int
    high_quality_fraction: float
    per_mode_counts: tuple[int, ...]


@dataclass(frozen=True)
class EnergyDistanceReport:
    value: float
    n_x: int
    n_y: int


def mode_coverage(samples, centers, sigma: float, threshold_k: float = 3.0,
                  min_count: int | None = None) -> CoverageReport:
    """Count samples within ``threshold_k * sigma`` of their nearest center.

    A mode is covered when at least ``min_count`` such samples land on it; the
    default is ``max(1, n // (10 * modes))``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if centers.ndim == 1:
        centers = centers[:, None]
    if len(samples) == 0:
        raise ContractError("mode_coverage needs at least one sample")
    n, k = len(samples), len(centers)
    if min_count is None:
        min_count = max(1, n // (10 * k))
    dist = cdist(samples, centers)
    nearest = dist.argmin(axis=1)
    good = dist[np.arange(n), nearest] <= threshold_k * sigma
    counts = np.bincount(nearest[good], minlength=k)
    return CoverageReport(
        modes_total=k,
        modes_covered=int((counts >= min_count).sum()),
        high_quality_fraction=float(good.mean()),
        per_mode_counts=tuple(int(c) for c in counts),
    )


def energy_distance(x_samples, y_samples) -> EnergyDistanceReport:
    """``2 E|X-Y| - E|X-X'| - E|Y-Y'|`` averaged over all ordered pairs (V-statistic)."""
    x = np.asarray(x_samples, dtype=np.float64)
    y = np.asarray(y_samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if len(x) == 0 or len(y) == 0:
        raise ContractError("energy_distance needs non-empty samples")
    value = 2.0 * cdist(x, y).mean() - cdist(x, x).mean() - cdist(y, y).mean()
    # the V-statistic is non-negative; clamp round-off
    return EnergyDistanceReport(max(float(value), 0.0), len(x), len(y))
