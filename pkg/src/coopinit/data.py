"""Equal-weight Gaussian mixtures with known centers and exact densities."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, ContractError

KINDS = ("gaussian_ring", "gaussian_grid", "gaussian_line_1d")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian_ring"
    k: int = 8
    radius: float = 2.0
    sigma: float = 0.05
    rows: int = 0
    cols: int = 0
    spacing: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("dataset.kind", f"must be one of {KINDS}, got {self.kind!r}")
        if not self.sigma > 0:
            raise ConfigError("dataset.sigma", "must be > 0")
        if self.kind == "gaussian_ring":
            if self.k < 1:
                raise ConfigError("dataset.k", "must be >= 1")
            if not self.radius > 0:
                raise ConfigError("dataset.radius", "must be > 0")
        elif self.kind == "gaussian_grid":
            if self.rows < 1 or self.cols < 1:
                raise ConfigError("dataset.rows", "rows and cols must be >= 1")
            if not self.spacing > 0:
                raise ConfigError("dataset.spacing", "must be > 0")
        else:
            if self.k < 1:
                raise ConfigError("dataset.k", "must be >= 1")
            if not self.spacing > 0:
                raise ConfigError("dataset.spacing", "must be > 0")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "gaussian_line_1d" else 2

    @property
    def n_modes(self) -> int:
        return self.rows * self.cols if self.kind == "gaussian_grid" else self.k

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"dataset.{sorted(extra)[0]}", "unknown field")
        return cls(**d)


def ring(k=8, radius=2.0, sigma=0.05, seed=0) -> DatasetSpec:
    return DatasetSpec("gaussian_ring", k=k, radius=radius, sigma=sigma, seed=seed)


def grid(rows, cols, spacing, sigma, seed=0) -> DatasetSpec:
    return DatasetSpec("gaussian_grid", k=rows * cols, radius=0.0, sigma=sigma,
                       rows=rows, cols=cols, spacing=spacing, seed=seed)


def line_1d(k=3, spacing=2.0, sigma=0.1, seed=0) -> DatasetSpec:
    return DatasetSpec("gaussian_line_1d", k=k, radius=0.0, sigma=sigma, spacing=spacing, seed=seed)


def mode_centers(spec: DatasetSpec) -> np.ndarray:
    """Centers as a ``(modes, dim)`` array in a fixed order."""
    if spec.kind == "gaussian_ring":
        angles = 2.0 * np.pi * np.arange(spec.k) / spec.k
        return spec.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if spec.kind == "gaussian_grid":
        ys = (np.arange(spec.rows) - (spec.rows - 1) / 2.0) * spec.spacing
        xs = (np.arange(spec.cols) - (spec.cols - 1) / 2.0) * spec.spacing
        yy, xx = np.meshgrid(ys, xs, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)
    return ((np.arange(spec.k) - (spec.k - 1) / 2.0) * spec.spacing)[:, None]


def sample_batch(spec: DatasetSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ContractError(f"batch size must be >= 1, got {n}")
    centers = mode_centers(spec)
    comp = rng.integers(len(centers), size=n)
    return centers[comp] + spec.sigma * rng.standard_normal((n, spec.dim))


def log_density(spec: DatasetSpec, x) -> np.ndarray:
    """Exact log density of the mixture at each row of ``x`` (or at one point)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim <= 1 and x.size == spec.dim
    x = x.reshape(-1, spec.dim)
    centers = mode_centers(spec)
    d = spec.dim
    sq = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    log_norm = -0.5 * d * np.log(2.0 * np.pi * spec.sigma ** 2)
    out = logsumexp(-0.5 * sq / spec.sigma ** 2, axis=1) - np.log(len(centers)) + log_norm
    return out[0] if single else out
