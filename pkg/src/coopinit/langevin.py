"""Short-run unadjusted Langevin revision of samples under a score network."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, NumericError


@dataclass(frozen=True)
class LangevinConfig:
    eta: float = 1.0
    steps: int = 10
    noise_enabled: bool = True
    rng_seed: int = 0
    clip_norm: float | None = None  # per-sample L2 clip of the score gradient; None disables

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError("langevin.eta", f"must be > 0, got {self.eta}")
        if self.steps < 0:
            raise ConfigError("langevin.steps", f"must be >= 0, got {self.steps}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            raise ConfigError("langevin.clip_norm", "must be > 0 or null")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LangevinConfig":
        return cls(**d)


def _clip(g: np.ndarray, max_norm: float) -> np.ndarray:
    norms = np.sqrt((g * g).sum(axis=1, keepdims=True))
    scale = np.minimum(1.0, max_norm / np.maximum(norms, 1e-300))
    return g * scale


def langevin_step(d, x: np.ndarray, eta: float, noise: bool, rng: np.random.Generator | None,
                  clip_norm: float | None = None) -> np.ndarray:
    """``x + eta * grad_x D(x) + sqrt(2 eta) * N(0, I)``; the noise term is dropped when
    ``noise`` is false. ``x`` is not modified."""
    g = d.input_grad(x)
    if not np.isfinite(g).all():
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(g))[0])
        raise NumericError(f"non-finite score gradient at sample {bad[0]}, coordinate {bad[1]}", index=bad)
    if clip_norm is not None:
        g = _clip(g, clip_norm)
    out = x + eta * g
    if noise:
        out = out + np.sqrt(2.0 * eta) * rng.standard_normal(x.shape)
    return out


def run_chain(d, x0: np.ndarray, cfg: LangevinConfig, rng: np.random.Generator | None = None,
              trace: bool = False):
    """Apply ``cfg.steps`` Langevin steps starting from ``x0``.

    Returns ``(x_T, states)`` where ``states`` lists x_0..x_T when ``trace`` is set
    and is None otherwise. Without an explicit generator the chain draws from
    ``cfg.rng_seed``. The output is a plain array, treated downstream as data.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    x = np.asarray(x0, dtype=np.float64)
    states = [x.copy()] if trace else None
    for _ in range(cfg.steps):
        x = langevin_step(d, x, cfg.eta, cfg.noise_enabled, rng, cfg.clip_norm)
        if trace:
            states.append(x)
    if cfg.steps == 0:
        x = np.array(x0, dtype=np.float64, copy=True)
    return x, states


def write_trace_csv(states, path) -> None:
    """Dump a chain trace as rows of ``step, sample, x0, x1, ...``."""
    dim = states[0].shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "sample", *[f"x{j}" for j in range(dim)]])
        for t, xs in enumerate(states):
            for i, row in enumerate(xs):
                w.writerow([t, i, *(f"{v:.9g}" for v in row)])
