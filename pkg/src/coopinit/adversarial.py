"""Adversarial losses for the second stage, in minimisation form.

Each function returns ``(loss, grad)`` where ``grad`` is taken with respect to
the parameters of the network being trained (descriptor for ``d_loss``,
generator for ``g_loss``). Scores are the descriptor outputs used as logits.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ContractError, NumericError, ShapeError
from .generator import Generator

LOSS_KINDS = ("ns", "hinge", "was", "was_gp")


@dataclass(frozen=True)
class AdversarialConfig:
    loss_kind: str = "ns"
    gamma: float = 0.0
    lambda_gp: float = 10.0
    lr_d: float = 1e-3
    lr_g: float = 1e-3

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError("adversarial.loss_kind", f"must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.gamma < 0:
            raise ConfigError("adversarial.gamma", "must be >= 0")
        if self.gamma > 0 and self.loss_kind != "ns":
            raise ConfigError("adversarial.gamma", "R1 regularisation is only paired with the ns loss")
        if self.lambda_gp < 0 or (self.loss_kind == "was_gp" and not self.lambda_gp > 0):
            raise ConfigError("adversarial.lambda_gp", "must be > 0 for was_gp and >= 0 otherwise")
        if self.lr_d < 0 or self.lr_g < 0:
            raise ConfigError("adversarial.lr_d", "learning rates must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AdversarialConfig":
        return cls(**d)


def softplus(x):
    return np.logaddexp(0.0, x)


def _check_batches(*batches):
    for b in batches:
        if len(b) == 0:
            raise ContractError("adversarial losses need non-empty batches")
    dims = {np.shape(b)[1] for b in batches}
    if len(dims) != 1:
        raise ShapeError(f"batch dimensions disagree: {sorted(dims)}")


def _finite(loss):
    if not np.isfinite(loss):
        raise NumericError(f"non-finite adversarial loss {loss}")
    return float(loss)


def interpolate(real, fake, rng: np.random.Generator):
    """Points uniformly placed on the segments joining paired real/fake rows."""
    if len(real) != len(fake):
        raise ContractError("gradient penalty pairs real and fake rows; batch sizes must match")
    alpha = rng.random((len(real), 1))
    return alpha * real + (1.0 - alpha) * fake, alpha


def gradient_penalty(d, points) -> tuple[float, np.ndarray]:
    """``mean((|grad_x D| - 1)^2)`` at ``points`` and its parameter gradient (unscaled)."""
    points = np.asarray(points, dtype=np.float64)
    g = d.input_grad(points)
    norms = np.sqrt((g * g).sum(axis=1))
    n = len(points)
    value = float(np.mean((norms - 1.0) ** 2))
    u = (2.0 * (norms - 1.0) / np.maximum(norms, 1e-12) / n)[:, None] * g
    return value, d.input_grad_vjp(points, u)[1]


def r1_penalty(d, real_batch) -> tuple[float, np.ndarray]:
    """``mean(|grad_x D(real)|^2)`` and its parameter gradient, before the gamma/2 factor."""
    real_batch = np.asarray(real_batch, dtype=np.float64)
    g = d.input_grad(real_batch)
    n = len(real_batch)
    value = float((g * g).sum() / n)
    return value, d.input_grad_vjp(real_batch, 2.0 * g / n)[1]


def _score_grads(kind, s_real, s_fake):
    """Loss and d loss / d score for the discriminator side."""
    nr, nf = len(s_real), len(s_fake)
    if kind == "ns":
        loss = softplus(-s_real).mean() + softplus(s_fake).mean()
        return loss, -expit(-s_real) / nr, expit(s_fake) / nf
    if kind == "hinge":
        loss = np.maximum(0.0, 1.0 - s_real).mean() + np.maximum(0.0, 1.0 + s_fake).mean()
        return loss, -(s_real < 1.0).astype(float) / nr, (s_fake > -1.0).astype(float) / nf
    loss = s_fake.mean() - s_real.mean()
    return loss, np.full(nr, -1.0 / nr), np.full(nf, 1.0 / nf)


def d_loss(cfg: AdversarialConfig, d, real_batch, fake_batch,
           rng: np.random.Generator | None = None) -> tuple[float, np.ndarray]:
    real_batch = np.asarray(real_batch, dtype=np.float64)
    fake_batch = np.asarray(fake_batch, dtype=np.float64)
    _check_batches(real_batch, fake_batch)
    x = np.concatenate([real_batch, fake_batch])
    s = d.forward(x)[:, 0]
    nr = len(real_batch)
    loss, up_r, up_f = _score_grads(cfg.loss_kind, s[:nr], s[nr:])
    grad = d.param_grad(x, np.concatenate([up_r, up_f])[:, None])
    if cfg.loss_kind == "was_gp":
        if rng is None:
            raise ContractError("was_gp needs a random generator for the interpolation")
        points, _ = interpolate(real_batch, fake_batch, rng)
        gp, gp_grad = gradient_penalty(d, points)
        loss = loss + cfg.lambda_gp * gp
        grad = grad + cfg.lambda_gp * gp_grad
    if cfg.gamma > 0:
        r1, r1_grad = r1_penalty(d, real_batch)
        loss = loss + 0.5 * cfg.gamma * r1
        grad = grad + 0.5 * cfg.gamma * r1_grad
    return _finite(loss), grad


def g_loss(cfg: AdversarialConfig, d, g: Generator, z_batch) -> tuple[float, np.ndarray]:
    """Generator loss; gradients pass through the descriptor's input only."""
    z_batch = g.net._check(z_batch)
    if len(z_batch) == 0:
        raise ContractError("g_loss needs a non-empty latent batch")
    cache = g.net._forward_cache(z_batch)
    fake = cache[1][-1]
    s = d.forward(fake)[:, 0]
    n = len(s)
    if cfg.loss_kind == "ns":
        loss = softplus(-s).mean()
        dl_ds = -expit(-s) / n
    else:
        loss = -s.mean()
        dl_ds = np.full(n, -1.0 / n)
    _, dl_dx = d.backward(fake, dl_ds[:, None])
    grad = g.net.backward(z_batch, dl_dx, cache)[0]
    return _finite(loss), grad
