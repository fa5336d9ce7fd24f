"""Latent prior, ancestral sampling and the MCMC-teaching regression loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .nn import Mlp


@dataclass(frozen=True)
class LatentPrior:
    dim: int
    kind: str = "standard_normal"

    def __post_init__(self):
        if self.dim < 1:
            raise ContractError(f"latent dim must be >= 1, got {self.dim}")


class Generator:
    def __init__(self, net: Mlp, prior: LatentPrior | None = None):
        self.net = net
        self.prior = prior or LatentPrior(net.input_dim)
        if self.prior.dim != net.input_dim:
            raise ShapeError(f"prior dim {self.prior.dim} != network input dim {net.input_dim}")

    @property
    def params(self):
        return self.net.params

    @params.setter
    def params(self, value):
        self.net.params = value

    @property
    def param_count(self) -> int:
        return self.net.param_count

    def copy(self) -> "Generator":
        return Generator(self.net.copy(), self.prior)


def sample_latents(g: Generator, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ContractError(f"need at least one latent, got n={n}")
    return rng.standard_normal((n, g.prior.dim))


def generate(g: Generator, z) -> np.ndarray:
    return g.net.forward(z)


def teaching_loss_grad(g: Generator, z_batch, revised) -> tuple[float, np.ndarray]:
    """``(1/n) sum_i |revised_i - G(z_i)|^2`` and its gradient in the generator parameters.

    ``revised`` is a constant target; nothing is propagated into the chain.
    """
    revised = np.asarray(revised, dtype=np.float64)
    z_batch = g.net._check(z_batch)
    cache = g.net._forward_cache(z_batch)
    out = cache[1][-1]
    if revised.shape != out.shape:
        raise ShapeError(f"revised batch {revised.shape} does not match generator output {out.shape}")
    n = out.shape[0]
    resid = out - revised
    loss = float((resid * resid).sum() / n)
    grad = g.net.backward(z_batch, 2.0 * resid / n, cache)[0]
    return loss, grad
