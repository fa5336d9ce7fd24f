"""The descriptor viewed as an unnormalised density ``exp(D(x)) / Z``.

The same scalar output doubles as the discriminator logit once training turns
adversarial, so nothing here is specific to either stage except the
maximum-likelihood estimator and its exact 1D oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DatasetSpec, log_density, mode_centers
from .errors import ContractError, ShapeError


class GridError(ContractError):
    """The enumeration grid leaves non-negligible model mass at its edges."""


class Descriptor:
    """Score network with an optional fixed Gaussian reference term.

    ``score(x) = net(x) - |x|^2 / (2 ref_sigma^2)``; with ``ref_sigma=None`` (the
    default used in training) the score is the raw network output. The
    reference term does not depend on the parameters, so it only changes input
    gradients and the normaliser.
    """

    def __init__(self, net, ref_sigma: float | None = None):
        if net.output_dim != 1:
            raise ContractError("descriptor network must have a scalar output")
        self.net = net
        self.ref_sigma = ref_sigma

    @property
    def params(self):
        return self.net.params

    @params.setter
    def params(self, value):
        self.net.params = value

    @property
    def param_count(self) -> int:
        return self.net.param_count

    @property
    def input_dim(self) -> int:
        return self.net.input_dim

    output_dim = 1

    def copy(self) -> "Descriptor":
        return Descriptor(self.net.copy(), self.ref_sigma)

    def forward(self, x):
        out = self.net.forward(x)
        if self.ref_sigma is not None:
            x = np.asarray(x, dtype=np.float64)
            out = out - 0.5 * (x * x).sum(axis=1, keepdims=True) / self.ref_sigma ** 2
        return out

    __call__ = forward

    def backward(self, x, upstream):
        gp, gx = self.net.backward(x, upstream)
        if self.ref_sigma is not None:
            gx = gx - np.asarray(upstream).reshape(-1, 1) * np.asarray(x) / self.ref_sigma ** 2
        return gp, gx

    def param_grad(self, x, upstream):
        return self.net.param_grad(x, upstream)

    def input_grad(self, x):
        g = self.net.input_grad(x)
        if self.ref_sigma is not None:
            g = g - np.asarray(x) / self.ref_sigma ** 2
        return g

    def input_grad_vjp(self, x, u):
        g, grad = self.net.input_grad_vjp(x, u)
        if self.ref_sigma is not None:
            g = g - np.asarray(x) / self.ref_sigma ** 2
        return g, grad

    def per_sample_param_grad(self, x):
        return self.net.per_sample_param_grad(x)


def score(d: Descriptor, batch) -> np.ndarray:
    """Negative energy of each row; higher means more probable."""
    return d.forward(batch)[:, 0]


def mle_gradient(d: Descriptor, real_batch, synth_batch) -> np.ndarray:
    """Contrastive estimate of the log-likelihood gradient (an ascent direction).

    ``mean grad D(real) - mean grad D(synth)``.
    """
    real_batch = np.asarray(real_batch, dtype=np.float64)
    synth_batch = np.asarray(synth_batch, dtype=np.float64)
    if len(real_batch) == 0 or len(synth_batch) == 0:
        raise ContractError("mle_gradient needs non-empty real and synthesized batches")
    if real_batch.shape[1:] != synth_batch.shape[1:]:
        raise ShapeError(f"dimension mismatch: {real_batch.shape} vs {synth_batch.shape}")
    # two separate passes so identical batches cancel exactly
    pos = d.param_grad(real_batch, np.full((len(real_batch), 1), 1.0 / len(real_batch)))
    neg = d.param_grad(synth_batch, np.full((len(synth_batch), 1), 1.0 / len(synth_batch)))
    return pos - neg


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    bins: int

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    def midpoints(self) -> np.ndarray:
        return self.lo + (np.arange(self.bins) + 0.5) * self.width


def _check_grid(spec: DatasetSpec, grid: Grid1D):
    if spec.dim != 1:
        raise ContractError("the enumeration oracle works on 1D datasets only")
    if grid.bins < 256:
        raise GridError(f"need at least 256 bins, got {grid.bins}")
    c = mode_centers(spec)[:, 0]
    if grid.lo > c.min() - 6 * spec.sigma or grid.hi < c.max() + 6 * spec.sigma:
        raise GridError("grid must extend at least 6 sigma beyond every mode")


def gibbs_weights(d: Descriptor, grid: Grid1D, boundary_tol: float = 1e-6) -> np.ndarray:
    """Normalised ``exp(D)`` on the grid midpoints.

    Raises :class:`GridError` when the two edge bins together hold more than
    ``boundary_tol`` of the mass, i.e. the grid does not contain the model.
    """
    x = grid.midpoints()[:, None]
    s = score(d, x)
    w = np.exp(s - s.max())
    w /= w.sum()
    edge = w[0] + w[-1]
    if edge > boundary_tol:
        raise GridError(f"edge bins hold {edge:.3g} of the model mass (limit {boundary_tol:g})")
    return w


def exact_loglik_grad_oracle(d: Descriptor, spec: DatasetSpec, grid: Grid1D,
                             boundary_tol: float = 1e-6) -> np.ndarray:
    """Log-likelihood gradient with both expectations computed by enumeration.

    The data expectation uses the exact mixture density on the grid, the model
    expectation the normalised Gibbs weights. Deterministic; meant for tests.
    """
    _check_grid(spec, grid)
    x = grid.midpoints()[:, None]
    w_model = gibbs_weights(d, grid, boundary_tol)
    logp = log_density(spec, x)
    w_data = np.exp(logp - logp.max())
    w_data /= w_data.sum()
    return d.param_grad(x, (w_data - w_model)[:, None])


def sample_gibbs_grid(d: Descriptor, grid: Grid1D, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws from the discretised model: inverse-CDF over bins, returned at midpoints."""
    w = gibbs_weights(d, grid, boundary_tol=np.inf)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    idx = np.minimum(idx, grid.bins - 1)
    return grid.midpoints()[idx][:, None]
