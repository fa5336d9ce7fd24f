"""Small fully connected networks with hand-written backpropagation, and Adam.

Parameters live in one flat float64 vector laid out layer by layer as
``[W1, b1, W2, b2, ...]`` with each ``W`` stored row-major as
``(fan_in, fan_out)``. Hidden layers apply the activation, the output layer
is affine.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, NumericError, ShapeError

ACTIVATIONS = ("leaky_relu", "tanh")


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_dims: tuple[int, ...] = (64, 64)
    output_dim: int = 1
    activation: str = "leaky_relu"
    slope: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ContractError(f"all layer widths must be >= 1, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {self.activation!r}")
        if self.activation == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise ContractError(f"leaky_relu slope must lie in (0, 1), got {self.slope}")
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must be an unsigned 64-bit integer")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @property
    def param_count(self) -> int:
        d = self.dims
        return sum(a * b + b for a, b in zip(d[:-1], d[1:]))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "output_dim": self.output_dim,
            "activation": self.activation,
            "slope": self.slope,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpConfig":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_dims=tuple(d["hidden_dims"]),
            output_dim=int(d["output_dim"]),
            activation=d["activation"],
            slope=float(d["slope"]),
            seed=int(d["seed"]),
        )


def init_params(config: MlpConfig) -> np.ndarray:
    """He-scaled normal weights for leaky-relu nets, Xavier for tanh; zero biases."""
    rng = np.random.default_rng(config.seed)
    chunks = []
    dims = config.dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        if config.activation == "tanh":
            std = np.sqrt(2.0 / (fan_in + fan_out))
        else:
            std = np.sqrt(2.0 / fan_in)
        chunks.append(rng.standard_normal(fan_in * fan_out) * std)
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


class Mlp:
    """Feedforward network whose state is exactly ``params``.

    All derivative methods are pure: they read ``params`` and never write it.
    """

    def __init__(self, config: MlpConfig, params: np.ndarray | None = None):
        self.config = config
        if params is None:
            params = init_params(config)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (config.param_count,):
            raise ShapeError(f"expected {config.param_count} parameters, got shape {params.shape}")
        self.params = params
        self._slices = []
        offset = 0
        dims = config.dims
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = slice(offset, offset + fan_in * fan_out)
            offset += fan_in * fan_out
            b = slice(offset, offset + fan_out)
            offset += fan_out
            self._slices.append((w, b, fan_in, fan_out))

    @property
    def param_count(self) -> int:
        return self.params.size

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    @property
    def output_dim(self) -> int:
        return self.config.output_dim

    def copy(self) -> "Mlp":
        return Mlp(self.config, self.params.copy())

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into ``params``; writing to them edits the network."""
        return [
            (self.params[w].reshape(fi, fo), self.params[b])
            for w, b, fi, fo in self._slices
        ]

    def _weights(self):
        return self.layers()

    # activations -------------------------------------------------------

    def _act(self, a):
        if self.config.activation == "tanh":
            return np.tanh(a)
        return np.where(a > 0, a, self.config.slope * a)

    def _dact(self, a, h):
        if self.config.activation == "tanh":
            return 1.0 - h * h
        return np.where(a > 0, 1.0, self.config.slope)

    def _d2act(self, a, h):
        if self.config.activation == "tanh":
            return -2.0 * h * (1.0 - h * h)
        return None  # piecewise linear

    # forward / backward ------------------------------------------------

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.config.input_dim:
            raise ShapeError(f"expected batch of shape (n, {self.config.input_dim}), got {x.shape}")
        if not np.isfinite(x).all():
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(x))[0])
            raise NumericError(f"non-finite network input at {bad}", index=bad)
        return x

    def _forward_cache(self, x):
        pre, post = [], [x]
        h = x
        layers = self._weights()
        last = len(layers) - 1
        for i, (w, b) in enumerate(layers):
            a = h @ w + b
            pre.append(a)
            h = a if i == last else self._act(a)
            post.append(h)
        return pre, post

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        h = x
        layers = self._weights()
        last = len(layers) - 1
        for i, (w, b) in enumerate(layers):
            h = h @ w + b
            if i != last:
                h = self._act(h)
        return h

    __call__ = forward

    def backward(self, x, upstream, cache=None):
        """Return (d/dparams, d/dx) of ``sum(upstream * forward(x))``."""
        x = self._check(x)
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (x.shape[0], self.config.output_dim):
            raise ShapeError(
                f"upstream shape {upstream.shape} does not match output {(x.shape[0], self.config.output_dim)}"
            )
        pre, post = cache if cache is not None else self._forward_cache(x)
        layers = self._weights()
        grad = np.empty_like(self.params)
        delta = upstream
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            ws, bs, _, _ = self._slices[i]
            grad[ws] = (post[i].T @ delta).ravel()
            grad[bs] = delta.sum(axis=0)
            gh = delta @ w.T
            if i > 0:
                delta = gh * self._dact(pre[i - 1], post[i])
        return grad, gh

    def param_grad(self, x, upstream) -> np.ndarray:
        return self.backward(x, upstream)[0]

    def _require_scalar(self):
        if self.config.output_dim != 1:
            raise ContractError("input gradients are defined for scalar-output networks only")

    def input_grad(self, x) -> np.ndarray:
        """Row i is the gradient of the scalar output at x_i."""
        self._require_scalar()
        x = self._check(x)
        return self.backward(x, np.ones((x.shape[0], 1)))[1]

    def input_grad_vjp(self, x, u):
        """Input gradient ``g`` together with d/dparams of ``sum(u * g)``.

        This differentiates through the backward pass (double backprop), which
        is what gradient penalties on the input gradient need.
        """
        self._require_scalar()
        x = self._check(x)
        u = np.asarray(u, dtype=np.float64)
        if u.shape != x.shape:
            raise ShapeError(f"u shape {u.shape} does not match input {x.shape}")
        pre, post = self._forward_cache(x)
        layers = self._weights()
        L = len(layers)
        n = x.shape[0]

        # backward pass, keeping every intermediate
        deltas = [None] * L  # deltas[i]: d out / d pre[i]
        ghs = [None] * L  # ghs[i]: d out / d post[i]
        deltas[L - 1] = np.ones((n, 1))
        for i in range(L - 1, -1, -1):
            ghs[i] = deltas[i] @ layers[i][0].T
            if i > 0:
                deltas[i - 1] = ghs[i] * self._dact(pre[i - 1], post[i])
        gx = ghs[0]

        grad = np.zeros_like(self.params)
        # reverse through the backward pass, from gx up to the constant head
        ga = [None] * L  # extra adjoints on pre-activations (second-order terms)
        g_gh = u
        for i in range(L):
            w, _ = layers[i]
            ws, _, _, _ = self._slices[i]
            g_delta = g_gh @ w
            grad[ws] += (g_gh.T @ deltas[i]).ravel()
            if i == L - 1:
                break
            dact = self._dact(pre[i], post[i + 1])
            d2 = self._d2act(pre[i], post[i + 1])
            if d2 is not None:
                ga[i] = g_delta * ghs[i + 1] * d2
            g_gh = g_delta * dact

        # push second-order adjoints through the forward graph
        carry = None
        for i in range(L - 2, -1, -1):
            g = ga[i]
            if carry is not None:
                g = carry if g is None else g + carry
            if g is None:
                carry = None
                continue
            ws, bs, _, _ = self._slices[i]
            grad[ws] += (post[i].T @ g).ravel()
            grad[bs] += g.sum(axis=0)
            if i > 0:
                carry = (g @ layers[i][0].T) * self._dact(pre[i - 1], post[i])
            else:
                carry = None
        return gx, grad

    def per_sample_param_grad(self, x, chunk: int = 4096) -> np.ndarray:
        """Matrix whose row i is d forward(x_i) / d params (scalar output only)."""
        self._require_scalar()
        x = self._check(x)
        out = np.empty((x.shape[0], self.param_count))
        layers = self._weights()
        for start in range(0, x.shape[0], chunk):
            xs = x[start:start + chunk]
            pre, post = self._forward_cache(xs)
            delta = np.ones((xs.shape[0], 1))
            rows = out[start:start + chunk]
            for i in range(len(layers) - 1, -1, -1):
                ws, bs, fi, fo = self._slices[i]
                rows[:, ws] = (post[i][:, :, None] * delta[:, None, :]).reshape(xs.shape[0], fi * fo)
                rows[:, bs] = delta
                if i > 0:
                    delta = (delta @ layers[i][0].T) * self._dact(pre[i - 1], post[i])
        return out


class QuadraticScore:
    """Fixed-form score ``D(x) = -1/2 * sum_j prec_j * (x_j - center_j)**2``.

    Its Gibbs distribution is N(center, diag(1/prec)), which makes it the
    reference energy for stationarity and chase checks. Parameters are laid
    out as ``[center, prec]`` and it exposes the same derivative methods as
    :class:`Mlp`.
    """

    output_dim = 1

    def __init__(self, center, prec=None):
        center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        prec = np.ones_like(center) if prec is None else np.broadcast_to(
            np.asarray(prec, dtype=np.float64), center.shape)
        self.params = np.concatenate([center, prec])
        self.dim = center.size

    @property
    def input_dim(self) -> int:
        return self.dim

    @property
    def param_count(self) -> int:
        return self.params.size

    @property
    def center(self):
        return self.params[: self.dim]

    @property
    def prec(self):
        return self.params[self.dim:]

    def copy(self) -> "QuadraticScore":
        return QuadraticScore(self.center.copy(), self.prec.copy())

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError(f"expected batch of shape (n, {self.dim}), got {x.shape}")
        return x

    def forward(self, x):
        r = self._check(x) - self.center
        return -0.5 * (self.prec * r * r).sum(axis=1, keepdims=True)

    __call__ = forward

    def backward(self, x, upstream, cache=None):
        x = self._check(x)
        r = x - self.center
        up = np.asarray(upstream, dtype=np.float64).reshape(-1, 1)
        grad = np.concatenate([(up * self.prec * r).sum(axis=0), (-0.5 * up * r * r).sum(axis=0)])
        return grad, -up * self.prec * r

    def param_grad(self, x, upstream):
        return self.backward(x, upstream)[0]

    def input_grad(self, x):
        return -self.prec * (self._check(x) - self.center)

    def input_grad_vjp(self, x, u):
        x = self._check(x)
        r = x - self.center
        grad = np.concatenate([(u * self.prec).sum(axis=0), -(u * r).sum(axis=0)])
        return -self.prec * r, grad

    def per_sample_param_grad(self, x, chunk=None):
        r = self._check(x) - self.center
        return np.concatenate([self.prec * r, -0.5 * r * r], axis=1)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, lr: float = 1e-3, beta1: float = 0.5,
              beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        if lr < 0:
            raise ContractError(f"learning rate must be non-negative, got {lr}")
        return cls(np.zeros(size), np.zeros(size), 0, lr, beta1, beta2, eps)

    def copy(self) -> "AdamState":
        return replace(self, m=self.m.copy(), v=self.v.copy())


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray,
              maximize: bool = False) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns new arrays; inputs are untouched."""
    if not (params.shape == grad.shape == state.m.shape == state.v.shape):
        raise ShapeError(
            f"length mismatch: params {params.shape}, grad {grad.shape}, moments {state.m.shape}"
        )
    g = -grad if maximize else grad
    t = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step_count=t)
