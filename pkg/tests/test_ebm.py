import numpy as np
import pytest

from coopinit.data import line_1d, log_density, sample_batch
from coopinit.ebm import (
    Descriptor, Grid1D, GridError, exact_loglik_grad_oracle, gibbs_weights, mle_gradient,
    sample_gibbs_grid, score,
)
from coopinit.errors import ContractError, ShapeError
from coopinit.nn import Mlp, MlpConfig


def linear_descriptor(w):
    w = np.atleast_1d(np.asarray(w, dtype=float))
    cfg = MlpConfig(input_dim=w.size, hidden_dims=())
    return Descriptor(Mlp(cfg, np.concatenate([w, [0.0]])))


def smooth_descriptor(seed=0, hidden=(8,)):
    return Descriptor(Mlp(MlpConfig(1, hidden, 1, "tanh", seed=seed)), ref_sigma=2.0)


def test_zero_net_scores_zero(rng):
    cfg = MlpConfig(input_dim=2, hidden_dims=(4,))
    d = Descriptor(Mlp(cfg, np.zeros(cfg.param_count)))
    np.testing.assert_array_equal(score(d, rng.normal(size=(5, 2))), 0.0)


def test_final_bias_shift(rng):
    d = Descriptor(Mlp(MlpConfig(input_dim=2, hidden_dims=(4,))))
    x = rng.normal(size=(5, 2))
    base = score(d, x)
    d.params = d.params.copy()
    d.params[-1] += 1.5
    np.testing.assert_array_equal(score(d, x), base + 1.5)


def test_mle_gradient_cancels_on_equal_batches(rng):
    d = Descriptor(Mlp(MlpConfig(input_dim=2, hidden_dims=(6, 6))))
    x = rng.normal(size=(8, 2))
    np.testing.assert_array_equal(mle_gradient(d, x, x.copy()), 0.0)


def test_mle_gradient_linear_case():
    d = linear_descriptor([0.3, -0.2])
    g = mle_gradient(d, np.array([[1.0, 2.0]]), np.array([[-0.5, 4.0]]))
    np.testing.assert_allclose(g[:2], [1.5, -2.0], rtol=0, atol=1e-15)
    assert g[2] == 0.0


def test_bias_coordinate_cancels(rng):
    d = Descriptor(Mlp(MlpConfig(input_dim=2, hidden_dims=(5,))))
    g = mle_gradient(d, rng.normal(size=(10, 2)), rng.normal(size=(10, 2)) + 3)
    assert abs(g[-1]) < 1e-15


def test_ascent_direction_on_linear_model(rng):
    d = linear_descriptor([0.1, 0.1])
    real = rng.normal(size=(20, 2)) + [2, 0]
    synth = rng.normal(size=(20, 2))
    gap = score(d, real).mean() - score(d, synth).mean()
    d.params = d.params + 0.01 * mle_gradient(d, real, synth)
    assert score(d, real).mean() - score(d, synth).mean() > gap


def test_mle_gradient_errors():
    d = linear_descriptor([1.0, 1.0])
    with pytest.raises(ContractError):
        mle_gradient(d, np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        mle_gradient(d, np.zeros((3, 2)), np.zeros((3, 3)))


def test_oracle_uniform_scores():
    spec = line_1d()
    cfg = MlpConfig(input_dim=1, hidden_dims=(4,), activation="tanh", seed=3)
    net = Mlp(cfg)
    # zero the output weights: the net is then a constant function, but its
    # parameter gradient is not zero
    net.layers()[-1][0][:] = 0.0
    grid = Grid1D(-3.0, 3.0, 512)
    d = Descriptor(net)
    x = grid.midpoints()[:, None]
    per = d.per_sample_param_grad(x)
    logp = log_density(spec, x)
    w = np.exp(logp - logp.max())
    w /= w.sum()
    expected = (w[:, None] * per).sum(axis=0) - per.mean(axis=0)
    np.testing.assert_allclose(exact_loglik_grad_oracle(d, spec, grid, boundary_tol=np.inf),
                               expected, rtol=0, atol=1e-8)


def test_grid_checks():
    spec = line_1d()
    d = smooth_descriptor()
    with pytest.raises(GridError):
        exact_loglik_grad_oracle(d, spec, Grid1D(-14, 14, 128))
    with pytest.raises(GridError):
        exact_loglik_grad_oracle(d, spec, Grid1D(-2.2, 2.2, 512))
    with pytest.raises(GridError):
        gibbs_weights(Descriptor(Mlp(MlpConfig(1, (4,), 1, "tanh"))), Grid1D(-3, 3, 512))


def test_oracle_grid_converged():
    spec = line_1d()
    for seed in range(3):
        d = smooth_descriptor(seed)
        a = exact_loglik_grad_oracle(d, spec, Grid1D(-14, 14, 512))
        b = exact_loglik_grad_oracle(d, spec, Grid1D(-14, 14, 1024))
        assert np.abs(a - b).max() / np.abs(b).max() < 1e-6


def test_gibbs_sampler_matches_weights():
    d = smooth_descriptor(1)
    grid = Grid1D(-14, 14, 256)
    x = sample_gibbs_grid(d, grid, 200_000, np.random.default_rng(0))[:, 0]
    idx = np.round((x - grid.lo) / grid.width - 0.5).astype(int)
    freq = np.bincount(idx, minlength=grid.bins) / len(x)
    assert 0.5 * np.abs(freq - gibbs_weights(d, grid)).sum() < 0.02


def test_exact_gradient_training_converges():
    """Ascending the exact log-likelihood gradient recovers the mixture and
    scores real data above far out-of-support points."""
    from coopinit.nn import AdamState, adam_step

    spec = line_1d(sigma=0.5)
    d = Descriptor(Mlp(MlpConfig(1, (16, 16), 1, "tanh", seed=0)), ref_sigma=3.0)
    grid = Grid1D(-15, 15, 512)
    state = AdamState.zeros(d.param_count, lr=1e-2, beta1=0.9)
    for _ in range(1500):
        d.params, state = adam_step(state, d.params, exact_loglik_grad_oracle(d, spec, grid), maximize=True)
    x = grid.midpoints()[:, None]
    p = np.exp(log_density(spec, x))
    assert 0.5 * np.abs(gibbs_weights(d, grid) - p / p.sum()).sum() < 0.02
    real = sample_batch(spec, 2000, np.random.default_rng(0))
    outliers = np.array([[-6.0], [-5.0], [-4.0], [4.0], [5.0], [6.0]])
    assert score(d, real).mean() > score(d, outliers).mean()
