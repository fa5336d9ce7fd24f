import numpy as np
import pytest

from coopinit.errors import ContractError, ShapeError
from coopinit.generator import Generator, LatentPrior, generate, sample_latents, teaching_loss_grad
from coopinit.nn import AdamState, Mlp, MlpConfig, adam_step

from conftest import fd_grad, max_rel_err


def linear_generator(w):
    w = np.asarray(w, dtype=float)  # (z_dim, x_dim)
    cfg = MlpConfig(input_dim=w.shape[0], hidden_dims=(), output_dim=w.shape[1])
    return Generator(Mlp(cfg, np.concatenate([w.ravel(), np.zeros(w.shape[1])])))


def small_generator(seed, z=3, x=2):
    return Generator(Mlp(MlpConfig(z, (5, 4), x, "tanh", seed=seed)))


def test_latent_moments():
    g = small_generator(0, z=4)
    z = sample_latents(g, 100_000, np.random.default_rng(0))
    assert z.shape == (100_000, 4)
    assert np.abs(z.mean(axis=0)).max() < 0.02
    assert np.abs(z.std(axis=0) - 1).max() < 0.01


def test_latents_reproducible_and_validated():
    g = small_generator(0)
    a = sample_latents(g, 10, np.random.default_rng(3))
    assert a.tobytes() == sample_latents(g, 10, np.random.default_rng(3)).tobytes()
    with pytest.raises(ContractError):
        sample_latents(g, 0, np.random.default_rng(0))


def test_identity_and_zero_generators(rng):
    z = rng.normal(size=(5, 2))
    np.testing.assert_array_equal(generate(linear_generator(np.eye(2)), z), z)
    np.testing.assert_array_equal(generate(linear_generator(np.zeros((2, 2))), z), 0.0)


def test_generate_shape_error():
    with pytest.raises(ShapeError):
        generate(small_generator(0), np.zeros((2, 5)))


def test_prior_must_match_net():
    with pytest.raises(ShapeError):
        Generator(Mlp(MlpConfig(3, (4,), 2)), LatentPrior(2))


def test_teaching_fixed_point(rng):
    g = small_generator(1)
    z = rng.normal(size=(6, 3))
    loss, grad = teaching_loss_grad(g, z, generate(g, z))
    assert loss == 0.0
    np.testing.assert_array_equal(grad, 0.0)


def test_teaching_linear_analytic(rng):
    w = rng.normal(size=(3, 2))
    g = linear_generator(w)
    z = rng.normal(size=(1, 3))
    target = rng.normal(size=(1, 2))
    _, grad = teaching_loss_grad(g, z, target)
    expected = 2 * np.outer(z[0], z[0] @ w - target[0])  # (z_dim, x_dim) like W
    np.testing.assert_allclose(grad[:6].reshape(3, 2), expected, rtol=1e-10, atol=1e-12)


def test_teaching_shape_error(rng):
    with pytest.raises(ShapeError):
        teaching_loss_grad(small_generator(0), rng.normal(size=(4, 3)), np.zeros((4, 3)))


def test_teaching_grad_finite_differences():
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(100):
        g = small_generator(i)
        z = rng.normal(size=(4, 3))
        target = rng.normal(size=(4, 2))
        _, grad = teaching_loss_grad(g, z, target)

        def f(p):
            return teaching_loss_grad(Generator(Mlp(g.net.config, p)), z, target)[0]

        worst = max(worst, max_rel_err(grad, fd_grad(f, g.params)))
    assert worst < 1e-4


def test_teaching_contraction():
    rng = np.random.default_rng(8)
    for i in range(100):
        g = small_generator(1000 + i)
        z = rng.normal(size=(8, 3))
        target = rng.normal(size=(8, 2))
        loss, grad = teaching_loss_grad(g, z, target)
        p, _ = adam_step(AdamState.zeros(g.param_count, lr=1e-4), g.params, grad)
        after, _ = teaching_loss_grad(Generator(Mlp(g.net.config, p)), z, target)
        assert after < loss
