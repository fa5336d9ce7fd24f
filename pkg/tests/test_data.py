import numpy as np
import pytest

from coopinit.data import DatasetSpec, grid, line_1d, log_density, mode_centers, ring, sample_batch
from coopinit.errors import ConfigError, ContractError


def test_ring_centers():
    np.testing.assert_allclose(mode_centers(ring(k=4, radius=1.0)),
                               [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-12)


def test_grid_centers():
    c = mode_centers(grid(2, 2, spacing=1.0, sigma=0.1))
    assert sorted(map(tuple, c)) == [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]


def test_line_centers():
    np.testing.assert_allclose(mode_centers(line_1d(k=3, spacing=2.0))[:, 0], [-2, 0, 2])


def test_centers_distinct():
    for spec in (ring(k=8), grid(3, 4, 1.0, 0.1), line_1d(k=5)):
        c = mode_centers(spec)
        assert len(c) == spec.n_modes == len({tuple(np.round(r, 12)) for r in c})


@pytest.mark.parametrize("kw", [dict(k=0), dict(sigma=0.0), dict(radius=-1.0), dict(kind="spiral")])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        DatasetSpec(**{"kind": "gaussian_ring", **kw})


def test_degenerate_sigma_hits_centers():
    spec = ring(sigma=1e-12)
    x = sample_batch(spec, 1000, np.random.default_rng(0))
    d = np.linalg.norm(x[:, None] - mode_centers(spec)[None], axis=2).min(axis=1)
    assert d.max() < 1e-6


def test_component_occupancy():
    spec = ring(k=8, radius=2.0, sigma=0.02)
    n = 80_000
    x = sample_batch(spec, n, np.random.default_rng(1))
    labels = np.linalg.norm(x[:, None] - mode_centers(spec)[None], axis=2).argmin(axis=1)
    counts = np.bincount(labels, minlength=8)
    p = 1 / 8
    assert np.all(np.abs(counts - n * p) <= 3 * np.sqrt(n * p * (1 - p)))


def test_sampler_deterministic():
    spec = ring()
    a = sample_batch(spec, 100, np.random.default_rng(5))
    b = sample_batch(spec, 100, np.random.default_rng(5))
    assert a.tobytes() == b.tobytes()


def test_empty_batch_rejected():
    with pytest.raises(ContractError):
        sample_batch(ring(), 0, np.random.default_rng(0))


def test_log_density_normalizer():
    spec = ring(k=1, radius=1e-9, sigma=1.0)
    # single mode essentially at the origin
    assert abs(log_density(spec, np.zeros(2)) - np.log(1 / (2 * np.pi))) < 1e-12


def test_log_density_rotation_symmetry():
    spec = ring(k=8)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 2)) * 2
    a = 2 * np.pi / 8
    rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    assert np.abs(log_density(spec, x) - log_density(spec, x @ rot.T)).max() < 1e-10


def test_log_density_integrates_to_one():
    spec = ring(k=8, radius=2.0, sigma=0.3)
    g = np.linspace(-5, 5, 801)
    h = g[1] - g[0]
    xx, yy = np.meshgrid(g, g)
    dens = np.exp(log_density(spec, np.column_stack([xx.ravel(), yy.ravel()])))
    assert abs(dens.sum() * h * h - 1.0) < 1e-3


def test_sampler_density_total_variation():
    spec = ring(k=8, radius=2.0, sigma=0.3)
    x = sample_batch(spec, 1_000_000, np.random.default_rng(3))
    edges = np.linspace(-3.5, 3.5, 51)
    hist, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=[edges, edges])
    emp = hist / len(x)
    # exact bin masses by fine sub-grid quadrature
    sub = 20
    fine = np.linspace(-3.5, 3.5, 50 * sub + 1)
    mid = 0.5 * (fine[1:] + fine[:-1])
    xx, yy = np.meshgrid(mid, mid, indexing="ij")
    dens = np.exp(log_density(spec, np.column_stack([xx.ravel(), yy.ravel()]))).reshape(xx.shape)
    exact = dens.reshape(50, sub, 50, sub).sum(axis=(1, 3)) * (fine[1] - fine[0]) ** 2
    assert 0.5 * np.abs(emp - exact).sum() < 0.02


def test_round_trip_dict():
    spec = grid(3, 2, 1.5, 0.2, seed=4)
    assert DatasetSpec.from_dict(spec.to_dict()) == spec
