import sys

import numpy as np
import pytest

from coopinit.nn import Mlp, MlpConfig


def max_rel_err(a, b):
    """Coordinate-wise relative error with a floor at 1e-3 of the largest entry,
    so near-zero coordinates are judged on an absolute scale."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    floor = 1e-3 * max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-12)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / scale).max())


def fd_grad(f, p, h=1e-5):
    """Central differences of scalar f at vector p."""
    p = np.array(p, dtype=np.float64)
    out = np.empty_like(p)
    for i in range(p.size):
        old = p[i]
        p[i] = old + h
        fp = f(p)
        p[i] = old - h
        fm = f(p)
        p[i] = old
        out[i] = (fp - fm) / (2 * h)
    return out


def random_mlp(rng, input_dim=None, output_dim=None, activation=None):
    cfg = MlpConfig(
        input_dim=input_dim or int(rng.integers(1, 4)),
        hidden_dims=tuple(int(h) for h in rng.integers(1, 7, size=rng.integers(1, 3))),
        output_dim=output_dim or int(rng.integers(1, 3)),
        activation=activation or ("leaky_relu", "tanh")[rng.integers(2)],
        slope=float(rng.uniform(0.05, 0.5)),
        seed=int(rng.integers(2**32)),
    )
    return Mlp(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts, one line per criterion, after the run."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
