"""Cooperative EBM initialization followed by adversarial GAN training, on
synthetic low-dimensional data, with exact oracles and metrics."""

__version__ = "0.1.0"

from .data import DatasetSpec, log_density, mode_centers, sample_batch  # noqa: E402
from .errors import (  # noqa: E402
    CoopInitError, ConfigError, ContractError, FormatError, NumericError, ShapeError,
    TrainingError,
)
from .langevin import LangevinConfig, run_chain  # noqa: E402
from .metrics import energy_distance, mode_coverage  # noqa: E402
from .trainer import TrainConfig, init_state, run, train_gan_baseline  # noqa: E402

__all__ = [
    "DatasetSpec", "log_density", "mode_centers", "sample_batch",
    "CoopInitError", "ConfigError", "ContractError", "FormatError", "NumericError",
    "ShapeError", "TrainingError", "LangevinConfig", "run_chain", "energy_distance",
    "mode_coverage", "TrainConfig", "init_state", "run", "train_gan_baseline",
]
