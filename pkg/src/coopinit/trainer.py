"""Cooperative initialisation followed by adversarial training.

A run consumes examples in batches of ``n``. The first ``ceil(n_coop / n)``
iterations are cooperative (Langevin-revised generator samples teach both
networks), the next ``ceil(n_adv / n)`` are plain GAN updates. Parameters
cross the boundary untouched; the two stages never share a loss.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .adversarial import AdversarialConfig, d_loss, g_loss
from .data import DatasetSpec, mode_centers, sample_batch
from .ebm import Descriptor, mle_gradient, score
from .errors import ConfigError, ContractError, CoopInitError, TrainingError
from .generator import Generator, LatentPrior, generate, sample_latents, teaching_loss_grad
from .langevin import LangevinConfig, run_chain
from .metrics import energy_distance, mode_coverage
from .nn import AdamState, Mlp, MlpConfig, adam_step
from .persistence import RunRecord

log = logging.getLogger(__name__)

COOPERATIVE = "cooperative"
ADVERSARIAL = "adversarial"
DONE = "done"
STAGES = (COOPERATIVE, ADVERSARIAL, DONE)


@dataclass(frozen=True)
class ModelConfig:
    latent_dim: int = 16
    g_hidden: tuple[int, ...] = (64, 64)
    d_hidden: tuple[int, ...] = (64, 64)
    g_activation: str = "tanh"
    d_activation: str = "leaky_relu"
    slope: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "g_hidden", tuple(int(h) for h in self.g_hidden))
        object.__setattr__(self, "d_hidden", tuple(int(h) for h in self.d_hidden))
        if self.latent_dim < 1:
            raise ConfigError("model.latent_dim", "must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["g_hidden"] = list(self.g_hidden)
        d["d_hidden"] = list(self.d_hidden)
        return d


@dataclass(frozen=True)
class TrainConfig:
    n: int = 256
    n_coop: int = 60_000
    n_adv: int = 1_940_000
    langevin: LangevinConfig = field(default_factory=LangevinConfig)
    adv: AdversarialConfig = field(default_factory=AdversarialConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    coop_lr_d: float = 1e-3
    coop_lr_g: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    carry_adam: bool = False
    seed: int = 0
    eval_every: int = 100_000
    eval_samples: int = 2_000
    checkpoint_every: int = 0
    snapshot_every: int = 0
    record_wall_time: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("train.n", "batch size must be >= 1")
        if self.n_coop < 0:
            raise ConfigError("train.n_coop", "must be >= 0")
        if self.n_adv < 0:
            raise ConfigError("train.n_adv", "must be >= 0")
        if not self.coop_lr_d > 0 or not self.coop_lr_g > 0:
            raise ConfigError("train.coop_lr_d", "cooperative learning rates must be > 0")
        if self.eval_every < 1:
            raise ConfigError("train.eval_every", "must be >= 1")
        if self.eval_samples < 1:
            raise ConfigError("train.eval_samples", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("train.seed", "must be an unsigned 64-bit integer")

    @property
    def total(self) -> int:
        return self.n_coop + self.n_adv

    def with_fraction(self, frac: float, total: int | None = None) -> "TrainConfig":
        """Split ``total`` examples so that ``frac`` of them are cooperative."""
        if not 0.0 <= frac <= 1.0:
            raise ConfigError("train.ncoop_frac", f"must lie in [0, 1], got {frac}")
        total = self.total if total is None else total
        n_coop = int(round(frac * total))
        return replace(self, n_coop=n_coop, n_adv=total - n_coop)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("langevin", "adv", "model")}
        d["langevin"] = self.langevin.to_dict()
        d["adv"] = self.adv.to_dict()
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"train.{sorted(extra)[0]}", "unknown field")
        sub = {
            "langevin": (LangevinConfig, "langevin"),
            "adv": (AdversarialConfig, "adversarial"),
            "model": (ModelConfig, "model"),
        }
        for key, (kls, section) in sub.items():
            if key in d:
                fields = set(kls.__dataclass_fields__)
                bad = set(d[key]) - fields
                if bad:
                    raise ConfigError(f"{section}.{sorted(bad)[0]}", "unknown field")
                d[key] = kls(**d[key])
        return cls(**d)


@dataclass(frozen=True)
class Schedule:
    coop_iters: int
    adv_iters: int
    n: int

    @property
    def coop_end(self) -> int:
        return self.coop_iters * self.n

    @property
    def end(self) -> int:
        return self.coop_end + self.adv_iters * self.n

    def stage_at(self, consumed: int) -> str:
        if consumed < self.coop_end:
            return COOPERATIVE
        if consumed < self.end:
            return ADVERSARIAL
        return DONE


def schedule(cfg: TrainConfig) -> Schedule:
    return Schedule(math.ceil(cfg.n_coop / cfg.n), math.ceil(cfg.n_adv / cfg.n), cfg.n)


@dataclass
class TrainerState:
    config: TrainConfig
    dataset: DatasetSpec
    d: Descriptor
    g: Generator
    adam_d: AdamState
    adam_g: AdamState
    consumed: int
    stage: str
    rng: np.random.Generator
    transition_at: int | None = None
    last_d_loss: float = float("nan")
    last_g_loss: float = float("nan")


def network_configs(cfg: TrainConfig, dataset: DatasetSpec) -> tuple[MlpConfig, MlpConfig]:
    d_seed, g_seed = (int(s) for s in np.random.SeedSequence([cfg.seed, 0xD]).generate_state(2, np.uint64))
    m = cfg.model
    d_cfg = MlpConfig(dataset.dim, m.d_hidden, 1, m.d_activation, m.slope, d_seed)
    g_cfg = MlpConfig(m.latent_dim, m.g_hidden, dataset.dim, m.g_activation, m.slope, g_seed)
    return d_cfg, g_cfg


def _adam_pair(cfg: TrainConfig, stage: str, d_size: int, g_size: int):
    if stage == COOPERATIVE:
        lr_d, lr_g = cfg.coop_lr_d, cfg.coop_lr_g
    else:
        lr_d, lr_g = cfg.adv.lr_d, cfg.adv.lr_g
    return (AdamState.zeros(d_size, lr_d, cfg.beta1, cfg.beta2),
            AdamState.zeros(g_size, lr_g, cfg.beta1, cfg.beta2))


def init_state(cfg: TrainConfig, dataset: DatasetSpec, stage: str | None = None) -> TrainerState:
    d_cfg, g_cfg = network_configs(cfg, dataset)
    d = Descriptor(Mlp(d_cfg))
    g = Generator(Mlp(g_cfg), LatentPrior(cfg.model.latent_dim))
    stage = stage or schedule(cfg).stage_at(0)
    adam_d, adam_g = _adam_pair(cfg, stage, d.param_count, g.param_count)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7]))
    return TrainerState(cfg, dataset, d, g, adam_d, adam_g, 0, stage, rng)


def _check_finite(state: TrainerState):
    bad = [name for name, p in (("descriptor", state.d.params), ("generator", state.g.params))
           if not np.isfinite(p).all()]
    if bad:
        raise TrainingError(
            f"non-finite {' and '.join(bad)} parameters at consumed={state.consumed}",
            snapshot=_diagnostics(state),
        )


def _diagnostics(state: TrainerState) -> dict:
    return {
        "consumed": state.consumed,
        "stage": state.stage,
        "d_loss": state.last_d_loss,
        "g_loss": state.last_g_loss,
        "d_params_finite": bool(np.isfinite(state.d.params).all()),
        "g_params_finite": bool(np.isfinite(state.g.params).all()),
        "d_param_absmax": float(np.nanmax(np.abs(state.d.params))),
        "g_param_absmax": float(np.nanmax(np.abs(state.g.params))),
    }


def coop_iteration(state: TrainerState, real_batch: np.ndarray) -> TrainerState:
    """One cooperative step: propose, revise by Langevin, teach D then G.

    The descriptor update uses chains run under the pre-update descriptor and the
    generator regresses onto the very same revised samples.
    """
    if state.stage != COOPERATIVE:
        raise ContractError(f"coop_iteration called in stage {state.stage!r}")
    cfg = state.config
    n = len(real_batch)
    z = sample_latents(state.g, n, state.rng)
    proposals = generate(state.g, z)
    revised, _ = run_chain(state.d, proposals, cfg.langevin, state.rng)

    grad_d = mle_gradient(state.d, real_batch, revised)
    s = score(state.d, np.concatenate([real_batch, revised]))
    state.last_d_loss = float(s[n:].mean() - s[:n].mean())
    state.d.params, state.adam_d = adam_step(state.adam_d, state.d.params, grad_d, maximize=True)

    state.last_g_loss, grad_g = teaching_loss_grad(state.g, z, revised)
    state.g.params, state.adam_g = adam_step(state.adam_g, state.g.params, grad_g)
    state.consumed += n
    return state


def adv_iteration(state: TrainerState, real_batch: np.ndarray) -> TrainerState:
    """One discriminator step then one generator step, each on fresh latents."""
    if state.stage != ADVERSARIAL:
        raise ContractError(f"adv_iteration called in stage {state.stage!r}")
    cfg = state.config.adv
    n = len(real_batch)
    fake = generate(state.g, sample_latents(state.g, n, state.rng))
    state.last_d_loss, grad_d = d_loss(cfg, state.d, real_batch, fake, state.rng)
    state.d.params, state.adam_d = adam_step(state.adam_d, state.d.params, grad_d)

    z = sample_latents(state.g, n, state.rng)
    state.last_g_loss, grad_g = g_loss(cfg, state.d, state.g, z)
    state.g.params, state.adam_g = adam_step(state.adam_g, state.g.params, grad_g)
    state.consumed += n
    return state


def enter_adversarial(state: TrainerState) -> TrainerState:
    """Switch stage in place. Parameters are kept as they are; Adam moments are
    reset unless ``carry_adam`` is set."""
    cfg = state.config
    if cfg.carry_adam:
        state.adam_d = replace(state.adam_d, lr=cfg.adv.lr_d)
        state.adam_g = replace(state.adam_g, lr=cfg.adv.lr_g)
    else:
        state.adam_d, state.adam_g = _adam_pair(cfg, ADVERSARIAL, state.d.param_count, state.g.param_count)
    state.stage = ADVERSARIAL
    state.transition_at = state.consumed
    log.info("cooperative stage finished at %d examples", state.consumed)
    return state


def eval_rng(state: TrainerState) -> np.random.Generator:
    """Evaluation randomness keyed on (seed, consumed); never touches the training stream."""
    return np.random.default_rng(np.random.SeedSequence([state.config.seed, state.consumed, 0xE]))


def eval_samples(state: TrainerState):
    rng = eval_rng(state)
    m = state.config.eval_samples
    fake = generate(state.g, sample_latents(state.g, m, rng))
    real = sample_batch(state.dataset, m, rng)
    return fake, real


def evaluate(state: TrainerState, wall_ms: int = 0) -> RunRecord:
    fake, real = eval_samples(state)
    ds = state.dataset
    cov = mode_coverage(fake, mode_centers(ds), ds.sigma)
    ed = energy_distance(fake, real)
    return RunRecord(
        consumed=state.consumed,
        stage=state.stage,
        d_loss=state.last_d_loss,
        g_loss=state.last_g_loss,
        modes_covered=cov.modes_covered,
        hq_fraction=cov.high_quality_fraction,
        energy_distance=ed.value,
        wall_ms=wall_ms,
    )


@dataclass
class RunSinks:
    """Optional callbacks fired while a run progresses."""

    record: Callable[[RunRecord], None] | None = None
    checkpoint: Callable[[TrainerState], None] | None = None
    snapshot: Callable[[TrainerState], None] | None = None


def _crossed(before: int, after: int, every: int) -> bool:
    return every > 0 and before // every < after // every


def run(cfg: TrainConfig, dataset: DatasetSpec, sinks: RunSinks | None = None,
        state: TrainerState | None = None, stop_at: int | None = None):
    """Train according to the two-stage schedule.

    Starts from ``state`` when given (e.g. a loaded checkpoint) and stops once
    ``stop_at`` examples are consumed or the schedule ends. Returns the final
    state and the list of records emitted. On failure the records produced so
    far have already been passed to the sinks.
    """
    sinks = sinks or RunSinks()
    sched = schedule(cfg)
    if state is None:
        state = init_state(cfg, dataset)
    limit = sched.end if stop_at is None else min(stop_at, sched.end)
    records: list[RunRecord] = []
    t0 = time.perf_counter()

    def wall():
        return int((time.perf_counter() - t0) * 1000) if cfg.record_wall_time else 0

    def emit():
        rec = evaluate(state, wall())
        records.append(rec)
        if sinks.record:
            sinks.record(rec)

    if state.consumed == 0:
        emit()
        if sinks.snapshot and cfg.snapshot_every > 0:
            sinks.snapshot(state)

    while state.consumed < limit:
        stage = sched.stage_at(state.consumed)
        if stage == ADVERSARIAL and state.stage == COOPERATIVE:
            enter_adversarial(state)
        before = state.consumed
        real = sample_batch(dataset, cfg.n, state.rng)
        try:
            if stage == COOPERATIVE:
                coop_iteration(state, real)
            else:
                adv_iteration(state, real)
        except TrainingError:
            raise
        except CoopInitError as exc:
            raise TrainingError(f"{type(exc).__name__} at consumed={state.consumed}: {exc}",
                                snapshot=_diagnostics(state)) from exc
        _check_finite(state)
        if state.consumed >= sched.end:
            state.stage = DONE
        if _crossed(before, state.consumed, cfg.eval_every) or state.stage == DONE:
            emit()
        if sinks.snapshot and _crossed(before, state.consumed, cfg.snapshot_every):
            sinks.snapshot(state)
        if sinks.checkpoint and _crossed(before, state.consumed, cfg.checkpoint_every):
            sinks.checkpoint(state)
    return state, records


def train_gan_baseline(cfg: TrainConfig, dataset: DatasetSpec, stop_at: int | None = None) -> TrainerState:
    """Plain adversarial training for ``ceil(n_adv / n)`` iterations, no cooperative code involved."""
    state = init_state(cfg, dataset, stage=ADVERSARIAL)
    limit = math.ceil(cfg.n_adv / cfg.n) * cfg.n
    if stop_at is not None:
        limit = min(limit, stop_at)
    while state.consumed < limit:
        adv_iteration(state, sample_batch(dataset, cfg.n, state.rng))
    return state
