"""Run-config files (YAML) and command-line overrides.

Schema, version 1::

    format_version: 1
    dataset:     {kind, k, radius, sigma, rows, cols, spacing, seed}
    train:       {n, total_examples, ncoop_frac | n_coop + n_adv, coop_lr_d, coop_lr_g,
                  beta1, beta2, carry_adam, seed, eval_every, eval_samples,
                  checkpoint_every, snapshot_every, record_wall_time}
    langevin:    {eta, steps, noise_enabled, clip_norm}
    adversarial: {loss_kind, gamma, lambda_gp, lr_d, lr_g}
    model:       {latent_dim, g_hidden, d_hidden, g_activation, d_activation, slope}

Every section and key is optional; missing values take the library defaults.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import yaml

from .adversarial import AdversarialConfig
from .data import DatasetSpec
from .errors import ConfigError
from .langevin import LangevinConfig
from .trainer import ModelConfig, TrainConfig

CONFIG_VERSION = 1
SECTIONS = ("format_version", "dataset", "train", "langevin", "adversarial", "model")
SWEEP_AXES = ("ncoop_frac", "eta", "steps_t", "gamma", "lr")


def _build(kls, section: str, values: dict, **extra):
    values = dict(values or {})
    values.update(extra)
    known = set(kls.__dataclass_fields__)
    for key in values:
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown field")
    try:
        return kls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(section, str(exc)) from exc


def parse_config(doc: dict) -> tuple[TrainConfig, DatasetSpec]:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a mapping")
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError(key, "unknown section")
    version = doc.get("format_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError("format_version", f"unsupported version {version!r}")
    for section in SECTIONS[1:]:
        if section in doc and not isinstance(doc[section], (dict, type(None))):
            raise ConfigError(section, "must be a mapping")

    dataset = _build(DatasetSpec, "dataset", doc.get("dataset"))
    langevin = _build(LangevinConfig, "langevin", doc.get("langevin"))
    adv = _build(AdversarialConfig, "adversarial", doc.get("adversarial"))
    model = _build(ModelConfig, "model", doc.get("model"))

    train = dict(doc.get("train") or {})
    total = train.pop("total_examples", None)
    frac = train.pop("ncoop_frac", None)
    if frac is not None and ("n_coop" in train or "n_adv" in train):
        raise ConfigError("train.ncoop_frac", "give either ncoop_frac or n_coop/n_adv, not both")
    for key in ("n", "n_coop", "n_adv", "seed", "eval_every", "eval_samples",
                "checkpoint_every", "snapshot_every"):
        if key in train and not isinstance(train[key], int):
            raise ConfigError(f"train.{key}", f"must be an integer, got {train[key]!r}")
    cfg = _build(TrainConfig, "train", train, langevin=langevin, adv=adv, model=model)
    if frac is not None or total is not None:
        cfg = cfg.with_fraction(cfg.n_coop / cfg.total if frac is None and cfg.total else (frac or 0.0),
                                total=int(total) if total is not None else cfg.total)
    return cfg, dataset


def load_config(path) -> tuple[TrainConfig, DatasetSpec]:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML: {exc}") from exc
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc}") from exc
    return parse_config(doc or {})


def config_to_doc(cfg: TrainConfig, dataset: DatasetSpec) -> dict:
    train = {k: v for k, v in cfg.to_dict().items() if k not in ("langevin", "adv", "model")}
    return {
        "format_version": CONFIG_VERSION,
        "dataset": dataset.to_dict(),
        "train": train,
        "langevin": cfg.langevin.to_dict(),
        "adversarial": cfg.adv.to_dict(),
        "model": cfg.model.to_dict(),
    }


def dump_config(cfg: TrainConfig, dataset: DatasetSpec) -> str:
    return yaml.safe_dump(config_to_doc(cfg, dataset), sort_keys=True)


def apply_overrides(cfg: TrainConfig, *, seed=None, loss=None, eta=None, steps_t=None,
                    ncoop_frac=None, gamma=None, lr=None) -> TrainConfig:
    """Apply command-line style overrides; ``lr`` sets both adversarial learning rates."""
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    adv = cfg.adv
    if loss is not None or gamma is not None or lr is not None:
        adv = _build(AdversarialConfig, "adversarial", {
            **adv.to_dict(),
            **({"loss_kind": loss} if loss is not None else {}),
            **({"gamma": float(gamma)} if gamma is not None else {}),
            **({"lr_d": float(lr), "lr_g": float(lr)} if lr is not None else {}),
        })
    lang = cfg.langevin
    if eta is not None or steps_t is not None:
        lang = _build(LangevinConfig, "langevin", {
            **lang.to_dict(),
            **({"eta": float(eta)} if eta is not None else {}),
            **({"steps": int(steps_t)} if steps_t is not None else {}),
        })
    cfg = replace(cfg, adv=adv, langevin=lang)
    if ncoop_frac is not None:
        cfg = cfg.with_fraction(float(ncoop_frac))
    return cfg


def override_for_axis(axis: str, value) -> dict:
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"must be one of {SWEEP_AXES}, got {axis!r}")
    return {axis: value}
