"""Metric logs, run manifests and binary checkpoints.

Checkpoint layout (all integers little-endian)::

    b"COOPCKPT"                 magic
    u32                         format version
    u64 + bytes                 UTF-8 JSON header (configs, counters, rng state)
    6 x (u64 count + f64[count]) theta, phi, adam_d.m, adam_d.v, adam_g.m, adam_g.v

The JSON header is written with sorted keys and no whitespace variance, so
save -> load -> save is byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError

MAGIC = b"COOPCKPT"
FORMAT_VERSION = 1
CSV_HEADER = ("consumed", "stage", "d_loss", "g_loss", "modes_covered",
              "hq_fraction", "energy_distance", "wall_ms")


@dataclass(frozen=True)
class RunRecord:
    consumed: int
    stage: str
    d_loss: float
    g_loss: float
    modes_covered: int
    hq_fraction: float
    energy_distance: float
    wall_ms: int


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def format_record(rec: RunRecord) -> list[str]:
    return [_fmt(getattr(rec, name)) for name in CSV_HEADER]


class MetricsWriter:
    """Append-only CSV sink enforcing strictly increasing ``consumed``."""

    def __init__(self, path):
        self.path = Path(path)
        self.last = None
        if self.path.exists() and self.path.stat().st_size > 0:
            rows = read_records(self.path)
            self.last = rows[-1].consumed if rows else None

    def __call__(self, rec: RunRecord) -> None:
        append_record(self, rec)


def append_record(sink: MetricsWriter, rec: RunRecord) -> None:
    if sink.last is not None and rec.consumed <= sink.last:
        raise ContractError(f"record consumed={rec.consumed} does not follow {sink.last}")
    new = not sink.path.exists() or sink.path.stat().st_size == 0
    with open(sink.path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(CSV_HEADER)
        w.writerow(format_record(rec))
    sink.last = rec.consumed


def read_records(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(header) != CSV_HEADER:
            raise FormatError(f"unexpected metrics header {header}")
        out = []
        for row in reader:
            out.append(RunRecord(
                consumed=int(row[0]), stage=row[1], d_loss=float(row[2]), g_loss=float(row[3]),
                modes_covered=int(row[4]), hq_fraction=float(row[5]),
                energy_distance=float(row[6]), wall_ms=int(row[7]),
            ))
        return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


# checkpoints -----------------------------------------------------------


def _adam_meta(a) -> dict:
    return {"step_count": a.step_count, "lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps}


def _encode_float(x: float):
    # JSON cannot carry nan/inf portably; hex floats are exact
    return float(x).hex()


def checkpoint_bytes(state) -> bytes:
    header = {
        "train_config": state.config.to_dict(),
        "dataset": state.dataset.to_dict(),
        "descriptor_ref_sigma": state.d.ref_sigma,
        "consumed": state.consumed,
        "stage": state.stage,
        "transition_at": state.transition_at,
        "last_d_loss": _encode_float(state.last_d_loss),
        "last_g_loss": _encode_float(state.last_g_loss),
        "rng_state": state.rng.bit_generator.state,
        "adam_d": _adam_meta(state.adam_d),
        "adam_g": _adam_meta(state.adam_g),
    }
    blob = canonical_json(header).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(blob)), blob]
    for arr in (state.d.params, state.g.params, state.adam_d.m, state.adam_d.v,
                state.adam_g.m, state.adam_g.v):
        arr = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(struct.pack("<Q", arr.size))
        parts.append(arr.tobytes())
    return b"".join(parts)


def save_checkpoint(state, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(checkpoint_bytes(state))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, k: int) -> bytes:
        if k < 0 or self.pos + k > len(self.data):
            raise FormatError(f"truncated checkpoint: need {k} bytes at offset {self.pos}, "
                              f"have {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + k]
        self.pos += k
        return out

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_checkpoint(path):
    """Rebuild a :class:`~coopinit.trainer.TrainerState` from ``path``."""
    from . import trainer
    from .data import DatasetSpec
    from .ebm import Descriptor
    from .generator import Generator, LatentPrior
    from .nn import AdamState, Mlp

    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", r.take(4))
    if version != FORMAT_VERSION:
        raise FormatError(f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
    hlen = r.u64()
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from exc
    arrays = []
    for _ in range(6):
        count = r.u64()
        if count > (len(data) - r.pos) // 8:
            raise FormatError(f"corrupt length prefix {count} at offset {r.pos - 8}")
        arrays.append(np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64))
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after checkpoint payload")

    cfg = trainer.TrainConfig.from_dict(header["train_config"])
    dataset = DatasetSpec.from_dict(header["dataset"])
    d_cfg, g_cfg = trainer.network_configs(cfg, dataset)
    theta, phi, dm, dv, gm, gv = arrays
    if theta.size != d_cfg.param_count or phi.size != g_cfg.param_count:
        raise FormatError("parameter vector lengths do not match the stored configuration")
    d = Descriptor(Mlp(d_cfg, theta), header["descriptor_ref_sigma"])
    g = Generator(Mlp(g_cfg, phi), LatentPrior(cfg.model.latent_dim))
    adam_d = AdamState(dm, dv, **header["adam_d"])
    adam_g = AdamState(gm, gv, **header["adam_g"])
    rng = np.random.default_rng()
    rng.bit_generator.state = header["rng_state"]
    return trainer.TrainerState(
        config=cfg, dataset=dataset, d=d, g=g, adam_d=adam_d, adam_g=adam_g,
        consumed=int(header["consumed"]), stage=header["stage"], rng=rng,
        transition_at=header["transition_at"],
        last_d_loss=float.fromhex(header["last_d_loss"]),
        last_g_loss=float.fromhex(header["last_g_loss"]),
    )
