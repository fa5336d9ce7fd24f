import struct

import numpy as np
import pytest

from coopinit.data import ring
from coopinit.errors import ContractError, FormatError
from coopinit.persistence import (
    CSV_HEADER, MetricsWriter, RunRecord, append_record, checkpoint_bytes, load_checkpoint,
    read_manifest, read_records, save_checkpoint, write_manifest,
)
from coopinit.trainer import ModelConfig, RunSinks, TrainConfig, run

SMALL = ModelConfig(latent_dim=4, g_hidden=(16,), d_hidden=(16,))


def cfg(**kw):
    base = dict(n=32, n_coop=320, n_adv=960, model=SMALL, eval_every=160, eval_samples=200)
    base.update(kw)
    return TrainConfig(**base)


def record(consumed, **kw):
    base = dict(consumed=consumed, stage="adversarial", d_loss=1.0 / 3, g_loss=-2.5e-7,
                modes_covered=7, hq_fraction=0.123456789123, energy_distance=12345.678901234,
                wall_ms=0)
    base.update(kw)
    return RunRecord(**base)


def test_csv_header_and_rendering(tmp_path):
    sink = MetricsWriter(tmp_path / "m.csv")
    append_record(sink, record(0))
    append_record(sink, record(256))
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "consumed,stage,d_loss,g_loss,modes_covered,hq_fraction,energy_distance,wall_ms"
    assert ",".join(CSV_HEADER) == lines[0]
    assert lines[1] == "0,adversarial,0.333333333,-2.5e-07,7,0.123456789,12345.6789,0"
    assert len(lines) == 3


def test_csv_round_trip(tmp_path):
    sink = MetricsWriter(tmp_path / "m.csv")
    recs = [record(i * 100, d_loss=np.pi * i) for i in range(5)]
    for r in recs:
        sink(r)
    back = read_records(tmp_path / "m.csv")
    for a, b in zip(recs, back):
        assert a.consumed == b.consumed and a.stage == b.stage
        assert abs(a.d_loss - b.d_loss) <= 1e-8 * max(1.0, abs(a.d_loss))


def test_monotonicity_enforced(tmp_path):
    sink = MetricsWriter(tmp_path / "m.csv")
    sink(record(100))
    with pytest.raises(ContractError):
        sink(record(100))
    # a fresh writer on the same file picks up the last row
    with pytest.raises(ContractError):
        MetricsWriter(tmp_path / "m.csv")(record(50))


def test_manifest_is_sorted(tmp_path):
    write_manifest(tmp_path / "m.json", {"b": 1, "a": {"z": 2, "y": 3}})
    text = (tmp_path / "m.json").read_text()
    assert text.index('"a"') < text.index('"b"') and text.index('"y"') < text.index('"z"')
    assert read_manifest(tmp_path / "m.json") == {"a": {"y": 3, "z": 2}, "b": 1}


def test_save_load_save_identical(tmp_path):
    state, _ = run(cfg(), ring(), stop_at=480)
    save_checkpoint(state, tmp_path / "a.bin")
    save_checkpoint(load_checkpoint(tmp_path / "a.bin"), tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


@pytest.mark.parametrize("split", [160, 320, 640])
def test_resume_equivalence(tmp_path, split):
    c = cfg()
    full, full_recs = run(c, ring())
    part, part_recs = run(c, ring(), stop_at=split)
    save_checkpoint(part, tmp_path / "k.bin")
    resumed, rest = run(c, ring(), state=load_checkpoint(tmp_path / "k.bin"))
    assert checkpoint_bytes(resumed) == checkpoint_bytes(full)
    assert part_recs + rest == full_recs


def test_resume_through_checkpoint_sink(tmp_path):
    c = cfg(checkpoint_every=320)
    paths = []

    def sink(state):
        p = tmp_path / f"c{state.consumed}.bin"
        save_checkpoint(state, p)
        paths.append(p)

    full, _ = run(c, ring(), RunSinks(checkpoint=sink))
    resumed, _ = run(c, ring(), state=load_checkpoint(paths[1]))
    assert checkpoint_bytes(resumed) == checkpoint_bytes(full)


def test_format_errors(tmp_path):
    state, _ = run(cfg(), ring(), stop_at=64)
    blob = checkpoint_bytes(state)
    cases = {
        "magic": b"NOTACKPT" + blob[8:],
        "version": blob[:8] + struct.pack("<I", 99) + blob[12:],
        "truncated": blob[:-5],
        "trailing": blob + b"\0",
    }
    hlen = struct.unpack("<Q", blob[12:20])[0]
    prefix_at = 20 + hlen
    cases["length"] = blob[:prefix_at] + struct.pack("<Q", 2**62) + blob[prefix_at + 8:]
    for name, data in cases.items():
        p = tmp_path / f"{name}.bin"
        p.write_bytes(data)
        with pytest.raises(FormatError):
            load_checkpoint(p)
    with pytest.raises(FormatError, match="version 99"):
        load_checkpoint(tmp_path / "version.bin")


def test_missing_file_surfaces_io_error(tmp_path):
    with pytest.raises(OSError):
        load_checkpoint(tmp_path / "nope.bin")
