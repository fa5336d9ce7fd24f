"""Command-line experiment runner.

    coopinit run     --config C --out DIR [--seed S] [overrides]   one seeded run
    coopinit resume  DIR                                           continue from the last checkpoint
    coopinit compare DIR DIR... [--out CSV]                        summary table
    coopinit sweep   --config C --axis A --values V... --seeds S... --out DIR

Exit codes: 0 ok, 1 run failure, 2 config or usage error.

Run directory layout::

    manifest.json     config, seed, schedule, transition point, build id, status
    config.yaml       fully resolved config (re-running it reproduces the run)
    metrics.csv       one row per evaluation
    checkpoints/      ckpt_<consumed>.bin and final.bin
    snapshots/        snapshot_<consumed>_<stage>.svg
    curves.svg        learning curves with the stage boundary marked

Comparison CSV columns, in order::

    run, group, seed, final_modes, best_modes, final_hq, best_hq, final_ed, best_ed,
    delta_final_modes, delta_final_hq, delta_final_ed

Deltas are relative to the first run given. Runs whose configs differ only in
the seed share a group; a second table lists per-group means with columns::

    group, n_runs, mean_final_modes, mean_best_modes, mean_final_hq, mean_best_hq,
    mean_final_ed, mean_best_ed
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import os
import shutil
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .config import SWEEP_AXES, apply_overrides, config_to_doc, dump_config, load_config
from .data import DatasetSpec, mode_centers
from .errors import CoopInitError, ConfigError, FormatError, TrainingError
from .persistence import (
    MetricsWriter, canonical_json, load_checkpoint, read_manifest, read_records,
    save_checkpoint, write_manifest,
)
from .trainer import RunSinks, eval_samples, run, schedule

EXIT_OK, EXIT_RUN, EXIT_CONFIG = 0, 1, 2

COMPARE_COLUMNS = (
    "run", "group", "seed", "final_modes", "best_modes", "final_hq", "best_hq",
    "final_ed", "best_ed", "delta_final_modes", "delta_final_hq", "delta_final_ed",
)
GROUP_COLUMNS = (
    "group", "n_runs", "mean_final_modes", "mean_best_modes", "mean_final_hq",
    "mean_best_hq", "mean_final_ed", "mean_best_ed",
)


def build_id() -> str:
    """Package version plus a hash of the package sources."""
    h = hashlib.sha256()
    root = Path(__file__).parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def _err(msg: str) -> None:
    print(f"coopinit: {msg}", file=sys.stderr)


# run ---------------------------------------------------------------------


def _schedule_doc(cfg) -> dict:
    s = schedule(cfg)
    return {
        "n": cfg.n, "n_coop": cfg.n_coop, "n_adv": cfg.n_adv,
        "ncoop_frac": cfg.n_coop / cfg.total if cfg.total else 0.0,
        "coop_iters": s.coop_iters, "adv_iters": s.adv_iters,
        "coop_end": s.coop_end, "end": s.end,
    }


def _snapshot_writer(snap_dir: Path):
    def write(state):
        fake, real = eval_samples(state)
        path = snap_dir / f"snapshot_{state.consumed:010d}_{state.stage}.svg"
        plotting.scatter_snapshot(path, real, fake, mode_centers(state.dataset),
                                  title=f"{state.stage}  N={state.consumed}")
    return write


def _checkpoint_writer(ckpt_dir: Path):
    def write(state):
        save_checkpoint(state, ckpt_dir / f"ckpt_{state.consumed:010d}.bin")
    return write


def _prepare_out(out: Path, force: bool) -> None:
    if out.exists() and not out.is_dir():
        raise ConfigError("--out", f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError("--out", f"{out} is not empty (use --force to overwrite)")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir()
    (out / "snapshots").mkdir()


def _execute(cfg, dataset, out: Path, manifest: dict, state=None) -> int:
    """Run training into ``out`` and finalize the manifest. Returns an exit code."""
    write_manifest(out / "manifest.json", manifest)
    sinks = RunSinks(
        record=MetricsWriter(out / "metrics.csv"),
        checkpoint=_checkpoint_writer(out / "checkpoints") if cfg.checkpoint_every > 0 else None,
        snapshot=_snapshot_writer(out / "snapshots") if cfg.snapshot_every > 0 else None,
    )
    t0 = time.perf_counter()
    try:
        state, _ = run(cfg, dataset, sinks, state=state)
    except TrainingError as exc:
        manifest.update(status="failed", error=str(exc), diagnostics=exc.snapshot,
                        elapsed_s=round(time.perf_counter() - t0, 3))
        write_manifest(out / "manifest.json", manifest)
        _err(f"run failed: {exc}")
        return EXIT_RUN
    save_checkpoint(state, out / "checkpoints" / "final.bin")
    if sinks.snapshot:
        final = out / "snapshots" / f"snapshot_{state.consumed:010d}_{state.stage}.svg"
        if not final.exists():
            sinks.snapshot(state)
    records = read_records(out / "metrics.csv")
    plotting.learning_curves(out / "curves.svg", records, state.transition_at,
                             modes_total=dataset.n_modes)
    manifest.update(status="completed", transition_at=state.transition_at,
                    consumed=state.consumed,
                    elapsed_s=round(manifest.get("elapsed_s", 0.0) + time.perf_counter() - t0, 3))
    write_manifest(out / "manifest.json", manifest)
    return EXIT_OK


def run_command(args) -> int:
    try:
        cfg, dataset = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, loss=args.loss, eta=args.eta,
                              steps_t=args.steps_t, ncoop_frac=args.ncoop_frac,
                              gamma=args.gamma, lr=args.lr)
        if args.snapshot_every is not None:
            cfg = replace(cfg, snapshot_every=int(args.snapshot_every))
        if args.checkpoint_every is not None:
            cfg = replace(cfg, checkpoint_every=int(args.checkpoint_every))
        if args.timing:
            cfg = replace(cfg, record_wall_time=True)
        out = Path(args.out)
        _prepare_out(out, args.force)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    doc = config_to_doc(cfg, dataset)
    (out / "config.yaml").write_text(dump_config(cfg, dataset))
    manifest = {
        "format_version": 1,
        "build": build_id(),
        "seed": cfg.seed,
        "config": doc,
        "config_sha256": hashlib.sha256(canonical_json(doc).encode()).hexdigest(),
        "source_config": str(args.config),
        "schedule": _schedule_doc(cfg),
        "transition_at": None,
        "status": "running",
    }
    return _execute(cfg, dataset, out, manifest)


def resume_command(args) -> int:
    out = Path(args.run_dir)
    try:
        manifest = read_manifest(out / "manifest.json")
    except (OSError, ValueError) as exc:
        _err(f"cannot read manifest in {out}: {exc}")
        return EXIT_CONFIG
    ckpts = sorted((out / "checkpoints").glob("ckpt_*.bin"))
    if not ckpts:
        _err(f"no checkpoints in {out / 'checkpoints'}")
        return EXIT_CONFIG
    try:
        state = load_checkpoint(ckpts[-1])
    except FormatError as exc:
        _err(f"cannot load {ckpts[-1]}: {exc}")
        return EXIT_CONFIG
    # drop rows written after the checkpoint; they are regenerated identically
    metrics = out / "metrics.csv"
    lines = metrics.read_text().splitlines(keepends=True)
    kept = [lines[0]] + [ln for ln in lines[1:] if int(ln.split(",", 1)[0]) <= state.consumed]
    metrics.write_text("".join(kept))
    manifest.update(status="running", resumed_from=ckpts[-1].name)
    manifest.pop("error", None)
    manifest.pop("diagnostics", None)
    return _execute(state.config, state.dataset, out, manifest, state=state)


# compare -----------------------------------------------------------------


def _group_key(doc: dict) -> str:
    doc = copy.deepcopy(doc)
    doc.get("train", {}).pop("seed", None)
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()[:8]


def summarize_runs(run_dirs) -> tuple[list[dict], list[dict]]:
    """Per-run rows and per-group means; raises ConfigError on unusable input."""
    if len(run_dirs) < 2:
        raise ConfigError("run_dirs", "compare needs at least two runs")
    rows = []
    dataset0 = None
    for rd in run_dirs:
        rd = Path(rd)
        try:
            manifest = read_manifest(rd / "manifest.json")
            records = read_records(rd / "metrics.csv")
        except (OSError, ValueError, FormatError) as exc:
            raise ConfigError(str(rd), f"not a readable run directory: {exc}") from exc
        if manifest.get("status") != "completed" or not records:
            raise ConfigError(str(rd), "run did not complete")
        dataset = DatasetSpec.from_dict(manifest["config"]["dataset"])
        if dataset0 is None:
            dataset0 = dataset
        elif dataset != dataset0:
            raise ConfigError(str(rd), "dataset spec differs from the first run")
        last = records[-1]
        rows.append({
            "run": str(rd), "group": _group_key(manifest["config"]), "seed": manifest["seed"],
            "final_modes": last.modes_covered,
            "best_modes": max(r.modes_covered for r in records),
            "final_hq": last.hq_fraction,
            "best_hq": max(r.hq_fraction for r in records),
            "final_ed": last.energy_distance,
            "best_ed": min(r.energy_distance for r in records),
        })
    first = rows[0]
    for r in rows:
        r["delta_final_modes"] = r["final_modes"] - first["final_modes"]
        r["delta_final_hq"] = r["final_hq"] - first["final_hq"]
        r["delta_final_ed"] = r["final_ed"] - first["final_ed"]
    groups = []
    for key in dict.fromkeys(r["group"] for r in rows):
        members = [r for r in rows if r["group"] == key]
        g = {"group": key, "n_runs": len(members)}
        for col in ("final_modes", "best_modes", "final_hq", "best_hq", "final_ed", "best_ed"):
            g[f"mean_{col}"] = float(np.mean([m[col] for m in members]))
        groups.append(g)
    return rows, groups


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _text_table(columns, rows) -> str:
    cells = [list(columns)] + [[_cell(r[c]) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_summary(rows, groups, out_prefix: Path | None) -> str:
    text = _text_table(COMPARE_COLUMNS, rows) + "\n" + _text_table(GROUP_COLUMNS, groups)
    if out_prefix is not None:
        out_prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{out_prefix}.csv").write_text(_csv_text(COMPARE_COLUMNS, rows))
        Path(f"{out_prefix}_groups.csv").write_text(_csv_text(GROUP_COLUMNS, groups))
        Path(f"{out_prefix}.txt").write_text(text)
        plotting.comparison_bars(f"{out_prefix}.svg", [Path(r["run"]).name for r in rows],
                                 [r["final_modes"] for r in rows], [r["best_modes"] for r in rows])
    return text


def compare_command(args) -> int:
    try:
        rows, groups = summarize_runs(args.run_dirs)
    except ConfigError as exc:
        _err(f"compare refused: {exc}")
        return EXIT_CONFIG
    prefix = None
    if args.out:
        prefix = Path(args.out)
        if prefix.suffix == ".csv":
            prefix = prefix.with_suffix("")
    sys.stdout.write(write_summary(rows, groups, prefix))
    return EXIT_OK


# sweep -------------------------------------------------------------------


def _child(config: str, axis: str, value, seed: int, out: str) -> tuple[str, int, str]:
    ns = build_parser().parse_args(["run", "--config", config, "--out", out, "--seed", str(seed),
                                    "--force"])
    setattr(ns, axis, value)
    buf = io.StringIO()
    stderr, sys.stderr = sys.stderr, buf
    try:
        code = run_command(ns)
    except Exception:  # keep the sweep going; the traceback lands in the summary
        code, buf = EXIT_RUN, io.StringIO(traceback.format_exc())
    finally:
        sys.stderr = stderr
    return out, code, buf.getvalue()


def _axis_value(axis: str, raw: str):
    try:
        return int(raw) if axis == "steps_t" else float(raw)
    except ValueError as exc:
        raise ConfigError("--values", f"{raw!r} is not a number") from exc


def sweep_command(args) -> int:
    try:
        if args.axis not in SWEEP_AXES:
            raise ConfigError("--axis", f"must be one of {', '.join(SWEEP_AXES)}")
        values = [_axis_value(args.axis, v) for v in args.values]
        # validate every grid point before launching anything
        cfg, _ = load_config(args.config)
        for v in values:
            apply_overrides(cfg, **{args.axis: v})
        out = Path(args.out)
        if out.exists() and any(out.iterdir()) and not args.force:
            raise ConfigError("--out", f"{out} is not empty (use --force to overwrite)")
        if out.exists() and args.force:
            shutil.rmtree(out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG

    jobs = args.jobs or os.cpu_count() or 1
    grid = [(v, s, str(out / f"{args.axis}={v}" / f"seed={s}")) for v in values for s in args.seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_child, str(args.config), args.axis, v, s, d) for v, s, d in grid]
        results = [f.result() for f in futures]

    failures = [(d, code, msg) for d, code, msg in results if code != EXIT_OK]
    with open(out / "failures.txt", "w") as fh:
        for d, code, msg in failures:
            fh.write(f"{d}\texit {code}\t{msg.strip()}\n")
    for d, code, msg in failures:
        _err(f"child {d} exited {code}: {msg.strip()}")

    ok = [d for d, code, _ in results if code == EXIT_OK]
    if len(ok) >= 2:
        rows, groups = summarize_runs(ok)
        sys.stdout.write(write_summary(rows, groups, out / "summary"))
        value_of = {d: v for v, _, d in grid}
        per_value = {v: [r["final_modes"] for r in rows if value_of[r["run"]] == v] for v in values}
        plotting.sweep_plot(out / "sweep.svg", args.axis, values, per_value)
    return EXIT_RUN if failures else EXIT_OK


# entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopinit", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train one seeded run")
    r.add_argument("--config", required=True, help="YAML run config")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--snapshot-every", type=int, help="examples between SVG snapshots")
    r.add_argument("--checkpoint-every", type=int, help="examples between checkpoints")
    r.add_argument("--loss", choices=("ns", "hinge", "was", "was_gp"))
    r.add_argument("--eta", type=float)
    r.add_argument("--steps-t", type=int)
    r.add_argument("--ncoop-frac", type=float)
    r.add_argument("--gamma", type=float)
    r.add_argument("--lr", type=float, help="adversarial learning rate for both networks")
    r.add_argument("--force", action="store_true", help="overwrite a non-empty --out")
    r.add_argument("--timing", action="store_true", help="record wall time in metrics.csv")
    r.set_defaults(func=run_command)

    s = sub.add_parser("resume", help="continue a run from its latest checkpoint")
    s.add_argument("run_dir")
    s.set_defaults(func=resume_command)

    c = sub.add_parser("compare", help="summarize completed runs")
    c.add_argument("run_dirs", nargs="+")
    c.add_argument("--out", help="output prefix for CSV, text and SVG summaries")
    c.set_defaults(func=compare_command)

    w = sub.add_parser("sweep", help="grid of runs over one axis and several seeds")
    w.add_argument("--config", required=True)
    w.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    w.add_argument("--values", required=True, nargs="+")
    w.add_argument("--seeds", type=int, nargs="+", default=[0])
    w.add_argument("--out", required=True)
    w.add_argument("--jobs", type=int, default=None, help="parallel runs (default: CPU count)")
    w.add_argument("--force", action="store_true")
    w.set_defaults(func=sweep_command)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CoopInitError as exc:
        _err(str(exc))
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
