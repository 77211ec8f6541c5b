"""Command line entry point::

    vpil simulate|iterate|criterion|potential-verify --config PATH --out DIR [--seed N]

Exit status is 0 on success, 1 on configuration errors and 2 when a
simulation aborts (the partial diagnostics are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import COMMANDS, ConfigError, RunConfig, parse_config
from .criterion import cubic_bound
from .diagnostics import CSV_COLUMNS
from .linear_scheme import picard_sequence, small_gaussian_data
from .oracles import verify_potentials
from .simulation import run, write_snapshot

__all__ = ["main", "dispatch"]

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED = 0, 1, 2


def _simulate(cfg: RunConfig, out: Path, seed: int) -> int:
    sim = cfg.sim_config()
    f0 = cfg.initial_data(seed)
    snap_dir = out / "snapshots"
    if sim.snapshot_every:
        snap_dir.mkdir(exist_ok=True)

    def on_snapshot(state):
        write_snapshot(state, snap_dir / f"step_{state.step_index}.bin", sim)

    with open(out / "diagnostics.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")

        def on_record(rec):
            fh.write(",".join(rec.row()) + "\n")
            fh.flush()

        result = run(sim, f0, on_snapshot=on_snapshot, on_record=on_record)
    summary = {
        "abort_reason": result.abort_reason,
        "step_index": result.final.step_index,
        "t": result.final.t,
        "records": len(result.series),
    }
    (out / "run.json").write_text(json.dumps(summary, sort_keys=True) + "\n", encoding="utf-8")
    if result.abort_reason:
        print(f"simulation aborted: {result.abort_reason}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def _iterate(cfg: RunConfig, out: Path, seed: int) -> int:
    lin = cfg.linear_config()
    f0 = small_gaussian_data(lin, cfg["initial.norm_fraction"], cfg["initial.x_width"], cfg["initial.v_width"])
    result = picard_sequence(f0, cfg["iterate.N"], lin)
    with open(out / "iterates.jsonl", "w", encoding="utf-8") as fh:
        for rep in result.reports:
            fh.write(rep.to_json() + "\n")
    return EXIT_OK


def _criterion(cfg: RunConfig, out: Path, seed: int) -> int:
    report = cubic_bound(cfg.criterion_input(), C=cfg["criterion.C"], ratio=cfg["criterion.ratio"])
    (out / "criterion.json").write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _potential(cfg: RunConfig, out: Path, seed: int) -> int:
    res = verify_potentials(
        cfg["potential.radial_points"], cfg["potential.cartesian_points"], cfg["potential.cartesian_extent"],
        cfg["potential.refinement_points"], cfg["potential.refinement_extent"],
    )  # fmt: skip
    (out / "potential.json").write_text(json.dumps(res, sort_keys=True) + "\n", encoding="utf-8")
    if not res["passed"]:
        print("potential-verify: at least one oracle check failed", file=sys.stderr)
    return EXIT_OK


_PIPELINES = {"simulate": _simulate, "iterate": _iterate, "criterion": _criterion, "potential-verify": _potential}


def dispatch(command: str, config_path, output_dir, seed: int = 0) -> int:
    """Run one command; returns the exit status."""
    try:
        cfg = parse_config(config_path, command)
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    (out / "config.normalized").write_text(cfg.normalized(), encoding="utf-8")
    try:
        return _PIPELINES[command](cfg, out, seed)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vpil", description="Vlasov-Poisson-Landau numerical laboratory")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=_seed, default=0, help="seed for randomized initial data")
    args = parser.parse_args(argv)
    return dispatch(args.command, args.config, args.out, args.seed)
