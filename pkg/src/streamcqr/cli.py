"""Command line shell: init / update / estimate / simulate / bench.

Workflow: ``init`` builds the grids from a validation CSV and writes a
fresh checkpoint; ``update`` folds chunk CSVs into the checkpoint in
command-line order; ``estimate`` reads the checkpoint and writes a curve
CSV.  ``simulate`` materializes a synthetic scenario as chunk files and
``bench`` runs the full replication harness into a report CSV.

Exit codes: 0 success, 2 usage/configuration error, 3 data error,
4 checkpoint or state-compatibility error.
"""

import argparse
import csv
import os
import re
import sys

import numpy as np

from . import checkpoint as ckpt
from .bandwidth import BandwidthState, estimate_Ch, next_bandwidth
from .config import (
    GRID_SIZE,
    TAU_COUNT,
    VALIDATION_SIZE,
    Config,
    kv_bool,
    kv_float,
    kv_int,
    parse_kv_file,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    StreamCQRError,
)
from .estimators import estimate_mean, estimate_sd
from .pilot import build_grids
from .simulate import ScenarioConfig, generate
from .state import Chunk, init_state, update_chunk


def read_chunk_csv(path):
    """Read an ``x,y`` chunk file; malformed rows name their line."""
    xs, ys = [], []
    try:
        fh = open(path, "r", newline="", encoding="utf-8-sig")
    except OSError as err:
        raise DataError("cannot read %s: %s" % (path, err)) from err
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["x", "y"]:
            raise DataError("%s:1: expected header 'x,y'" % path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(
                    "%s:%d: expected two fields, got %d" % (path, lineno, len(row))
                )
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except ValueError:
                raise DataError(
                    "%s:%d: non-numeric value %r" % (path, lineno, ",".join(row))
                ) from None
    chunk = Chunk(np.asarray(xs), np.asarray(ys))
    chunk.require_finite()
    return chunk


def write_curve_csv(path, xs, values):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "estimate"])
        for x, v in zip(xs, values):
            writer.writerow(["%.17g" % x, "%.17g" % v])


def _config_from_file(path):
    raw = parse_kv_file(path)
    if "interval_low" not in raw or "interval_high" not in raw:
        raise ConfigError("config must set interval_low and interval_high")
    kw = {
        "interval": (
            kv_float(raw.pop("interval_low"), "interval_low"),
            kv_float(raw.pop("interval_high"), "interval_high"),
        )
    }
    casts = {
        "alpha": kv_float,
        "degree": kv_int,
        "kernel": lambda v, k: v,
        "weight": lambda v, k: v,
        "symmetric_model": kv_bool,
        "density_floor_rel": kv_float,
        "separation_floor": kv_float,
        "mesh_per_interval": kv_int,
        "refine_factor": kv_int,
    }
    extras = {}
    for key in ("grid_size", "tau_count", "cv_folds"):
        if key in raw:
            extras[key] = kv_int(raw.pop(key), key)
    for key in ("C_h",):
        if key in raw:
            extras[key] = kv_float(raw.pop(key), key)
    for key, cast in casts.items():
        if key in raw:
            kw[key] = cast(raw.pop(key), key)
    if raw:
        raise ConfigError("unknown config keys: %s" % ", ".join(sorted(raw)))
    return Config(**kw), extras


def _scenario_from_file(path):
    raw = parse_kv_file(path)
    kw = {}
    casts = {
        "model": kv_int,
        "error": lambda v, k: v,
        "lam": kv_float,
        "lambda": kv_float,
        "n_total": kv_int,
        "chunk_size": kv_int,
        "seed": kv_int,
        "replications": kv_int,
        "validation_size": kv_int,
        "alpha": kv_float,
        "grid_size": kv_int,
        "tau_count": kv_int,
        "degree": kv_int,
        "include_average": kv_bool,
        "include_nw": kv_bool,
        "cv_folds": kv_int,
        "C_h": kv_float,
        "C_h_nw": kv_float,
    }
    for key, value in raw.items():
        if key not in casts:
            raise ConfigError("unknown scenario key %r" % key)
        kw["lam" if key == "lambda" else key] = casts[key](value, key)
    return ScenarioConfig(**kw)


# ---------------------------------------------------------------------
# Subcommands.


def cmd_init(args):
    config, extras = _config_from_file(args.config)
    validation = read_chunk_csv(args.validation)
    grid, node_sets = build_grids(
        validation.x,
        validation.y,
        config.interval,
        grid_size=extras.get("grid_size", GRID_SIZE),
        tau_count=extras.get("tau_count", TAU_COUNT),
    )
    if "C_h" in extras:
        C_h = extras["C_h"]
    else:
        C_h = estimate_Ch(
            validation,
            config,
            grid_size=extras.get("grid_size", GRID_SIZE),
            tau_count=extras.get("tau_count", TAU_COUNT),
            folds=extras.get("cv_folds", 10),
        )
        print("cross-validated bandwidth constant: %.6g" % C_h)
    state = init_state(grid, node_sets, config)
    bandwidth = BandwidthState(C_h=C_h)
    ckpt.save(args.state, state, bandwidth)
    print("initialized %s (grid %d, nodes %d per site)" % (
        args.state, grid.size, state.node_count(0)
    ))
    return 0


_SEQ = re.compile(r"(\d+)\D*$")


def _sequence_number(path):
    m = _SEQ.search(os.path.splitext(os.path.basename(path))[0])
    return int(m.group(1)) if m else None


class _StateLock:
    """Advisory single-writer lock next to the checkpoint file."""

    def __init__(self, state_path):
        self.path = state_path + ".lock"
        self.fd = None

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CheckpointError(
                "another writer holds %s (remove the file if stale)" % self.path
            ) from None
        os.write(self.fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        os.close(self.fd)
        os.unlink(self.path)
        return False


def cmd_update(args):
    seqs = [_sequence_number(p) for p in args.chunks]
    if all(s is not None for s in seqs) and len(seqs) > 1:
        if any(b <= a for a, b in zip(seqs, seqs[1:])):
            raise DataError(
                "chunk sequence numbers are not strictly increasing: %s"
                % ", ".join(map(str, seqs))
            )
    with _StateLock(args.state):
        state, bandwidth = ckpt.load(args.state)
        if bandwidth is None and args.bandwidth is None:
            raise CheckpointError(
                "checkpoint carries no bandwidth recursion; pass --bandwidth"
            )
        for path in args.chunks:
            chunk = read_chunk_csv(path)
            if args.bandwidth is not None:
                h = args.bandwidth
            else:
                h, bandwidth = next_bandwidth(bandwidth, len(chunk))
            update_chunk(state, chunk, h)
            print("applied %s (n=%d, h=%.6g, N=%d)" % (path, len(chunk), h, state.N))
        ckpt.save(args.state, state, bandwidth)
    return 0


def cmd_estimate(args):
    state, _ = ckpt.load(args.state)
    if state.N <= 0:
        raise DataError("checkpoint holds no data; run update first")
    mode = args.mode
    if args.what == "mean":
        mode = mode or "ntm"
        if mode not in ("ntm", "bctm"):
            raise ConfigError("mean mode must be ntm or bctm")
        curve = estimate_mean(state, mode=mode)
    else:
        mode = mode or "rtsd"
        if mode not in ("ntsd", "rtsd"):
            raise ConfigError("sd mode must be ntsd or rtsd")
        curve = estimate_sd(state, mode=mode)
    for i, reason in curve.skipped:
        print("skipped grid point %d: %s" % (i, reason), file=sys.stderr)
    write_curve_csv(args.out, curve.grid, curve.values)
    print("wrote %s (%d points, %s)" % (args.out, curve.grid.size, mode))
    return 0


def cmd_simulate(args):
    scenario = _scenario_from_file(args.scenario)
    os.makedirs(args.out_dir, exist_ok=True)
    total = 0
    for t, chunk in enumerate(generate(scenario, replication=args.replication), 1):
        path = os.path.join(args.out_dir, "chunk_%04d.csv" % t)
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            for x, y in zip(chunk.x, chunk.y):
                writer.writerow(["%.17g" % x, "%.17g" % y])
        total += len(chunk)
    print("wrote %d observations in %d chunks to %s" % (total, t, args.out_dir))
    return 0


def cmd_bench(args):
    from .benchmark import run_scenario, write_report

    scenario = _scenario_from_file(args.scenario)
    result = run_scenario(scenario)
    write_report(args.out, result)
    print("scenario %s: C_h=%.6g, %d replications, %d failures" % (
        result.label, result.C_h, scenario.replications, result.failures
    ))
    for row in result.rows():
        if row["statistic"] == "rase":
            print("  %-22s mean %.4f sd %.4f (n=%d)" % (
                row["estimator_pair"], row["mean"], row["sd"],
                row["replications"],
            ))
    print("wrote %s" % args.out)
    return 0


# ---------------------------------------------------------------------
# Parser.


def build_parser():
    parser = argparse.ArgumentParser(
        prog="streamcqr",
        description="Streaming robust regression over data chunks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="build grids and write a fresh checkpoint")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--validation", required=True, help="validation CSV (x,y)")
    p.add_argument("--state", required=True, help="checkpoint path to create")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("update", help="fold chunk CSVs into the checkpoint")
    p.add_argument("--state", required=True)
    p.add_argument("--bandwidth", type=float, default=None,
                   help="fixed bandwidth overriding the recursion")
    p.add_argument("chunks", nargs="+", help="chunk CSVs, applied in order")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("estimate", help="write a curve CSV from the checkpoint")
    p.add_argument("--state", required=True)
    p.add_argument("--what", choices=("mean", "sd"), required=True)
    p.add_argument("--mode", default=None,
                   help="mean: ntm|bctm (default ntm); sd: ntsd|rtsd (default rtsd)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="write a scenario as chunk CSVs")
    p.add_argument("--scenario", required=True, help="key = value scenario file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--replication", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run a scenario and write the report CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except CheckpointError as err:
        print("error: %s" % err, file=sys.stderr)
        return 4
    except StreamCQRError as err:
        print("error: %s" % err, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
