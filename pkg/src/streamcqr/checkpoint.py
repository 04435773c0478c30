"""Checkpoint persistence: bit-exact state round trips as JSON.

Floats travel as C99 hex strings (float.hex), so no value is perturbed
by decimal formatting.  The payload serialization is canonical (sorted
keys, fixed separators); two states are interchangeable exactly when
their payload bytes are equal.  Writes go through a temporary file and
an atomic rename, so a reader never sees a half-written checkpoint.
"""

import json
import os
import time

import numpy as np

from .bandwidth import BandwidthState
from .config import Config
from .errors import CheckpointError
from .state import RenewableState

FORMAT_VERSION = 1


def _hex_vec(values):
    return [float(v).hex() for v in np.asarray(values, dtype=float).ravel()]


def _unhex_vec(items):
    return np.array([float.fromhex(s) for s in items], dtype=float)


def _config_doc(config):
    return {
        "interval": _hex_vec(config.interval),
        "alpha": float(config.alpha).hex(),
        "degree": int(config.degree),
        "kernel": config.kernel,
        "weight": config.weight,
        "symmetric_model": bool(config.symmetric_model),
        "density_floor_rel": float(config.density_floor_rel).hex(),
        "separation_floor": float(config.separation_floor).hex(),
        "mesh_per_interval": int(config.mesh_per_interval),
        "refine_factor": int(config.refine_factor),
    }


def _config_from_doc(doc):
    return Config(
        interval=tuple(_unhex_vec(doc["interval"])),
        alpha=float.fromhex(doc["alpha"]),
        degree=int(doc["degree"]),
        kernel=doc["kernel"],
        weight=doc["weight"],
        symmetric_model=bool(doc["symmetric_model"]),
        density_floor_rel=float.fromhex(doc["density_floor_rel"]),
        separation_floor=float.fromhex(doc["separation_floor"]),
        mesh_per_interval=int(doc["mesh_per_interval"]),
        refine_factor=int(doc["refine_factor"]),
    )


def state_payload(state, bandwidth=None):
    """JSON-able document capturing the state (and bandwidth recursion).

    Only the real node columns are stored; the padding columns of the
    rectangular accumulator are reconstructed on load.
    """
    doc = {
        "fingerprint": state.fingerprint,
        "config": _config_doc(state.config),
        "grid": _hex_vec(state.grid),
        "node_sets": [_hex_vec(row) for row in state.node_sets],
        "N": int(state.N),
        "chunks_applied": int(state.chunks_applied),
        "fX": _hex_vec(state.fX),
        "S": [_hex_vec(state.sub_cdf(i)) for i in range(state.grid.size)],
        "E_WY": float(state.E_WY).hex(),
        "E_WY2": float(state.E_WY2).hex(),
    }
    if bandwidth is not None:
        doc["bandwidth"] = {
            "C_h": float(bandwidth.C_h).hex(),
            "mode": bandwidth.mode,
            "oracle_total": (
                None if bandwidth.oracle_total is None
                else int(bandwidth.oracle_total)
            ),
            "S_h": float(bandwidth.S_h).hex(),
            "last_h": float(bandwidth.last_h).hex(),
            "t": int(bandwidth.t),
        }
    return doc


def payload_bytes(state, bandwidth=None):
    """Canonical serialization; byte equality = state equality."""
    return json.dumps(
        state_payload(state, bandwidth), sort_keys=True, separators=(",", ":")
    ).encode("ascii")


def save(path, state, bandwidth=None):
    """Atomically write a checkpoint file."""
    doc = {
        "format_version": FORMAT_VERSION,
        "write_timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "payload": state_payload(state, bandwidth),
    }
    tmp = "%s.tmp.%d" % (path, os.getpid())
    with open(tmp, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load(path):
    """Read a checkpoint; returns (state, bandwidth-or-None).

    The stored fingerprint must match the one recomputed from the stored
    configuration, grid, and node sets.
    """
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise CheckpointError("cannot read checkpoint: %s" % err) from err
    except json.JSONDecodeError as err:
        raise CheckpointError("malformed checkpoint: %s" % err) from err

    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            "unsupported checkpoint format %r" % doc.get("format_version")
        )
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise CheckpointError("checkpoint payload missing")

    try:
        config = _config_from_doc(payload["config"])
        grid = _unhex_vec(payload["grid"])
        node_sets = [_unhex_vec(row) for row in payload["node_sets"]]
        state = RenewableState(grid, node_sets, config)
        if state.fingerprint != payload["fingerprint"]:
            raise CheckpointError(
                "fingerprint mismatch: stored %s, recomputed %s"
                % (payload["fingerprint"], state.fingerprint)
            )
        state.N = int(payload["N"])
        state.chunks_applied = int(payload["chunks_applied"])
        state.fX[:] = _unhex_vec(payload["fX"])
        rows = payload["S"]
        if len(rows) != grid.size:
            raise CheckpointError("accumulator row count mismatch")
        for i, row in enumerate(rows):
            vals = _unhex_vec(row)
            if vals.size != state.node_count(i):
                raise CheckpointError("accumulator width mismatch at row %d" % i)
            state.S[i, : vals.size] = vals
        state.E_WY = float.fromhex(payload["E_WY"])
        state.E_WY2 = float.fromhex(payload["E_WY2"])
    except CheckpointError:
        raise
    except (KeyError, ValueError, TypeError) as err:
        raise CheckpointError("corrupt checkpoint field: %s" % err) from err

    bandwidth = None
    if "bandwidth" in payload:
        bw = payload["bandwidth"]
        try:
            bandwidth = BandwidthState(
                C_h=float.fromhex(bw["C_h"]),
                mode=bw["mode"],
                oracle_total=(
                    None if bw["oracle_total"] is None else int(bw["oracle_total"])
                ),
            )
            bandwidth.S_h = float.fromhex(bw["S_h"])
            bandwidth.last_h = float.fromhex(bw["last_h"])
            bandwidth.t = int(bw["t"])
        except (KeyError, ValueError, TypeError) as err:
            raise CheckpointError("corrupt bandwidth field: %s" % err) from err
    return state, bandwidth
