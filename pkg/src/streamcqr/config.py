"""Structural configuration, covariate weights, and fingerprints."""

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .kernels import get_kernel
from .weights import trim_bounds

GRID_SIZE = 100
TAU_COUNT = 99
ALPHA = 0.1
DEGREE = 3
VALIDATION_SIZE = 2000
DENSITY_FLOOR_REL = 1e-6
SEPARATION_FLOOR = 1e-8
MESH_PER_INTERVAL = 40
REFINE_FACTOR = 4


def _indicator_weight(lo, hi):
    def weight(x):
        x = np.asarray(x, dtype=float)
        return ((x >= lo) & (x <= hi)).astype(float)

    return weight


def _poly_weight(lo, hi, coeffs):
    coeffs = [float(c) for c in coeffs]

    def weight(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in reversed(coeffs):
            out = out * x + c
        return np.where((x >= lo) & (x <= hi), out, 0.0)

    return weight


def resolve_weight(descriptor, interval):
    """Covariate weight W from its descriptor string.

    "indicator" is the default W(x) = 1{x in I}; "poly:c0,c1,..." is a
    polynomial in x inside the interval and zero outside.
    """
    lo, hi = interval
    if descriptor == "indicator":
        return _indicator_weight(lo, hi)
    if descriptor.startswith("poly:"):
        parts = descriptor[len("poly:") :].split(",")
        try:
            coeffs = [float(p) for p in parts]
        except ValueError:
            raise ConfigError("bad polynomial weight descriptor %r" % descriptor)
        return _poly_weight(lo, hi, coeffs)
    raise ConfigError("unknown covariate weight descriptor %r" % descriptor)


@dataclass
class Config:
    """Structural settings shared by the accumulators and the estimators.

    Parameters
    ----------
    interval : (float, float)
        Estimation interval on the covariate axis.
    alpha : float
        Trimming level of the composite quantile weights.
    degree : int
        Local interpolation degree l.
    kernel : str
        Kernel registry name.
    weight : str
        Covariate weight descriptor (see ``resolve_weight``).
    symmetric_model : bool
        Whether the error law is treated as symmetric (the location weight
        is then fixed at w = 0.5 inside scale estimation).
    """

    interval: tuple
    alpha: float = ALPHA
    degree: int = DEGREE
    kernel: str = "epanechnikov"
    weight: str = "indicator"
    symmetric_model: bool = False
    density_floor_rel: float = DENSITY_FLOOR_REL
    separation_floor: float = SEPARATION_FLOOR
    mesh_per_interval: int = MESH_PER_INTERVAL
    refine_factor: int = REFINE_FACTOR

    def __post_init__(self):
        lo, hi = (float(self.interval[0]), float(self.interval[1]))
        if not np.isfinite([lo, hi]).all() or not lo < hi:
            raise ConfigError("interval must be finite with low < high")
        self.interval = (lo, hi)
        if not 0.0 < self.alpha < 0.5:
            raise ConfigError("alpha must lie strictly between 0 and 0.5")
        if self.degree < 1:
            raise ConfigError("interpolation degree must be at least 1")
        get_kernel(self.kernel)
        resolve_weight(self.weight, self.interval)

    @property
    def kernel_fn(self):
        return get_kernel(self.kernel)

    @property
    def weight_fn(self):
        return resolve_weight(self.weight, self.interval)

    @property
    def utau(self):
        return trim_bounds(self.alpha)[0]

    @property
    def btau(self):
        return trim_bounds(self.alpha)[1]

    @property
    def density_floor(self):
        lo, hi = self.interval
        return self.density_floor_rel / (hi - lo)

    def with_updates(self, **kw):
        return replace(self, **kw)


def fingerprint(config, grid, node_sets):
    """Hash of everything that must match for accumulators to be merged."""
    doc = {
        "interval": [x.hex() for x in map(float, config.interval)],
        "alpha": float(config.alpha).hex(),
        "degree": int(config.degree),
        "kernel": config.kernel,
        "weight": config.weight,
        "grid": [float(x).hex() for x in np.asarray(grid, dtype=float)],
        "nodes": [
            [float(x).hex() for x in np.asarray(row, dtype=float)]
            for row in node_sets
        ],
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------
# Flat key = value files used by the command line tools.

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_kv_file(path):
    """Parse a flat ``key = value`` text file; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("%s:%d: expected 'key = value'" % (path, lineno))
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError("%s:%d: empty key" % (path, lineno))
            if key in out:
                raise ConfigError("%s:%d: duplicate key %r" % (path, lineno, key))
            out[key] = value.strip()
    return out


def kv_bool(raw, key):
    low = raw.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError("key %r: expected a boolean, got %r" % (key, raw))


def kv_float(raw, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError("key %r: expected a number, got %r" % (key, raw)) from None


def kv_int(raw, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("key %r: expected an integer, got %r" % (key, raw)) from None


def kv_floats(raw, key):
    try:
        return [float(p) for p in raw.split(",") if p.strip()]
    except ValueError:
        raise ConfigError("key %r: expected comma separated numbers" % key) from None
