"""Renewable accumulators updated chunk by chunk.

The running statistics are stored as mass-weighted means, so each update
is old * N_prev / N_new + contribution / N_new.  A state updated over any
chunking of a data set agrees with the single-pass computation up to
floating roundoff, and the update order is deterministic, which makes
checkpoint resumes reproduce the uninterrupted run bit for bit.
"""

import copy
from dataclasses import dataclass

import numpy as np

from .config import Config, fingerprint
from .errors import ConfigError, DataError

# Inputs larger than this are folded in deterministic blocks to bound the
# transient memory of the kernel weight matrix.
_BLOCK = 50_000


@dataclass
class Chunk:
    """One batch of (x, y) observations."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise DataError("chunk arrays must be 1-D and equally long")

    @classmethod
    def from_pairs(cls, pairs):
        arr = np.asarray(list(pairs), dtype=float)
        if arr.size == 0:
            return cls(np.empty(0), np.empty(0))
        return cls(arr[:, 0], arr[:, 1])

    def __len__(self):
        return self.x.size

    def require_finite(self):
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise DataError("chunk contains non-finite values")


class RenewableState:
    """Cumulative statistics of the stream at one covariate grid.

    Holds, per grid point x_i, the kernel density estimate f_X(x_i) and
    the sub-CDF values S_i(y_ij) = E_n[1{Y < y_ij} K_h(X - x_i)], plus the
    scalar weighted moments E[W(X) Y] and E[W(X) Y^2].  All fields start
    at zero and are pure functions of the chunk sequence, so a snapshot
    can be read while a single writer keeps updating the original.
    """

    def __init__(self, grid, node_sets, config):
        if not isinstance(config, Config):
            raise ConfigError("config must be a Config instance")
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise ConfigError("grid must be a nonempty 1-D array")
        if not np.all(np.isfinite(grid)):
            raise ConfigError("grid contains non-finite values")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ConfigError("grid must be strictly increasing")
        lo, hi = config.interval
        if grid[0] < lo - 1e-12 or grid[-1] > hi + 1e-12:
            raise ConfigError("grid must lie inside the configured interval")
        node_sets = [np.asarray(row, dtype=float) for row in node_sets]
        if len(node_sets) != grid.size:
            raise ConfigError("need one node set per grid point")
        m = config.degree + 1
        for i, row in enumerate(node_sets):
            if row.ndim != 1 or row.size < m:
                raise ConfigError(
                    "node set %d must hold at least degree+1 nodes" % i
                )
            if not np.all(np.isfinite(row)):
                raise ConfigError("node set %d contains non-finite values" % i)
            if not np.all(np.diff(row) > 0):
                raise ConfigError("node set %d must be strictly increasing" % i)

        self.grid = grid
        self.node_sets = node_sets
        self.config = config
        self.fingerprint = fingerprint(config, grid, node_sets)

        self._counts = np.array([row.size for row in node_sets], dtype=np.intp)
        width = int(self._counts.max())
        # Rectangular padded view of the node sets; the padding value +inf
        # collects total mass during updates but is never read back.
        self._nodes = np.full((grid.size, width), np.inf)
        for i, row in enumerate(node_sets):
            self._nodes[i, : row.size] = row

        self.N = 0
        self.chunks_applied = 0
        self.fX = np.zeros(grid.size)
        self.S = np.zeros((grid.size, width))
        self.E_WY = 0.0
        self.E_WY2 = 0.0

    def node_count(self, i):
        return int(self._counts[i])

    def sub_cdf(self, i):
        """Raw accumulator row (S values at the node set of grid point i)."""
        return self.S[i, : self._counts[i]]

    def snapshot(self):
        """Deep copy safe to read while the original keeps updating."""
        return copy.deepcopy(self)

    def reset(self):
        """Zero all accumulators, keeping grid, node sets and config.

        Equivalent to a fresh ``init_state`` with the same structure but
        without re-validating or re-fingerprinting it, which matters when
        many short-lived estimates share one layout.
        """
        self.N = 0
        self.chunks_applied = 0
        self.fX.fill(0.0)
        self.S.fill(0.0)
        self.E_WY = 0.0
        self.E_WY2 = 0.0


def init_state(grid, node_sets, config):
    """Fresh accumulators (everything zero) for the given structure."""
    return RenewableState(grid, node_sets, config)


def _chunk_sums(state, x, y, h):
    """Per-chunk raw sums of kernel mass and sub-CDF mass."""
    kernel = state.config.kernel_fn
    u = (x[None, :] - state.grid[:, None]) / h
    wk = kernel(u) / h
    f_sum = wk.sum(axis=1)
    order = np.argsort(y, kind="stable")
    ys = y[order]
    csum = np.cumsum(wk[:, order], axis=1)
    padded = np.concatenate([np.zeros((state.grid.size, 1)), csum], axis=1)
    # side="left" counts samples with y strictly below each node.
    pos = np.searchsorted(ys, state._nodes.ravel(), side="left")
    pos = pos.reshape(state._nodes.shape)
    s_sum = np.take_along_axis(padded, pos, axis=1)
    return f_sum, s_sum


def update_chunk(state, chunk, h):
    """Fold one chunk into the accumulators with bandwidth h.

    The state is modified in place and returned.  Nothing is written until
    every contribution has been computed, so a raised error leaves the
    state untouched.  An empty chunk is a no-op.
    """
    if not isinstance(chunk, Chunk):
        chunk = Chunk(np.asarray(chunk)[:, 0], np.asarray(chunk)[:, 1])
    n = len(chunk)
    if n == 0:
        return state
    chunk.require_finite()
    h = float(h)
    if not np.isfinite(h) or h <= 0:
        raise DataError("bandwidth must be a positive finite number")

    f_sum = np.zeros(state.grid.size)
    s_sum = np.zeros_like(state.S)
    for start in range(0, n, _BLOCK):
        xb = chunk.x[start : start + _BLOCK]
        yb = chunk.y[start : start + _BLOCK]
        fb, sb = _chunk_sums(state, xb, yb, h)
        f_sum += fb
        s_sum += sb

    wx = state.config.weight_fn(chunk.x)
    wy_sum = float(np.sum(wx * chunk.y))
    wy2_sum = float(np.sum(wx * chunk.y * chunk.y))

    n_new = state.N + n
    keep = state.N / n_new
    state.fX = keep * state.fX + f_sum / n_new
    state.S = keep * state.S + s_sum / n_new
    state.E_WY = keep * state.E_WY + wy_sum / n_new
    state.E_WY2 = keep * state.E_WY2 + wy2_sum / n_new
    state.N = n_new
    state.chunks_applied += 1
    return state
