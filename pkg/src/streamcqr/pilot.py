"""Pilot grids: per-site quantile nodes from a validation sample.

Every site on the evaluation grid gets a ladder of local response
quantiles (one per level j/(q+1)).  These ladders fix the node layout of
the per-site distribution interpolants before any streaming starts, so
they only depend on the validation prefix of the data.
"""

import math

import numpy as np

from .errors import ChunkTooSmall, ConfigError


def check_loss(u, tau):
    """Quantile check loss u * (tau - 1{u <= 0})."""
    u = np.asarray(u, dtype=float)
    return u * (tau - (u <= 0.0))


def tau_levels(tau_count):
    """Equally spaced interior levels j / (tau_count + 1)."""
    j = np.arange(1, tau_count + 1, dtype=float)
    return j / (tau_count + 1.0)


def _order_indices(k, taus):
    """1-based order-statistic index of the lower tau-quantile of k points.

    The minimizer of the empirical check loss is the ceil(k*tau)-th order
    statistic, the lower end of the minimizing interval when k*tau is an
    integer.  The 1e-9 slack keeps float products like 5 * 0.2 from
    rounding up to the next statistic.
    """
    idx = np.ceil(k * np.asarray(taus, dtype=float) - 1e-9).astype(int)
    return np.clip(idx, 1, k)


def local_quantile(x0, x, y, tau, k):
    """Lower tau-quantile of the k responses nearest to x0.

    Ties in |x - x0| keep the point with the smaller covariate.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if k < 1 or k > x.size:
        raise ConfigError("neighbor count out of range")
    order = np.lexsort((x, np.abs(x - x0)))
    ys = np.sort(y[order[:k]])
    return float(ys[_order_indices(k, [tau])[0] - 1])


def _strictly_increasing(nodes):
    """Nudge duplicate node values up by a deterministic ladder."""
    span = nodes[-1] - nodes[0]
    if span <= 0.0:
        span = max(1.0, abs(nodes[0]))
    eps = 1e-9 * span
    out = nodes.copy()
    for j in range(1, out.size):
        if out[j] <= out[j - 1]:
            out[j] = out[j - 1] + eps
    return out


def build_grids(x, y, interval, grid_size=100, tau_count=99, neighbors=None):
    """Evaluation grid and per-site node ladders.

    Returns (grid, node_sets) with grid of shape (grid_size,) and
    node_sets of shape (grid_size, tau_count), rows strictly increasing.
    The neighbor count defaults to max(ceil(0.1 n), tau_count).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError("x and y must be equal-length vectors")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ConfigError("interval must have positive length")
    n = x.size
    k = neighbors if neighbors is not None else max(math.ceil(0.1 * n), tau_count)
    if k > n:
        raise ChunkTooSmall(
            "validation sample of %d cannot supply %d neighbors" % (n, k)
        )

    grid = np.linspace(lo, hi, grid_size)
    taus = tau_levels(tau_count)
    pick = _order_indices(k, taus) - 1

    node_sets = np.empty((grid_size, tau_count))
    for i, x0 in enumerate(grid):
        order = np.lexsort((x, np.abs(x - x0)))
        ys = np.sort(y[order[:k]])
        node_sets[i] = _strictly_increasing(ys[pick])
    return grid, node_sets
