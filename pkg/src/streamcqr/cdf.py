"""Interpolated conditional CDF at one covariate grid point.

Node values are the accumulated sub-CDF divided by the kernel density at
the grid point, clamped into [0, 1], then interpolated over the node set.
The derivative of the interpolant, floored at zero, acts as a conditional
density.  A fine evaluation mesh (a fixed number of sub-points per
inter-node interval) supports level-set searches and diagnostics.
"""

import numpy as np

from .errors import DataError, DensityTooSmall, LevelSetEmpty
from .interpolation import Interpolant


class InterpolatedCDF:
    """Clamped interpolant of conditional CDF values over a node set."""

    def __init__(self, interpolant, grid_index, mesh_per_interval, clamped_nodes):
        self.interpolant = interpolant
        self.grid_index = grid_index
        self.y_range = interpolant.y_range
        self.clamped_nodes = clamped_nodes
        self._mesh_per_interval = int(mesh_per_interval)
        self._mesh = None
        self._mesh_F = None
        self._mesh_dF = None

    # -- evaluation ------------------------------------------------------

    def evaluate(self, y):
        return np.clip(self.interpolant.evaluate(y), 0.0, 1.0)

    def eval_clamped(self, y):
        """Clamped values without the exact-node snap (refinement path)."""
        return np.clip(self.interpolant.eval_raw(y), 0.0, 1.0)

    def density(self, y):
        return np.maximum(self.interpolant.derivative(y), 0.0)

    def value_and_density(self, y):
        val, der = self.interpolant.value_and_derivative(y)
        return np.clip(val, 0.0, 1.0), np.maximum(der, 0.0)

    def value_and_slope(self, y):
        """Clamped CDF value together with the raw, signed derivative.

        Quantile integrals in y space must use the signed derivative:
        where the fitted CDF is locally non-monotone, the down strokes
        then cancel the extra up strokes and each quantile level still
        contributes exactly once net.  Flooring the derivative instead
        would count such excursions twice.
        """
        val, der = self.interpolant.value_and_derivative(y)
        return np.clip(val, 0.0, 1.0), der

    # -- fine mesh ---------------------------------------------------------

    @property
    def mesh(self):
        if self._mesh is None:
            nodes = self.interpolant.nodes
            steps = np.arange(self._mesh_per_interval) / self._mesh_per_interval
            cells = nodes[:-1, None] + np.diff(nodes)[:, None] * steps
            self._mesh = np.append(cells.ravel(), nodes[-1])
        return self._mesh

    @property
    def mesh_F(self):
        if self._mesh_F is None:
            self._mesh_F = np.clip(self.interpolant.eval_raw(self.mesh), 0.0, 1.0)
        return self._mesh_F

    @property
    def mesh_density_raw(self):
        """Unfloored interpolant derivative on the mesh."""
        if self._mesh_dF is None:
            self._mesh_dF = self.interpolant.derivative(self.mesh)
        return self._mesh_dF

    @property
    def nonmonotone_cells(self):
        """Number of mesh points where the raw derivative is negative."""
        return int(np.count_nonzero(self.mesh_density_raw < 0.0))


def build_cdf(state, grid_index):
    """Conditional CDF of Y at state.grid[grid_index].

    Raises DensityTooSmall when the kernel mass at the grid point is below
    the configured floor, making the node-value ratio unstable.
    """
    if state.N <= 0:
        raise DataError("state holds no data")
    i = int(grid_index)
    fx = float(state.fX[i])
    floor = state.config.density_floor
    if not fx >= floor:
        raise DensityTooSmall(i, fx, floor)
    nodes = state.node_sets[i]
    raw = state.sub_cdf(i) / fx
    vals = np.clip(raw, 0.0, 1.0)
    clamped = int(np.count_nonzero(raw != vals))
    interp = Interpolant(nodes, vals, min(state.config.degree, nodes.size - 1))
    return InterpolatedCDF(interp, i, state.config.mesh_per_interval, clamped)


def cdf_density(cdf, y):
    """Interpolant derivative floored at zero."""
    return cdf.density(y)


def refine_levels(cdf, a, b, fa, fb, targets, iters=16):
    """Roots of F(y) = target inside bracketing cells, batched.

    Alternates secant and bisection steps on the clamped interpolant, so
    every bracket shrinks even on nearly flat or step-like cells.  All
    brackets advance together with one evaluation per iteration; brackets
    that lie inside a single stencil region (the common case: callers cut
    cells at nodes and stencil switches) reuse one gathered coefficient
    row per element instead of paying a window lookup every iteration.
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    fa = np.array(fa, dtype=float, copy=True)
    fb = np.array(fb, dtype=float, copy=True)
    targets = np.asarray(targets, dtype=float)
    if a.size == 0:
        return a
    interp = cdf.interpolant
    w = interp.segment_windows(a, b)
    mids = interp.stencil_breaks
    if mids.size:
        lo_ok = (w == 0) | (mids[np.maximum(w - 1, 0)] <= a)
        hi_ok = (w == mids.size) | (mids[np.minimum(w, mids.size - 1)] >= b)
        fixed = lo_ok & hi_ok
    else:
        fixed = np.ones(a.shape, dtype=bool)
    moving = ~fixed if not fixed.all() else None
    base = interp.nodes[w]
    coef = interp._poly[w]
    last = coef.shape[-1] - 1
    ftol = 1e-13
    wtol = 1e-13
    if a.size <= 16:
        # Small batches are dispatch-bound; plain float arithmetic with
        # per-element early exit is several times faster here.
        out = np.empty_like(a)
        for i in range(a.size):
            ai, bi = float(a[i]), float(b[i])
            fai, fbi = float(fa[i]), float(fb[i])
            tg = float(targets[i])
            if fixed[i]:
                cs = coef[i].tolist()
                bs = float(base[i])
            else:
                cs = None
            for k in range(iters):
                if k % 2 == 0 and fbi != fai:
                    mi = ai + (tg - fai) * (bi - ai) / (fbi - fai)
                    if not ai < mi < bi:
                        mi = 0.5 * (ai + bi)
                else:
                    mi = 0.5 * (ai + bi)
                if cs is not None:
                    t = mi - bs
                    fmi = cs[last]
                    for j in range(last - 1, -1, -1):
                        fmi = fmi * t + cs[j]
                else:
                    fmi = float(interp.eval_raw(np.asarray([mi]))[0])
                fmi = min(1.0, max(0.0, fmi))
                if (fai - tg) * (fmi - tg) <= 0.0:
                    bi, fbi = mi, fmi
                else:
                    ai, fai = mi, fmi
                # converged when the value hits the target, the cell is
                # exhausted, or the bracket's value range is negligible
                # (flat stretches, where any bracketed y carries the
                # same CDF mass)
                if abs(fmi - tg) < ftol or bi - ai < wtol or abs(fbi - fai) < ftol:
                    break
            if fbi != fai:
                mi = ai + (tg - fai) * (bi - ai) / (fbi - fai)
                if not ai <= mi <= bi:
                    mi = 0.5 * (ai + bi)
            else:
                mi = 0.5 * (ai + bi)
            out[i] = mi
        return out
    for k in range(iters):
        den = np.where(fb != fa, fb - fa, 1.0)
        m = a + (targets - fa) * (b - a) / den
        use_sec = (k % 2 == 0) & (fb != fa) & (a < m) & (m < b)
        m = np.where(use_sec, m, 0.5 * (a + b))
        t = m - base
        fm = coef[:, last].copy()
        for j in range(last - 1, -1, -1):
            fm = fm * t + coef[:, j]
        if moving is not None:
            fm[moving] = interp.eval_raw(m[moving])
        fm = np.clip(fm, 0.0, 1.0)
        left = (fa - targets) * (fm - targets) <= 0.0
        b = np.where(left, m, b)
        fb = np.where(left, fm, fb)
        a = np.where(left, a, m)
        fa = np.where(left, fa, fm)
        done = (
            (np.abs(fm - targets) < ftol)
            | (b - a < wtol)
            | (np.abs(fb - fa) < ftol)
        )
        if done.all():
            break
    den = np.where(fb != fa, fb - fa, 1.0)
    m = a + (targets - fa) * (b - a) / den
    good = (fb != fa) & (a <= m) & (m <= b)
    return np.where(good, m, 0.5 * (a + b))


def _refine_root(cdf, lo, hi, flo, fhi, target, iters=16):
    return float(refine_levels(cdf, [lo], [hi], [flo], [fhi], [target], iters)[0])


def support_preimage(cdf, utau, btau):
    """Smallest closed interval containing {y : utau <= F(y) <= btau}.

    The edges are located on the partition cut at stencil switches and
    interior extrema, between which the clamped interpolant is monotone.
    A monotone piece attains exactly the values between its endpoint
    readings, so a piece meets the band if and only if its endpoint
    range does — entries can never hide between evaluation points, even
    where the fit is steep enough to cross the whole band within one
    piece.  Edges falling strictly inside a piece are then refined.
    Raises LevelSetEmpty when the CDF never enters [utau, btau] on its
    node range.
    """
    if not 0.0 <= utau < btau <= 1.0:
        raise DataError("need 0 <= utau < btau <= 1")
    interp = cdf.interpolant
    pts = [interp.nodes[:1], interp.nodes[-1:]]
    if interp.stencil_breaks.size:
        pts.append(interp.stencil_breaks)
    ext = interp.extrema()
    if ext.size:
        pts.append(ext)
    pts = np.unique(np.concatenate(pts))
    pts = pts[(pts >= interp.nodes[0]) & (pts <= interp.nodes[-1])]
    g = cdf.eval_clamped(pts)
    if pts.size == 1:
        if utau <= g[0] <= btau:
            return float(pts[0]), float(pts[0])
        raise LevelSetEmpty(
            "CDF at grid index %s stays outside [%g, %g]"
            % (cdf.grid_index, utau, btau)
        )
    touch = (np.maximum(g[:-1], g[1:]) >= utau) & (
        np.minimum(g[:-1], g[1:]) <= btau
    )
    if not touch.any():
        raise LevelSetEmpty(
            "CDF at grid index %s stays outside [%g, %g]"
            % (cdf.grid_index, utau, btau)
        )
    first = int(np.argmax(touch))
    last = int(touch.size - 1 - np.argmax(touch[::-1]))
    if utau <= g[first] <= btau:
        lo = float(pts[first])
    else:
        target = utau if g[first] < utau else btau
        lo = _refine_root(
            cdf, pts[first], pts[first + 1], g[first], g[first + 1], target
        )
    if utau <= g[last + 1] <= btau:
        hi = float(pts[last + 1])
    else:
        target = btau if g[last + 1] > btau else utau
        hi = _refine_root(
            cdf, pts[last], pts[last + 1], g[last], g[last + 1], target
        )
    return lo, hi
