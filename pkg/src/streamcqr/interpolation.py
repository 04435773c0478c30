"""Local Lagrange interpolation on the nearest-node stencil.

The interpolant of degree l through a sorted node set evaluates, at any
point y, the Lagrange polynomial through the l+1 nodes nearest to y.
Nearness ties are broken toward the smaller node, so the selected stencil
is always a contiguous window of the node array and the window start is a
step function of y that switches at midpoints between window extremes.
"""

import numpy as np

from .errors import ConfigError


def _as_sorted_nodes(nodes):
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 1:
        raise ConfigError("node set must be a nonempty 1-D array")
    if not np.all(np.isfinite(nodes)):
        raise ConfigError("node set contains non-finite values")
    if nodes.size > 1 and not np.all(np.diff(nodes) > 0):
        raise ConfigError("node set must be strictly increasing")
    return nodes


def nearest_nodes(y, nodes, count):
    """The `count` nodes nearest to y, ties resolved toward smaller nodes.

    Returns the selected nodes in ascending order.  The selection S
    satisfies |y - s| <= |y - t| for every s in S and t outside S, and
    whenever equality holds the smaller value is the one inside S.
    """
    nodes = _as_sorted_nodes(nodes)
    count = int(count)
    if not 1 <= count <= nodes.size:
        raise ConfigError("count must be between 1 and the number of nodes")
    start = _window_start(np.asarray(y, dtype=float), nodes, count)
    return nodes[start : start + count]


def _window_start(y, nodes, size):
    """Start index of the `size` nearest-node window, vectorized over y.

    The window switches from start k to k+1 exactly where y passes the
    midpoint of nodes[k] and nodes[k+size]; at the midpoint itself the tie
    rule keeps the left window (the smaller node stays in).
    """
    if nodes.size == size:
        return np.zeros(np.shape(y), dtype=np.intp) if np.ndim(y) else 0
    mids = 0.5 * (nodes[: nodes.size - size] + nodes[size:])
    # side="left" counts only midpoints strictly below y, so y equal to a
    # midpoint falls in the earlier window, which is the tie rule.
    return np.searchsorted(mids, y, side="left")


def basis(y, index, nodes, degree):
    """Value of the interpolation basis attached to nodes[index] at y.

    This is the Lagrange cardinal function of the degree+1 nearest nodes
    when nodes[index] belongs to that stencil, and zero otherwise.
    """
    nodes = _as_sorted_nodes(nodes)
    m = int(degree) + 1
    if nodes.size < m:
        raise ConfigError("need at least degree+1 nodes")
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    start = np.atleast_1d(_window_start(y_arr, nodes, m))
    out = np.zeros_like(y_arr)
    inside = (start <= index) & (index < start + m)
    if np.any(inside):
        ys = y_arr[inside]
        st = start[inside]
        win = st[:, None] + np.arange(m)
        xn = nodes[win]
        pos = index - st
        d = ys[:, None] - xn
        num = np.ones_like(ys)
        den = np.ones_like(ys)
        rows = np.arange(ys.size)
        xi = xn[rows, pos]
        for j in range(m):
            mask = j != pos
            num = np.where(mask, num * d[:, j], num)
            den = np.where(mask, den * (xi - xn[:, j]), den)
        out[inside] = num / den
    return out if np.ndim(y) else float(out[0])


def error_bound(max_deriv, spacing, degree):
    """Sup-norm interpolation error bound ||f^(l+1)|| * spacing^(l+1)."""
    return float(max_deriv) * float(spacing) ** (int(degree) + 1)


class Interpolant:
    """Piecewise Lagrange interpolant over the nearest-node stencil.

    Parameters
    ----------
    nodes : array
        Strictly increasing interpolation nodes (at least degree+1).
    values : array
        Values at the nodes.
    degree : int
        Local polynomial degree l; each evaluation uses the l+1 nearest
        nodes.

    Evaluation at a node reproduces the stored value exactly.  Outside
    [nodes[0], nodes[-1]] the boundary stencil extrapolates; use
    ``within`` to detect that.
    """

    def __init__(self, nodes, values, degree):
        self.nodes = _as_sorted_nodes(nodes)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != self.nodes.shape:
            raise ConfigError("values must match nodes in shape")
        self.degree = int(degree)
        if self.degree < 0:
            raise ConfigError("degree must be nonnegative")
        m = self.degree + 1
        if self.nodes.size < m:
            raise ConfigError("need at least degree+1 nodes")
        self._m = m
        q = self.nodes.size
        if q == m:
            self._mids = np.empty(0)
        else:
            self._mids = 0.5 * (self.nodes[: q - m] + self.nodes[m:])
        self._extrema = None
        self._build_windows()

    def _build_windows(self):
        """Power-basis coefficients of every stencil window.

        Window w interpolates nodes[w : w+m]; its polynomial is stored in
        the local variable t = y - nodes[w] (Newton's divided differences
        expanded), so evaluation is a gather plus one Horner loop instead
        of a Lagrange product per query.
        """
        m = self._m
        q = self.nodes.size
        idx = np.arange(q - m + 1)[:, None] + np.arange(m)
        X = self.nodes[idx] - self.nodes[idx[:, :1]]
        coef = self.values[idx].copy()
        for k in range(1, m):
            coef[:, k:] = (coef[:, k:] - coef[:, k - 1 : m - 1]) / (
                X[:, k:] - X[:, : m - k]
            )
        poly = np.zeros_like(coef)
        poly[:, 0] = coef[:, m - 1]
        deg = 0
        for j in range(m - 2, -1, -1):
            shifted = np.zeros_like(poly)
            shifted[:, 1 : deg + 2] = poly[:, : deg + 1]
            shifted[:, : deg + 1] -= X[:, j, None] * poly[:, : deg + 1]
            shifted[:, 0] += coef[:, j]
            poly = shifted
            deg += 1
        self._poly = poly
        self._dpoly = poly[:, 1:] * np.arange(1, m)

    @property
    def y_range(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    def extrema(self):
        """Interior points where the evaluated derivative vanishes.

        Each stencil window contributes the real roots of its derivative
        polynomial that fall inside the region where that window is
        active.  Between consecutive returned points (and the stencil
        switch points) the interpolant is strictly monotone, which makes
        exact running-maximum walks possible.  The result is cached.
        """
        if self._extrema is None:
            self._extrema = self._find_extrema()
        return self._extrema

    def _find_extrema(self):
        count = self._poly.shape[0]
        if self._m <= 2 or count == 0:
            return np.empty(0)
        base = self.nodes[:count]
        lo = np.concatenate(([self.nodes[0]], self._mids))
        hi = np.concatenate((self._mids, [self.nodes[-1]]))
        d = self._dpoly
        roots = []
        if self._m == 3:
            t = np.full(count, np.nan)
            nz = d[:, 1] != 0
            t[nz] = -d[nz, 0] / d[nz, 1]
            roots.append(base + t)
        elif self._m == 4:
            a, b, c = d[:, 0], d[:, 1], d[:, 2]
            disc = b * b - 4.0 * c * a
            quad = (c != 0) & (disc >= 0)
            s = np.sqrt(np.where(quad, disc, 0.0))
            # root pair via the numerically stable split q/c, a/q
            qq = -0.5 * (b + np.where(b >= 0, s, -s))
            t1 = np.full(count, np.nan)
            t2 = np.full(count, np.nan)
            t1[quad] = qq[quad] / c[quad]
            safe = quad & (qq != 0)
            t2[safe] = a[safe] / qq[safe]
            lin = (c == 0) & (b != 0)
            t1[lin] = -a[lin] / b[lin]
            roots.append(base + t1)
            roots.append(base + t2)
        else:
            for w in range(count):
                rr = np.roots(d[w, ::-1])
                rr = rr[np.isreal(rr)].real + base[w]
                rr = rr[(rr > lo[w]) & (rr < hi[w])]
                roots.append(rr)
            return np.unique(np.concatenate(roots)) if roots else np.empty(0)
        out = []
        for r in roots:
            keep = np.isfinite(r) & (r > lo) & (r < hi)
            out.append(r[keep])
        return np.unique(np.concatenate(out))

    @property
    def stencil_breaks(self):
        """Points where the active stencil switches (midpoint rule)."""
        return self._mids

    def within(self, y):
        y = np.asarray(y, dtype=float)
        return (y >= self.nodes[0]) & (y <= self.nodes[-1])

    def _starts(self, y):
        if self._mids.size == 0:
            return np.zeros(y.shape, dtype=np.intp)
        return np.searchsorted(self._mids, y, side="left")

    def segment_windows(self, a, b):
        """Stencil window active on each open segment (a_j, b_j)."""
        return self._starts(0.5 * (np.asarray(a, float) + np.asarray(b, float)))

    def window_eval(self, start, y):
        """Value and derivative of explicit window polynomials at y.

        The interpolant can jump at a stencil switch; evaluating with the
        window of the surrounding segment yields the one-sided limits that
        piecewise walks and per-segment quadrature need, instead of the
        global left-of-switch convention of ``evaluate``.
        """
        start = np.asarray(start)
        y = np.asarray(y, dtype=float)
        t = y - self.nodes[start]
        c = self._poly[start]
        val = c[..., self._m - 1].copy()
        for k in range(self._m - 2, -1, -1):
            val = val * t + c[..., k]
        if self._m == 1:
            der = np.zeros(y.shape)
        else:
            d = self._dpoly[start]
            der = d[..., self._m - 2].copy()
            for k in range(self._m - 3, -1, -1):
                der = der * t + d[..., k]
        return val, der

    def _fix_node_hits(self, y, val):
        """Values at exact node positions are the stored values, bitwise."""
        pos = np.searchsorted(self.nodes, y, side="left")
        inb = pos < self.nodes.size
        hit = np.zeros(y.shape, dtype=bool)
        hit[inb] = self.nodes[pos[inb]] == y[inb]
        if np.any(hit):
            val[hit] = self.values[pos[hit]]
        return val

    def evaluate(self, y):
        scalar = np.ndim(y) == 0
        y = np.atleast_1d(np.asarray(y, dtype=float))
        start = self._starts(y)
        c = self._poly[start]
        t = y - self.nodes[start]
        val = c[:, self._m - 1].copy()
        for k in range(self._m - 2, -1, -1):
            val = val * t + c[:, k]
        val = self._fix_node_hits(y, val)
        return float(val[0]) if scalar else val

    def eval_raw(self, y):
        """Array-only evaluation without the exact-node snap.

        Root refinement probes strictly interior points thousands of
        times; it needs neither scalar handling nor bitwise node
        reproduction, and skipping both saves a searchsorted per call.
        """
        start = self._starts(y)
        c = self._poly[start]
        t = y - self.nodes[start]
        val = c[:, self._m - 1].copy()
        for k in range(self._m - 2, -1, -1):
            val = val * t + c[:, k]
        return val

    def derivative(self, y):
        scalar = np.ndim(y) == 0
        y = np.atleast_1d(np.asarray(y, dtype=float))
        start = self._starts(y)
        t = y - self.nodes[start]
        if self._m == 1:
            der = np.zeros(y.shape)
        else:
            d = self._dpoly[start]
            der = d[:, self._m - 2].copy()
            for k in range(self._m - 3, -1, -1):
                der = der * t + d[:, k]
        return float(der[0]) if scalar else der

    def value_and_derivative(self, y):
        """Evaluate the interpolant and its derivative in one pass."""
        scalar = np.ndim(y) == 0
        y = np.atleast_1d(np.asarray(y, dtype=float))
        start = self._starts(y)
        t = y - self.nodes[start]
        c = self._poly[start]
        val = c[:, self._m - 1].copy()
        for k in range(self._m - 2, -1, -1):
            val = val * t + c[:, k]
        val = self._fix_node_hits(y, val)
        if self._m == 1:
            der = np.zeros(y.shape)
        else:
            d = self._dpoly[start]
            der = d[:, self._m - 2].copy()
            for k in range(self._m - 3, -1, -1):
                der = der * t + d[:, k]
        if scalar:
            return float(val[0]), float(der[0])
        return val, der
