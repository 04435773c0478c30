"""Piecewise-polynomial weight functions on the quantile scale.

A weight function J lives on [0, 1] and is zero outside its support.
It is stored as breakpoints t_0 < ... < t_P plus one coefficient row per
interval; the row holds polynomial coefficients (low degree first) in the
local variable u = tau - t_k, which keeps narrow pieces well conditioned.
"""

import math

import numpy as np

from .errors import ConfigError


def _shift_poly(coeffs, delta):
    """Coefficients of p(u + delta) given those of p(u)."""
    out = np.zeros_like(coeffs)
    for d, c in enumerate(coeffs):
        for j in range(d + 1):
            out[j] += c * math.comb(d, j) * delta ** (d - j)
    return out


class WeightFunction:
    """A piecewise polynomial weight on the quantile scale.

    Point evaluation assigns each breakpoint to the piece on its left,
    except the first breakpoint which belongs to the first piece; outside
    [t_0, t_P] the function is zero.  This realizes closed lower pieces
    such as the indicator of [alpha, 0.5] followed by (0.5, 1 - alpha].
    """

    def __init__(self, breakpoints, coeffs, support=None):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or not np.all(np.diff(bp) > 0):
            raise ConfigError("breakpoints must be strictly increasing, length >= 2")
        if np.any(bp < -1e-12) or np.any(bp > 1 + 1e-12):
            raise ConfigError("breakpoints must lie in [0, 1]")
        co = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if co.shape[0] != bp.size - 1:
            raise ConfigError("need one coefficient row per interval")
        self.breakpoints = bp
        self.coeffs = co
        self.support = (float(bp[0]), float(bp[-1])) if support is None else (
            float(support[0]),
            float(support[1]),
        )
        self._piece_cum = None

    # -- evaluation ----------------------------------------------------

    def piece_index(self, tau):
        """Index of the active piece per point, -1 where J is zero."""
        tau = np.asarray(tau, dtype=float)
        idx = np.searchsorted(self.breakpoints, tau, side="left") - 1
        idx = np.where(tau == self.breakpoints[0], 0, idx)
        outside = (tau < self.breakpoints[0]) | (tau > self.breakpoints[-1])
        return np.where(outside, -1, idx)

    def piece_eval(self, piece, tau):
        """Evaluate given per-point piece indices (-1 meaning zero)."""
        tau = np.asarray(tau, dtype=float)
        piece = np.asarray(piece)
        safe = np.clip(piece, 0, None)
        u = tau - self.breakpoints[safe]
        rows = self.coeffs[safe]
        out = np.zeros_like(tau)
        for d in range(rows.shape[-1] - 1, -1, -1):
            out = out * u + rows[..., d]
        return np.where(piece < 0, 0.0, out)

    def __call__(self, tau):
        scalar = np.ndim(tau) == 0
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = self.piece_eval(self.piece_index(tau), tau)
        return float(out[0]) if scalar else out

    # -- calculus ------------------------------------------------------

    def integral(self):
        """Exact integral of J over [0, 1]."""
        widths = np.diff(self.breakpoints)
        terms = []
        for k, w in enumerate(widths):
            for d, c in enumerate(self.coeffs[k]):
                terms.append(c * w ** (d + 1) / (d + 1))
        return math.fsum(terms)

    def cumulative(self, tau):
        """Exact integral of J from the lower support edge up to tau.

        Constant outside [t_0, t_P] (J vanishes there), so differences of
        this function give the J-mass of arbitrary quantile intervals.
        """
        tau = np.asarray(tau, dtype=float)
        u = np.clip(tau, self.breakpoints[0], self.breakpoints[-1])
        idx = np.clip(
            np.searchsorted(self.breakpoints, u, side="right") - 1,
            0,
            self.coeffs.shape[0] - 1,
        )
        t = u - self.breakpoints[idx]
        rows = self.coeffs[idx]
        part = np.zeros_like(t)
        for d in range(rows.shape[-1] - 1, -1, -1):
            part = part * t + rows[..., d] / (d + 1)
        part = part * t
        if self._piece_cum is None:
            widths = np.diff(self.breakpoints)
            masses = np.zeros(widths.size)
            for k, w in enumerate(widths):
                masses[k] = math.fsum(
                    c * w ** (d + 1) / (d + 1)
                    for d, c in enumerate(self.coeffs[k])
                )
            self._piece_cum = np.concatenate(([0.0], np.cumsum(masses)))
        return self._piece_cum[idx] + part

    def integral_against(self, fn, tol=1e-11):
        """Adaptive quadrature of J(tau) * fn(tau) over the support."""
        from scipy.integrate import quad

        total = []
        for k in range(self.breakpoints.size - 1):
            a, b = self.breakpoints[k], self.breakpoints[k + 1]
            val = quad(lambda t: self(t) * fn(t), a, b, epsabs=tol, limit=200)[0]
            total.append(val)
        return math.fsum(total)

    def scaled(self, factor):
        return WeightFunction(
            self.breakpoints, self.coeffs * float(factor), self.support
        )

    @staticmethod
    def combine(terms):
        """Linear combination sum_i a_i * J_i as a single weight function.

        `terms` is a sequence of (a_i, J_i) pairs.
        """
        bps = np.unique(np.concatenate([J.breakpoints for _, J in terms]))
        width = bps.size - 1
        deg = max(J.coeffs.shape[1] for _, J in terms)
        coeffs = np.zeros((width, deg))
        for a, J in terms:
            idx = J.piece_index(0.5 * (bps[:-1] + bps[1:]))
            for k in range(width):
                p = idx[k]
                if p < 0:
                    continue
                shifted = _shift_poly(J.coeffs[p], bps[k] - J.breakpoints[p])
                coeffs[k, : shifted.size] += a * shifted
        return WeightFunction(bps, coeffs)


def trim_bounds(alpha):
    """Quantile band (alpha, 0.5 + (0.5 - alpha)) of the trimmed weights.

    The upper bound is built as 0.5 plus the lower half-width so that both
    halves have exactly the same floating-point width; it differs from
    1 - alpha by at most one ulp.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise ConfigError("alpha must lie strictly between 0 and 0.5")
    half = 0.5 - alpha
    return alpha, 0.5 + half


def trimmed_component(alpha, side):
    """Uniform weight over one trimmed half of the quantile range.

    The lower component puts mass 1/(0.5 - alpha) on [alpha, 0.5], the
    upper one the same mass on (0.5, 1 - alpha]; each integrates to one.
    """
    utau, btau = trim_bounds(alpha)
    c = 1.0 / (0.5 - utau)
    if side == "lower":
        return WeightFunction([utau, 0.5], [[c]])
    if side == "upper":
        return WeightFunction([0.5, btau], [[c]])
    raise ConfigError("side must be 'lower' or 'upper'")


def mean_weight(alpha, w):
    """Location weight w * L_alpha + (1 - w) * U_alpha.

    Integrates to one for any w; w = 0.5 is the symmetric trimmed mean.
    """
    utau, btau = trim_bounds(alpha)
    w = float(w)
    c = 1.0 / (0.5 - utau)
    return WeightFunction([utau, 0.5, btau], [[w * c], [(1.0 - w) * c]])


def sd_weight(alpha, theta):
    """Scale weight theta * (U_alpha - L_alpha); integrates to zero."""
    utau, btau = trim_bounds(alpha)
    theta = float(theta)
    c = 1.0 / (0.5 - utau)
    return WeightFunction([utau, 0.5, btau], [[-theta * c], [theta * c]])
