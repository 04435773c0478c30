"""Curve estimators built on the interpolated conditional CDF.

The central quantity is the weighted quantile integral

    r(x; J) = integral of y * J(F(y)) dF(y)

taken over the preimage of the weight support, with F read through its
running maximum so that the integral equals the weighted integral of
the first-crossing quantile function.  A fitted CDF interpolated
through noisy node values need not be monotone; the first-crossing
inverse ignores every stretch where F sits below an earlier high, and
so does this integral.  Flooring the interpolant derivative at zero
would instead double count such excursions and systematically inflate
every integral.

The quadrature is a composite Simpson rule whose panels are aligned
with every point where the integrand can lose smoothness: node points,
stencil switches and interior extrema of the interpolant, and the
crossings of each breakpoint of J.  Between such points F is a single
monotone polynomial of degree l and J sits on a single piece, so the
integrand is polynomial and the quadrature error is negligible; for
the identity CDF the rule is exact up to roundoff.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .cdf import build_cdf, refine_levels, support_preimage
from .errors import (
    CurvePointError,
    DataError,
    DegenerateSeparation,
    DensityTooSmall,
    LevelSetEmpty,
    NegativeVariance,
    ZeroDenominator,
)
from .interpolation import Interpolant
from .weights import WeightFunction, mean_weight, sd_weight, trimmed_component

# Composite Simpson with eight subintervals per panel; weights already
# divided by 3 so a panel integral is (b - a) / 8 * dot(weights, values).
_PANEL_OFFSETS = np.arange(9) / 8.0
_PANEL_WEIGHTS = np.array([1, 4, 2, 4, 2, 4, 2, 4, 1]) / 3.0


@dataclass
class CurveEstimate:
    """A fitted curve over the covariate grid.

    ``grid``/``values`` hold the grid points where estimation succeeded;
    ``skipped`` lists (grid_index, reason) pairs for the others.  The
    interpolant extends the values to the whole interval.
    """

    grid: np.ndarray
    values: np.ndarray
    interpolant: Interpolant
    kind: str
    skipped: list = field(default_factory=list)
    params: object = None

    def __call__(self, x):
        return self.interpolant.evaluate(x)


@dataclass
class ScalarWeightParams:
    """Data-driven scalar weights and the moments behind them."""

    w_hat: float = math.nan
    theta_hat: float = math.nan
    E_WY: float = math.nan
    E_WL: float = math.nan
    E_WU: float = math.nan
    E_WY2: float = math.nan
    E_Wm2: float = math.nan
    E_Wr2: float = math.nan


# ---------------------------------------------------------------------
# The weighted quantile integral.


def _crossings(cdf, levels, lo, hi):
    """y positions inside (lo, hi) where the mesh CDF crosses each level."""
    mesh = cdf.mesh
    F = cdf.mesh_F
    sel = (mesh >= lo) & (mesh <= hi)
    if sel.sum() < 2:
        return np.empty(0)
    m = mesh[sel]
    f = F[sel]
    s = f[None, :] - np.asarray(levels, dtype=float)[:, None]
    row, hit = np.nonzero(s[:, :-1] * s[:, 1:] < 0)
    found = m[np.nonzero(s == 0)[1]].tolist()
    if row.size:
        roots = refine_levels(
            cdf, m[hit], m[hit + 1], f[hit], f[hit + 1], np.asarray(levels)[row]
        )
        found.extend(roots.tolist())
    return np.asarray(found, dtype=float)


def _segment_bounds(cdf, interior_breaks, lo, hi):
    """Panel boundaries inside [lo, hi] aligned with non-smooth points.

    Cuts at nodes, stencil switches, weight-breakpoint crossings and the
    interior extrema of the interpolant; the CDF is a single polynomial
    and strictly monotone between consecutive bounds.
    """
    pieces = [lo, hi]
    nodes = cdf.interpolant.nodes
    pieces.extend(nodes[(nodes > lo) & (nodes < hi)])
    breaks = cdf.interpolant.stencil_breaks
    if breaks.size:
        pieces.extend(breaks[(breaks > lo) & (breaks < hi)])
    ext = cdf.interpolant.extrema()
    if ext.size:
        pieces.extend(ext[(ext > lo) & (ext < hi)])
    interior_breaks = np.asarray(interior_breaks, dtype=float)
    if interior_breaks.size:
        pieces.extend(_crossings(cdf, interior_breaks, lo, hi))
    bounds = np.unique(np.asarray(pieces, dtype=float))
    return bounds[(bounds >= lo) & (bounds <= hi)]


def _split_segments_at_levels(cdf, a, b, windows, fa, fb, levels):
    """Split record segments where their own window crosses a breakpoint.

    Mesh-based crossing detection reads the interpolant through its
    natural per-point windows.  A segment bounded by a stencil switch is
    integrated through its one-sided window, whose reading can pass a
    weight breakpoint that the natural reading never reaches before the
    switch.  Panels assume one weight piece per segment, so such hidden
    crossings must become segment boundaries; the crossing is refined
    through the segment's own window (the brackets stay inside one
    stencil region, where the refinement evaluates that window's
    polynomial).
    """
    if a.size == 0 or levels.size == 0:
        return a, b, windows
    straddle = (fa[:, None] < levels[None, :]) & (levels[None, :] < fb[:, None])
    if not straddle.any():
        return a, b, windows
    rows, cols = np.nonzero(straddle)
    roots = refine_levels(cdf, a[rows], b[rows], fa[rows], fb[rows], levels[cols])
    splits = {}
    for r, root in zip(rows, roots):
        splits.setdefault(int(r), []).append(float(root))
    na, nb, nw = [], [], []
    for j in range(a.size):
        if j in splits:
            pts = [a[j]] + sorted(splits[j]) + [b[j]]
            for u, v in zip(pts[:-1], pts[1:]):
                na.append(u)
                nb.append(v)
                nw.append(windows[j])
        else:
            na.append(a[j])
            nb.append(b[j])
            nw.append(windows[j])
    return (
        np.asarray(na, dtype=float),
        np.asarray(nb, dtype=float),
        np.asarray(nw, dtype=windows.dtype),
    )


def _record_segments(cdf, bounds, utau, btau, levels=None):
    """Record-setting sub-segments and jump terms of the running maximum.

    The weighted quantile integral follows the first-crossing inverse:
    level tau maps to the first y with F(y) >= tau, which depends only on
    the running maximum of F.  A fitted CDF need not be monotone, and
    wherever it sits below an earlier high it cannot set records, so such
    stretches contribute nothing.  Bounds include every interior extremum,
    so F is monotone between consecutive bounds and one pass suffices;
    segments that climb back through the running maximum are entered at
    the refined re-crossing point.

    Returns (a, b, windows, jumps).  Segment endpoint values come from the
    window active on the open segment: the interpolant can jump at a
    stencil switch, and when the running maximum rises discontinuously
    from f_lo to f_hi at some y, every level in between first crosses
    exactly there.  Such point masses are returned as (y, f_lo, f_hi)
    jump rows; a final row assigns mass the node range never reached to
    the upper end of the integration range.

    The walk also confines the CDF to the per-cell box of node values:
    the accumulated values are nondecreasing in the node (indicator sums
    with nonnegative kernel weights), so between two nodes any monotone
    reading lies in [v_k, v_{k+1}], while a polynomial through close or
    widely spaced noisy nodes can overshoot by large amounts.  Records
    are capped at the right-node value, with the cap crossing refined,
    which bounds the damage of an overshoot by one node gap instead of
    letting a spike claim quantile levels far above its cell.
    """
    interp = cdf.interpolant
    if bounds.size < 2:
        y_end = float(bounds[-1]) if bounds.size else math.nan
        jumps = np.array([[y_end, utau, btau]])
        return np.empty(0), np.empty(0), np.empty(0, np.intp), jumps
    windows = interp.segment_windows(bounds[:-1], bounds[1:])
    fa, _ = interp.window_eval(windows, bounds[:-1])
    fb, _ = interp.window_eval(windows, bounds[1:])
    fa = np.clip(fa, 0.0, 1.0)
    fb = np.clip(fb, 0.0, 1.0)
    nodes = interp.nodes
    vmax = np.maximum.accumulate(np.clip(interp.values, 0.0, 1.0))
    cell = np.clip(
        np.searchsorted(nodes, 0.5 * (bounds[:-1] + bounds[1:]), side="right") - 1,
        0,
        nodes.size - 2,
    )
    caps = vmax[cell + 1]
    fac = np.minimum(fa, caps)
    fbc = np.minimum(fb, caps)
    # Running maximum before each segment; the high after segment j is
    # max(high before, fac_j, fbc_j) whether or not the segment records.
    high = np.maximum.accumulate(np.maximum(fac, fbc))
    prev = np.empty_like(high)
    prev[0] = utau
    np.maximum(high[:-1], utau, out=prev[1:])
    level = np.maximum(prev, fac)
    rec = fbc > level
    a = bounds[:-1][rec].copy()
    b = bounds[1:][rec].copy()
    w = windows[rec]
    fa_r, fb_r = fa[rec], fb[rec]
    need_a = fa_r < level[rec]
    need_b = fb_r > caps[rec]
    if need_a.any() or need_b.any():
        # Refine entry points up through the running maximum and exit
        # points through the cell cap in one batched call.
        lo = np.concatenate((a[need_a], a[need_b]))
        hi = np.concatenate((b[need_a], b[need_b]))
        flo = np.concatenate((fa_r[need_a], fa_r[need_b]))
        fhi = np.concatenate((fb_r[need_a], fb_r[need_b]))
        tg = np.concatenate((level[rec][need_a], caps[rec][need_b]))
        roots = refine_levels(cdf, lo, hi, flo, fhi, tg)
        na = int(np.count_nonzero(need_a))
        a[need_a] = roots[:na]
        b[need_b] = roots[na:]
    # Panels integrate the readings the interpolant actually produces at
    # the (refined) endpoints, which on steep cells can sit a little off
    # the nominal target level: the value cannot be pinned more tightly
    # than slope * ulp(y).  Jump rows therefore chain on those actual
    # readings, not on the nominal levels, so the covered level ranges
    # telescope exactly and no stripe is counted twice or dropped.  A
    # signed chaining jump sits at the same y as the panel boundary it
    # corrects, so the correction displaces no mass.
    fa_act, fb_act = fa_r.copy(), fb_r.copy()
    if need_a.any():
        va, _ = interp.window_eval(w[need_a], a[need_a])
        fa_act[need_a] = np.clip(va, 0.0, 1.0)
    if need_b.any():
        vb, _ = interp.window_eval(w[need_b], b[need_b])
        fb_act[need_b] = np.clip(vb, 0.0, 1.0)
    rows = []
    chain = float(utau)
    ri = 0
    for j in range(rec.size):
        if rec[j]:
            ea = float(fa_act[ri])
            eb = float(fb_act[ri])
            if ea != chain:
                rows.append((float(a[ri]), chain, ea))
            chain = eb
            ri += 1
        else:
            fj = float(fac[j])
            if fj > chain:
                rows.append((float(bounds[j]), chain, fj))
                chain = fj
    if chain < btau:
        rows.append((float(bounds[-1]), chain, btau))
    jumps = (
        np.asarray(rows, dtype=float) if rows else np.empty((0, 3), dtype=float)
    )
    if levels is not None and levels.size:
        a, b, w = _split_segments_at_levels(cdf, a, b, w, fa_act, fb_act, levels)
    return a, b, w, jumps


def _panel_points(cdf, a, b, windows):
    """CDF values and densities on the Simpson points of each segment.

    Each segment is evaluated with its own stencil window so that panels
    touching a stencil switch use the one-sided limit, consistent with
    the record walk.
    """
    keep = (b - a) > 0
    a, b, windows = a[keep], b[keep], windows[keep]
    if a.size == 0:
        return None
    pts = a[:, None] + (b - a)[:, None] * _PANEL_OFFSETS
    F, dens = cdf.interpolant.window_eval(windows[:, None], pts)
    return pts, np.clip(F, 0.0, 1.0), dens, (b - a) / 8.0


def _apply_weight(J, panels, jumps):
    terms = []
    if panels is not None:
        pts, F, dens, scale = panels
        # One weight piece per panel, chosen by the CDF value at the panel
        # midpoint; crossings were made panel boundaries above, so the
        # piece is constant inside each panel.
        piece = J.piece_index(F[:, 4])
        Jv = J.piece_eval(piece[:, None], F)
        g = pts * Jv * dens
        terms.extend(((g @ _PANEL_WEIGHTS) * scale).tolist())
    if jumps.size:
        mass = J.cumulative(jumps[:, 2]) - J.cumulative(jumps[:, 1])
        terms.extend((jumps[:, 0] * mass).tolist())
    return math.fsum(terms)


def _support_groups(weight_map):
    """Weight names grouped by support so panels can be shared."""
    groups = {}
    for name, J in weight_map.items():
        key = (float(J.support[0]), float(J.support[1]))
        groups.setdefault(key, []).append(name)
    return groups


def _integrals_at(cdf, weight_map, groups=None):
    """All weighted quantile integrals of one CDF, sharing panel work."""
    if groups is None:
        groups = _support_groups(weight_map)
    out = {}
    for (utau, btau), names in groups.items():
        lo, hi = support_preimage(cdf, utau, btau)
        # All breakpoints, the trim bounds included: a locally
        # non-monotone CDF can re-cross them strictly inside (lo, hi).
        levels = np.unique(np.concatenate(
            [weight_map[n].breakpoints for n in names]
        )) if names else np.empty(0)
        bounds = _segment_bounds(cdf, levels, lo, hi)
        a, b, windows, jumps = _record_segments(cdf, bounds, utau, btau, levels)
        panels = _panel_points(cdf, a, b, windows)
        for n in names:
            out[n] = _apply_weight(weight_map[n], panels, jumps)
    return out


def wcqr_integral(cdf, J):
    """The weighted quantile integral of one CDF against a weight J."""
    return _integrals_at(cdf, {"J": J})["J"]


# ---------------------------------------------------------------------
# Curves over the covariate grid.


def component_curves(state, weight_map, skip_errors=True):
    """Quantile-integral curves for several weights sharing CDF builds.

    Returns {name: CurveEstimate}.  With ``skip_errors`` a failing grid
    point is recorded on every produced curve and excluded from all of
    them, keeping the curves aligned; otherwise the error is re-raised
    wrapped in CurvePointError with the offending grid index.
    """
    if state.N <= 0:
        raise DataError("state holds no data")
    names = list(weight_map)
    grid = state.grid
    groups = _support_groups(weight_map)
    kept = []
    skipped = []
    values = {name: [] for name in names}
    for i in range(grid.size):
        try:
            cdf = build_cdf(state, i)
            point = _integrals_at(cdf, weight_map, groups)
        except (DensityTooSmall, LevelSetEmpty) as err:
            if not skip_errors:
                raise CurvePointError(i, err) from err
            skipped.append((i, str(err)))
            continue
        kept.append(i)
        for n in names:
            values[n].append(point[n])
    if not kept:
        raise CurvePointError(-1, "estimation failed at every grid point")
    kept = np.asarray(kept, dtype=np.intp)
    out = {}
    for n in names:
        out[n] = _curve_from_values(
            state, grid[kept], np.asarray(values[n]), n, list(skipped)
        )
    return out


def _curve_from_values(state, grid, values, kind, skipped):
    degree = min(state.config.degree, grid.size - 1)
    interp = Interpolant(grid, values, degree)
    return CurveEstimate(grid, values, interp, kind, skipped)


def curve_estimate(state, J, kind="curve", skip_errors=True):
    """Quantile-integral curve of one weight over the whole grid."""
    curves = component_curves(state, {kind: J}, skip_errors=skip_errors)
    return curves[kind]


def interpolated_density(state):
    """Interpolant of the accumulated covariate density over the grid."""
    if state.N <= 0:
        raise DataError("state holds no data")
    return _curve_from_values(state, state.grid, state.fX.copy(), "density", [])


# ---------------------------------------------------------------------
# Scalar weights from moment matching.


def _refined_mesh(grid, factor):
    steps = np.arange(factor) / factor
    cells = grid[:-1, None] + np.diff(grid)[:, None] * steps
    return np.append(cells.ravel(), grid[-1])


def _moment_of(state, curve, power=1):
    """Simpson integral of W(x) * curve(x)^power * f_X(x) over the grid."""
    density = interpolated_density(state)
    mesh = _refined_mesh(state.grid, state.config.refine_factor)
    wx = state.config.weight_fn(mesh)
    gx = curve(mesh) ** power
    return float(simpson(wx * gx * density(mesh), x=mesh))


def _mean_components(state):
    alpha = state.config.alpha
    curves = component_curves(
        state,
        {
            "component_lower": trimmed_component(alpha, "lower"),
            "component_upper": trimmed_component(alpha, "upper"),
        },
    )
    cl = curves["component_lower"]
    cu = curves["component_upper"]
    e_wl = _moment_of(state, cl)
    e_wu = _moment_of(state, cu)
    sep = e_wl - e_wu
    if abs(sep) < state.config.separation_floor:
        raise DegenerateSeparation(
            "lower/upper component moments differ by %.3g only" % sep
        )
    w_hat = (state.E_WY - e_wu) / sep
    params = ScalarWeightParams(
        w_hat=w_hat, E_WY=state.E_WY, E_WL=e_wl, E_WU=e_wu
    )
    return params, cl, cu


def estimate_w(state):
    """Bias-correcting location weight from first-moment matching.

    Solves E[W r(X; J_w)] = E[W Y] for w using the lower/upper component
    curves; w = 0.5 recovers the symmetric trimmed mean.
    """
    return _mean_components(state)[0]


def estimate_theta(state, mean_curve, sd_component=None):
    """Scale factor from second-moment matching.

    theta^2 = (E[W Y^2] - E[W m^2]) / E[W r(.; J_sigma)^2] with m the
    supplied mean curve.
    """
    if sd_component is None:
        sd_component = curve_estimate(
            state, sd_weight(state.config.alpha, 1.0), kind="sd_component"
        )
    e_wm2 = _moment_of(state, mean_curve, power=2)
    e_wr2 = _moment_of(state, sd_component, power=2)
    num = state.E_WY2 - e_wm2
    if num < 0:
        raise NegativeVariance(
            "E[W Y^2] - E[W m^2] = %.3g is negative" % num
        )
    if e_wr2 < state.config.separation_floor:
        raise ZeroDenominator("E[W r^2] = %.3g is too small" % e_wr2)
    theta = math.sqrt(num / e_wr2)
    return ScalarWeightParams(
        theta_hat=theta, E_WY2=state.E_WY2, E_Wm2=e_wm2, E_Wr2=e_wr2
    )


# ---------------------------------------------------------------------
# Public estimators.


def estimate_mean(state, mode="ntm"):
    """Conditional location curve.

    mode "ntm" is the symmetric trimmed mean (w = 0.5); mode "bctm"
    estimates the weight w from moment matching and combines the lower
    and upper component curves with it.
    """
    if mode == "ntm":
        J = mean_weight(state.config.alpha, 0.5)
        return curve_estimate(state, J, kind="mean_ntm")
    if mode == "bctm":
        params, cl, cu = _mean_components(state)
        w = params.w_hat
        values = w * cl.values + (1.0 - w) * cu.values
        curve = _curve_from_values(state, cl.grid, values, "mean_bctm", cl.skipped)
        curve.params = params
        return curve
    raise DataError("unknown mean mode %r" % (mode,))


def estimate_sd(state, mode="rtsd", mean_mode=None):
    """Conditional standard deviation curve.

    mode "ntsd" returns the unrescaled trimmed-difference curve, whose
    target is proportional to sigma(x); mode "rtsd" rescales it by the
    moment-matched theta so the target is sigma(x) itself.
    """
    J1 = sd_weight(state.config.alpha, 1.0)
    base = curve_estimate(state, J1, kind="sd_ntsd")
    if mode == "ntsd":
        return base
    if mode != "rtsd":
        raise DataError("unknown sd mode %r" % (mode,))
    if mean_mode is None:
        mean_mode = "ntm" if state.config.symmetric_model else "bctm"
    mean_curve = estimate_mean(state, mean_mode)
    params = estimate_theta(state, mean_curve, sd_component=base)
    values = params.theta_hat * base.values
    curve = _curve_from_values(state, base.grid, values, "sd_rtsd", base.skipped)
    curve.params = params
    return curve


def estimate_bundle(state, want=("ntm", "bctm", "ntsd", "rtsd")):
    """Several estimators sharing one pass of CDF builds and integrals.

    Returns {name: CurveEstimate}; used by the benchmark loops where the
    same state feeds every estimator.
    """
    want = set(want)
    alpha = state.config.alpha
    weight_map = {}
    if "ntm" in want:
        weight_map["mean_ntm"] = mean_weight(alpha, 0.5)
    if want & {"bctm"}:
        weight_map["component_lower"] = trimmed_component(alpha, "lower")
        weight_map["component_upper"] = trimmed_component(alpha, "upper")
    if want & {"ntsd", "rtsd"}:
        weight_map["sd_ntsd"] = sd_weight(alpha, 1.0)
    if "rtsd" in want and not state.config.symmetric_model:
        weight_map.setdefault("component_lower", trimmed_component(alpha, "lower"))
        weight_map.setdefault("component_upper", trimmed_component(alpha, "upper"))
    if "rtsd" in want and state.config.symmetric_model:
        weight_map.setdefault("mean_ntm", mean_weight(alpha, 0.5))
    curves = component_curves(state, weight_map)

    out = {}
    if "ntm" in want:
        out["ntm"] = curves["mean_ntm"]
    bctm = None
    if want & {"bctm"} or ("rtsd" in want and not state.config.symmetric_model):
        cl = curves["component_lower"]
        cu = curves["component_upper"]
        e_wl = _moment_of(state, cl)
        e_wu = _moment_of(state, cu)
        sep = e_wl - e_wu
        if abs(sep) < state.config.separation_floor:
            raise DegenerateSeparation(
                "lower/upper component moments differ by %.3g only" % sep
            )
        w_hat = (state.E_WY - e_wu) / sep
        params = ScalarWeightParams(
            w_hat=w_hat, E_WY=state.E_WY, E_WL=e_wl, E_WU=e_wu
        )
        values = w_hat * cl.values + (1.0 - w_hat) * cu.values
        bctm = _curve_from_values(state, cl.grid, values, "mean_bctm", cl.skipped)
        bctm.params = params
        if "bctm" in want:
            out["bctm"] = bctm
    if "ntsd" in want:
        out["ntsd"] = curves["sd_ntsd"]
    if "rtsd" in want:
        base = curves["sd_ntsd"]
        mean_curve = curves["mean_ntm"] if state.config.symmetric_model else bctm
        params = estimate_theta(state, mean_curve, sd_component=base)
        values = params.theta_hat * base.values
        rtsd = _curve_from_values(state, base.grid, values, "sd_rtsd", base.skipped)
        rtsd.params = params
        out["rtsd"] = rtsd
    return out
