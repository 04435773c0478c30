"""Benchmark estimators, error metrics, and the scenario harness.

The harness streams each replication through the renewable pipeline and
compares it against three references: the oracle (the same estimator fed
the whole dataset as one chunk), the kernel-ratio smoother with its own
cross-validated bandwidth, and the per-chunk simple average.  Accuracy
is summarized by the average squared error over the evaluation grid and
by ratios of such errors between estimator pairs.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .bandwidth import BandwidthState, estimate_Ch, next_bandwidth, oracle_bandwidth
from .config import Config
from .errors import StreamCQRError, ZeroDenominator, ZeroKernelMass
from .estimators import estimate_bundle
from .pilot import build_grids
from .simulate import draw_dataset, get_error_law, get_model, replication_rng
from .state import Chunk, init_state, update_chunk


# ---------------------------------------------------------------------
# Kernel-ratio (locally constant) benchmark.


def nw_curve(x, y, h, at, kernel):
    """Locally constant mean and sd at the points ``at``.

    The mean is the kernel-weighted average; the sd is the square root
    of the kernel-weighted average squared residual about that mean.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    at = np.atleast_1d(np.asarray(at, dtype=float))
    wk = kernel.scaled(at[:, None] - x[None, :], h)
    mass = wk.sum(axis=1)
    if np.any(mass <= 0.0):
        bad = at[mass <= 0.0][0]
        raise ZeroKernelMass("no kernel mass at x = %g with h = %g" % (bad, h))
    mean = wk @ y / mass
    second = wk @ (y * y) / mass
    var = np.maximum(second - mean * mean, 0.0)
    return mean, np.sqrt(var)


def nw_mean(x, y, h, x0, kernel):
    return float(nw_curve(x, y, h, [x0], kernel)[0][0])


def nw_sd(x, y, h, x0, kernel):
    return float(nw_curve(x, y, h, [x0], kernel)[1][0])


# ---------------------------------------------------------------------
# Error metrics.


def ase(values, truth):
    """Mean squared error over the grid; NaN entries are excluded."""
    values = np.asarray(values, dtype=float)
    truth = np.asarray(truth, dtype=float)
    keep = np.isfinite(values)
    if not keep.any():
        return math.nan
    d = values[keep] - truth[keep]
    return float(np.mean(d * d))


def rase(ase_a, ase_b):
    """Ratio of average squared errors ASE(a) / ASE(b)."""
    if ase_b == 0.0:
        raise ZeroDenominator("reference estimator has zero error")
    return float(ase_a) / float(ase_b)


def paired_rase(values_a, values_b, truth):
    """RASE of two curves on the grid points where both are defined."""
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    truth = np.asarray(truth, dtype=float)
    keep = np.isfinite(a) & np.isfinite(b)
    if not keep.any():
        return math.nan
    return rase(ase(np.where(keep, a, np.nan), truth),
                ase(np.where(keep, b, np.nan), truth))


def _full_values(curve, grid_size):
    """Curve values embedded into the master grid, NaN where skipped."""
    out = np.full(grid_size, np.nan)
    skipped = {i for i, _ in curve.skipped}
    kept = [i for i in range(grid_size) if i not in skipped]
    out[kept] = curve.values
    return out


# ---------------------------------------------------------------------
# Simple-average baseline.


def simple_average(x, y, chunk_size, grid, node_sets, config, C_h,
                   want=("ntm",)):
    """Per-chunk estimates averaged across chunks.

    Every chunk gets a fresh state and its own bandwidth C^(1/5)
    n_t^(-1/5).  A chunk failing at any grid point is dropped; when more
    than half the chunks fail the baseline is unavailable and None is
    returned for every requested curve.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    starts = range(0, n, chunk_size)
    total = len(starts)
    sums = {k: np.zeros(grid.shape[0]) for k in want}
    good = 0
    st = init_state(grid, node_sets, config)
    for start in starts:
        sl = slice(start, min(start + chunk_size, n))
        n_t = sl.stop - sl.start
        h = C_h ** 0.2 * float(n_t) ** -0.2
        try:
            st.reset()
            update_chunk(st, Chunk(x[sl], y[sl]), h)
            bundle = estimate_bundle(st, want=want)
        except StreamCQRError:
            continue
        if any(bundle[k].skipped for k in want):
            continue
        good += 1
        for k in want:
            sums[k] += bundle[k].values
    if good * 2 <= total:
        return {k: None for k in want}, total - good
    return {k: sums[k] / good for k in want}, total - good


# ---------------------------------------------------------------------
# Scenario harness.


def scenario_label(config):
    return "m%d-%s-lam%g-c%d" % (
        config.model, config.error, config.lam, config.chunk_size
    )


@dataclass
class ScenarioResult:
    """Per-replication error ratios and their summary rows."""

    config: object
    label: str
    C_h: float
    C_h_nw: float
    rases: dict = field(default_factory=dict)
    ases: dict = field(default_factory=dict)
    failures: int = 0

    def rows(self):
        out = []
        for stat, table in (("rase", self.rases), ("ase", self.ases)):
            for name in sorted(table):
                vals = np.asarray(table[name], dtype=float)
                keep = vals[np.isfinite(vals)]
                out.append({
                    "scenario": self.label,
                    "estimator_pair": name,
                    "statistic": stat,
                    "mean": float(keep.mean()) if keep.size else math.nan,
                    "sd": float(keep.std(ddof=1)) if keep.size > 1 else math.nan,
                    "replications": int(keep.size),
                    "seed": self.config.seed,
                })
        return out

    def mean_rase(self, pair):
        vals = np.asarray(self.rases[pair], dtype=float)
        keep = vals[np.isfinite(vals)]
        return float(keep.mean()) if keep.size else math.nan


def _estimation_config(config, model, law):
    return Config(
        interval=model.interval,
        alpha=config.alpha,
        degree=config.degree,
        symmetric_model=law.symmetric,
    )


def scenario_constants(config):
    """Cross-validated bandwidth constants from replication 0's prefix.

    Computed once per scenario and reused across replications; the CV
    protocol is already the costliest part of a run.
    """
    model = get_model(config.model)
    law = get_error_law(config.error)
    est_config = _estimation_config(config, model, law)
    rng = replication_rng(config.seed, 0)
    x, y = draw_dataset(config, rng)
    val = Chunk(x[: config.validation_size], y[: config.validation_size])
    C_h = config.C_h
    if C_h is None:
        C_h = estimate_Ch(
            val, est_config, grid_size=config.grid_size,
            tau_count=config.tau_count, folds=config.cv_folds,
        )
    C_h_nw = config.C_h_nw
    if C_h_nw is None and config.include_nw:
        C_h_nw = estimate_Ch(
            val, est_config, grid_size=config.grid_size,
            tau_count=config.tau_count, folds=config.cv_folds, scorer="nw",
        )
    return C_h, C_h_nw


def run_scenario(config):
    """All replications of one scenario; returns a ScenarioResult."""
    model = get_model(config.model)
    law = get_error_law(config.error)
    est_config = _estimation_config(config, model, law)
    C_h, C_h_nw = scenario_constants(config)

    gsize = config.grid_size
    want = ("ntm", "bctm", "ntsd", "rtsd")
    pairs = [
        ("oracle_ntm:ntm", "oracle_ntm", "ntm", "m"),
        ("oracle_bctm:bctm", "oracle_bctm", "bctm", "m"),
        ("oracle_rtsd:rtsd", "oracle_rtsd", "rtsd", "sd"),
    ]
    if config.include_average:
        pairs.append(("oracle_ntm:avg_ntm", "oracle_ntm", "avg_ntm", "m"))
    if config.include_nw:
        pairs += [
            ("nw:ntm", "nw", "ntm", "m"),
            ("nw:bctm", "nw", "bctm", "m"),
            ("nwsd:rtsd", "nwsd", "rtsd", "sd"),
        ]
    single = sorted({p[1] for p in pairs} | {p[2] for p in pairs})

    result = ScenarioResult(
        config=config, label=scenario_label(config), C_h=C_h, C_h_nw=C_h_nw,
        rases={p[0]: [] for p in pairs},
        ases={name: [] for name in single},
    )
    # Conditional sd of Y includes the outlier mixture's variance factor.
    sd_factor = math.sqrt(0.95 + 0.05 * config.lam ** 2)

    for rep in range(config.replications):
        rng = replication_rng(config.seed, rep)
        x, y = draw_dataset(config, rng)
        try:
            grid, node_sets = build_grids(
                x[: config.validation_size], y[: config.validation_size],
                model.interval, grid_size=gsize, tau_count=config.tau_count,
            )
            truth = {"m": model.m(grid), "sd": sd_factor * model.sigma(grid)}

            state = init_state(grid, node_sets, est_config)
            bw = BandwidthState(C_h=C_h)
            for start in range(0, config.n_total, config.chunk_size):
                sl = slice(start, min(start + config.chunk_size, config.n_total))
                h, bw = next_bandwidth(bw, sl.stop - sl.start)
                update_chunk(state, Chunk(x[sl], y[sl]), h)
            bundle = estimate_bundle(state, want=want)

            oracle = init_state(grid, node_sets, est_config)
            update_chunk(oracle, Chunk(x, y), oracle_bandwidth(C_h, config.n_total))
            oracle_bundle = estimate_bundle(oracle, want=want)

            curves = {}
            for k in ("ntm", "bctm", "rtsd"):
                curves[k] = _full_values(bundle[k], gsize)
                curves["oracle_" + k] = _full_values(oracle_bundle[k], gsize)
            if config.include_average:
                avg, _ = simple_average(
                    x, y, config.chunk_size, grid, node_sets, est_config, C_h
                )
                curves["avg_ntm"] = (
                    avg["ntm"] if avg["ntm"] is not None
                    else np.full(gsize, np.nan)
                )
            if config.include_nw:
                h_nw = oracle_bandwidth(C_h_nw, config.n_total)
                curves["nw"], curves["nwsd"] = nw_curve(
                    x, y, h_nw, grid, est_config.kernel_fn
                )
        except StreamCQRError:
            result.failures += 1
            for p in result.rases:
                result.rases[p].append(math.nan)
            for name in result.ases:
                result.ases[name].append(math.nan)
            continue

        for name in single:
            kind = "sd" if name in ("rtsd", "oracle_rtsd", "nwsd") else "m"
            result.ases[name].append(ase(curves[name], truth[kind]))
        for pair, a, b, kind in pairs:
            result.rases[pair].append(
                paired_rase(curves[a], curves[b], truth[kind])
            )

    for table in (result.rases, result.ases):
        for name in table:
            table[name] = np.asarray(table[name], dtype=float)
    return result


def write_report(path, results):
    """Write summary rows of one or more scenarios as CSV."""
    if isinstance(results, ScenarioResult):
        results = [results]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "scenario", "estimator_pair", "statistic",
            "mean", "sd", "replications", "seed",
        ])
        writer.writeheader()
        for res in results:
            for row in res.rows():
                row = dict(row)
                row["mean"] = "%.10g" % row["mean"]
                row["sd"] = "%.10g" % row["sd"]
                writer.writerow(row)
