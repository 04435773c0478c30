"""Bandwidth schedules for the streaming estimator.

Three regimes are supported: the terminal-optimal constant bandwidth
C^(1/5) N^(-1/5) (needs the final sample size), the renewable recursion
h_t = C^(1/3) S_t^(-1/3) with S_t = S_{t-1} + n_t h_{t-1}^2 (needs only
the running accumulator), and the per-chunk fixed point h_t solving
h_t^3 (sum_{s<t} n_s h_s^2 + n_t h_t^2) = C.  The constant C is either
supplied, estimated by cross validation, or derived from the asymptotic
bias and variance of the curve estimator at a covariate point.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .config import Config
from .errors import ConfigError, DataError
from .kernels import kernel_moments


@dataclass
class BandwidthState:
    """Running state of the bandwidth recursion.

    S_h accumulates sum n_s * h_{s-1}^2; ``last_h`` is the bandwidth used
    for the previous chunk and ``t`` counts chunks seen.
    """

    C_h: float
    mode: str = "renewable"
    oracle_total: int = 0
    S_h: float = 0.0
    last_h: float = 0.0
    t: int = 0

    def __post_init__(self):
        if self.C_h <= 0 or not math.isfinite(self.C_h):
            raise ConfigError("C_h must be positive and finite")
        if self.mode not in ("renewable", "oracle"):
            raise ConfigError("mode must be 'renewable' or 'oracle'")
        if self.mode == "oracle" and self.oracle_total <= 0:
            raise ConfigError("oracle mode needs the total sample size")


def oracle_bandwidth(C_h, n_total):
    """Terminal-optimal constant bandwidth C^(1/5) N^(-1/5)."""
    if C_h <= 0 or n_total <= 0:
        raise ConfigError("C_h and n_total must be positive")
    return C_h ** 0.2 * float(n_total) ** -0.2

def next_bandwidth(bw, n_t):
    """Bandwidth for the next chunk of size n_t; updates the state.

    Returns (h_t, bw).  The first chunk uses the single-batch rule
    C^(1/5) n_1^(-1/5); later chunks use the recursion on S_h.
    """
    n_t = int(n_t)
    if n_t < 1:
        raise DataError("chunk size must be at least 1")
    if bw.mode == "oracle":
        h = oracle_bandwidth(bw.C_h, bw.oracle_total)
    elif bw.t == 0:
        h = bw.C_h ** 0.2 * float(n_t) ** -0.2
    else:
        bw.S_h = bw.S_h + n_t * bw.last_h ** 2
        h = bw.C_h ** (1.0 / 3.0) * bw.S_h ** (-1.0 / 3.0)
    bw.last_h = h
    bw.t += 1
    return h, bw


def error_function(bandwidths, sizes, consts):
    """Accumulated squared bias plus variance of the streaming estimator.

    (B * sum n_s h_s^2 / N)^2 + (1/N) * sum (n_s / (N h_s)) * Sigma
    for per-chunk bandwidths h_s and sizes n_s.
    """
    h = np.asarray(bandwidths, dtype=float)
    n = np.asarray(sizes, dtype=float)
    if h.shape != n.shape or h.ndim != 1 or h.size == 0:
        raise ConfigError("bandwidths and sizes must be matching 1-D arrays")
    if np.any(h <= 0) or np.any(n <= 0):
        raise ConfigError("bandwidths and sizes must be positive")
    total = n.sum()
    bias = consts.B_mx * float(np.sum(n * h * h)) / total
    var = float(np.sum(n / h)) / total ** 2 * consts.Sigma_mx
    return bias * bias + var


def error_increment(h_t, n_t, prev_h, prev_n, consts):
    """Per-chunk error term E_t of the recursive decomposition.

    E_t = h_t^4 B^2 + Sigma / (n_t h_t)
          + 2 h_t^2 * sum_{s<t} (n_s h_s^2 / n_t) * B^2.
    """
    prev_h = np.asarray(prev_h, dtype=float)
    prev_n = np.asarray(prev_n, dtype=float)
    b2 = consts.B_mx ** 2
    cross = 2.0 * h_t ** 2 * float(np.sum(prev_n * prev_h ** 2)) / n_t * b2
    return h_t ** 4 * b2 + consts.Sigma_mx / (n_t * h_t) + cross


def fixed_point_bandwidths(C_h, sizes):
    """Per-chunk bandwidths solving h^3 (S_prev + n h^2) = C sequentially."""
    if C_h <= 0:
        raise ConfigError("C_h must be positive")
    out = []
    S = 0.0
    for n in sizes:
        n = float(n)
        f = lambda h: h ** 3 * (S + n * h * h) - C_h
        hi = max(1.0, (C_h / max(S, 1e-300)) ** (1.0 / 3.0) if S else 0.0)
        hi = max(hi, (C_h / n) ** 0.2)
        while f(hi) < 0:
            hi *= 2.0
        h = brentq(f, 1e-300, hi, xtol=1e-15, rtol=1e-14)
        out.append(h)
        S += n * h * h
    return np.asarray(out)


# ---------------------------------------------------------------------
# Cross validation for the bandwidth constant.


def default_candidates():
    """Thirteen log-spaced candidates spanning [1e-2, 1e2]."""
    return np.logspace(-2.0, 2.0, 13)


def estimate_Ch(validation, config, grid_size=100, tau_count=99, folds=10,
                candidates=None, scorer="wcqr"):
    """Cross-validated bandwidth constant on a validation sample.

    Splits the validation chunk into contiguous folds; for each candidate
    C the training folds are processed as one batch with bandwidth
    C^(1/5) n^(-1/5) and the squared prediction error of the resulting
    location curve is scored on the held-out fold.  Ties prefer the
    smaller candidate.  ``scorer`` selects the symmetric trimmed-mean
    curve ("wcqr") or a kernel-ratio benchmark ("nw").
    """
    from .estimators import curve_estimate
    from .pilot import build_grids
    from .state import Chunk, init_state, update_chunk
    from .weights import mean_weight

    n = len(validation)
    folds = int(folds)
    if folds < 2:
        raise ConfigError("need at least two folds")
    if n < folds * 10:
        raise ConfigError("validation sample too small for %d folds" % folds)
    if candidates is None:
        candidates = default_candidates()
    candidates = np.sort(np.asarray(candidates, dtype=float))
    if np.any(candidates <= 0):
        raise ConfigError("candidates must be positive")

    lo, hi = config.interval
    idx = np.array_split(np.arange(n), folds)
    parts = []
    for test_idx in idx:
        mask = np.ones(n, dtype=bool)
        mask[test_idx] = False
        train = Chunk(validation.x[mask], validation.y[mask])
        test = Chunk(validation.x[test_idx], validation.y[test_idx])
        if scorer == "wcqr":
            grid, nodes = build_grids(
                train.x, train.y, config.interval,
                grid_size=grid_size, tau_count=tau_count,
            )
            parts.append((train, test, grid, nodes))
        else:
            parts.append((train, test, None, None))

    kernel = config.kernel_fn
    scores = np.full(candidates.size, np.inf)
    for ci, C in enumerate(candidates):
        fold_scores = []
        for train, test, grid, nodes in parts:
            h = C ** 0.2 * float(len(train)) ** -0.2
            inside = (test.x >= lo) & (test.x <= hi)
            if not inside.any():
                continue
            try:
                if scorer == "wcqr":
                    st = init_state(grid, nodes, config)
                    update_chunk(st, train, h)
                    curve = curve_estimate(
                        st, mean_weight(config.alpha, 0.5), kind="cv"
                    )
                    pred = curve(test.x[inside])
                else:
                    wk = kernel((test.x[inside, None] - train.x[None, :]) / h)
                    mass = wk.sum(axis=1)
                    if np.any(mass <= 0):
                        fold_scores.append(np.inf)
                        continue
                    pred = wk @ train.y / mass
            except Exception:
                fold_scores.append(np.inf)
                continue
            resid = test.y[inside] - pred
            fold_scores.append(float(np.mean(resid * resid)))
        if fold_scores:
            scores[ci] = float(np.mean(fold_scores))
    if not np.any(np.isfinite(scores)):
        raise DataError("cross validation failed for every candidate")
    return float(candidates[int(np.argmin(scores))])


# ---------------------------------------------------------------------
# Asymptotic constants at a covariate point for a known model.


@dataclass
class ModelOracle:
    """Analytic model pieces needed by the asymptotic constants.

    All callables take scalars or arrays.  ``eps_dpdf`` (derivative of
    the error density) may be None, in which case a central difference
    of ``eps_pdf`` is used.
    """

    m: callable
    dm: callable
    d2m: callable
    sigma: callable
    dsigma: callable
    d2sigma: callable
    f_X: callable
    df_X: callable
    eps_pdf: callable
    eps_cdf: callable
    eps_quantile: callable
    eps_dpdf: callable = None

    def dpdf(self, z):
        if self.eps_dpdf is not None:
            return self.eps_dpdf(z)
        step = 1e-5
        return (self.eps_pdf(z + step) - self.eps_pdf(z - step)) / (2 * step)


@dataclass
class AsymptoticConstants:
    """Pointwise bias and variance factors and the constant they imply."""

    B_mx: float
    Sigma_mx: float
    C_h: float


def asymptotic_constants(model, J, x, kernel, utau=None, btau=None):
    """Leading bias/variance constants of the curve estimator at x.

    B is minus the weight-averaged CDF bias factor; Sigma is
    k02 sigma^2 / f_X times the double integral of the quantile
    covariance against J; C_h = Sigma / (4 B^2).
    """
    from .optimal_weights import variance_functional, ErrorLaw

    if utau is None:
        utau = J.support[0]
    if btau is None:
        btau = J.support[1]
    mom = kernel_moments(kernel)
    mx = float(model.m(x))
    dmx = float(model.dm(x))
    d2mx = float(model.d2m(x))
    sx = float(model.sigma(x))
    dsx = float(model.dsigma(x))
    d2sx = float(model.d2sigma(x))
    fx = float(model.f_X(x))
    dfx = float(model.df_X(x))
    if fx <= 0:
        raise DataError("model density vanishes at x")

    def bias_integrand(z):
        fz = model.eps_pdf(z)
        dfz = model.dpdf(z)
        dz = -(dmx + z * dsx) / sx
        d2z = -(d2mx + dz * dsx + z * d2sx) / sx + (dmx + z * dsx) * dsx / sx ** 2
        dF = fz * dz
        d2F = dfz * dz * dz + fz * d2z
        bf = 0.5 * mom.k21 * (d2F + 2.0 * dF * dfx / fx)
        # tau = F_eps(z) is where the weight is evaluated.
        return J(model.eps_cdf(z)) * bf * sx

    zl = float(model.eps_quantile(utau))
    zu = float(model.eps_quantile(btau))
    interior = [float(model.eps_quantile(t)) for t in J.breakpoints[1:-1]]
    B = -quad(bias_integrand, zl, zu, points=interior or None,
              limit=200, epsabs=1e-10)[0]

    law = ErrorLaw(
        name="model",
        pdf=model.eps_pdf,
        quantile=model.eps_quantile,
        dlogpdf=lambda y: 0.0,
        d2logpdf=lambda y: 0.0,
        symmetric=False,
    )
    V = variance_functional(J, law, utau, btau)
    Sigma = mom.k02 * sx * sx / fx * V
    if B == 0:
        C = math.inf
    else:
        C = Sigma / (4.0 * B * B)
    return AsymptoticConstants(B_mx=B, Sigma_mx=Sigma, C_h=C)
