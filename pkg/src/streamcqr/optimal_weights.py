"""Minimum-variance weight functions for a known error law.

The asymptotic variance of the weighted quantile integral is, up to
model factors, the double integral over the trimmed square of

    S_J(t1, t2) = (min(t1, t2) - t1 t2) J(t1) J(t2)
                  / (f(Q(t1)) f(Q(t2))),

with f the error density and Q its quantile function.  Among weights
satisfying the location (or scale) moment constraints this is minimized
by a combination of two score functions derived from the log density;
the coefficients come from a 2x2 moment system.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy import stats

from .errors import ConfigError, DataError, SingularMomentSystem
from .weights import WeightFunction


@dataclass
class ErrorLaw:
    """Analytic callbacks of a standardized error law.

    pdf and quantile describe the law; dlogpdf and d2logpdf are the first
    and second derivatives of log f, used by the score functions.
    """

    name: str
    pdf: callable
    quantile: callable
    dlogpdf: callable
    d2logpdf: callable
    symmetric: bool = False


def gaussian_law():
    return ErrorLaw(
        name="gaussian",
        pdf=stats.norm.pdf,
        quantile=stats.norm.ppf,
        dlogpdf=lambda y: -np.asarray(y, dtype=float),
        d2logpdf=lambda y: -np.ones_like(np.asarray(y, dtype=float)),
        symmetric=True,
    )


def logistic_law():
    def dlog(y):
        s = stats.logistic.cdf(y)
        return 1.0 - 2.0 * s

    def d2log(y):
        s = stats.logistic.cdf(y)
        return -2.0 * s * (1.0 - s)

    return ErrorLaw(
        name="logistic",
        pdf=stats.logistic.pdf,
        quantile=stats.logistic.ppf,
        dlogpdf=dlog,
        d2logpdf=d2log,
        symmetric=True,
    )


def uniform_law():
    """Uniform error on [0, 1]; the density is one on the support."""
    return ErrorLaw(
        name="uniform",
        pdf=lambda y: np.where(
            (np.asarray(y, float) >= 0) & (np.asarray(y, float) <= 1), 1.0, 0.0
        ),
        quantile=lambda t: np.asarray(t, dtype=float),
        dlogpdf=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
        d2logpdf=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
        symmetric=False,
    )


def psi_basis(i, tau, law):
    """Score functions Psi_1 = -(log f)'' and Psi_2 = -(y log f(y))''.

    Both are evaluated at the quantile of tau; the second expands by the
    product rule to -(2 (log f)' + y (log f)'').
    """
    tau = np.asarray(tau, dtype=float)
    y = law.quantile(tau)
    if i == 1:
        return -law.d2logpdf(y)
    if i == 2:
        return -(2.0 * law.dlogpdf(y) + y * law.d2logpdf(y))
    raise ConfigError("basis index must be 1 or 2")


@dataclass
class OptimalWeightSolution:
    """Optimal weight, its coefficients, moment matrix, and variance."""

    J_star: WeightFunction
    C1: float
    C2: float
    moments: np.ndarray
    V_star: float
    target: str
    bounds: tuple


# ---------------------------------------------------------------------
# The variance functional.


def _block_mesh(points, total=8192, min_cells=64):
    """Even cell counts per block between consecutive breakpoints."""
    points = np.asarray(points, dtype=float)
    widths = np.diff(points)
    cells = np.maximum(min_cells, (total * widths / widths.sum()).astype(int))
    cells += cells % 2
    mesh = [np.array([points[0]])]
    for k, c in enumerate(cells):
        mesh.append(np.linspace(points[k], points[k + 1], c + 1)[1:])
    return np.concatenate(mesh), cells


def _g_on_mesh(J, law, mesh):
    """J / (f o Q) on the mesh, with one-sided cubic extrapolation when
    the density underflows at an endpoint (quantile levels 0 or 1)."""
    dens = np.asarray(law.pdf(law.quantile(mesh)), dtype=float)
    ok = np.isfinite(dens) & (dens >= 1e-300)
    vals = np.asarray(J(mesh), dtype=float)
    g = np.empty(mesh.size)
    g[ok] = vals[ok] / dens[ok]
    if not ok.all():
        bad = np.flatnonzero(~ok)
        if np.any((bad != 0) & (bad != mesh.size - 1)) or mesh.size < 8:
            raise DataError("error density underflows inside the trimmed range")
        if bad[0] == 0:
            g[0] = 3.0 * g[1] - 3.0 * g[2] + g[3]
        if bad[-1] == mesh.size - 1:
            g[-1] = 3.0 * g[-2] - 3.0 * g[-3] + g[-4]
    return g


def variance_functional(J, law, utau, btau):
    """Double integral of S_J over [utau, btau]^2.

    Uses the covariance factorization min(t1,t2) - t1 t2 =
    int_0^1 (1{u <= t1} - t1)(1{u <= t2} - t2) du, which turns the double
    integral into int_0^1 H(u)^2 du for a one-dimensional H built from
    cumulative integrals of g = J / (f o Q).  Mesh cells are aligned with
    the weight's breakpoints, so the quadrature error is far below the
    1e-6 relative target.
    """
    utau = float(utau)
    btau = float(btau)
    if not 0.0 <= utau < btau <= 1.0:
        raise ConfigError("need 0 <= utau < btau <= 1")
    inner = J.breakpoints[(J.breakpoints > utau) & (J.breakpoints < btau)]
    points = np.unique(np.concatenate([[utau, btau], inner]))
    mesh, cells = _block_mesh(points)
    g = _g_on_mesh(J, law, mesh)

    # Simpson over double cells [2k, 2k+2]; spacing is uniform per block.
    h2 = mesh[2::2] - mesh[:-2:2]
    s = h2 / 6.0 * (g[:-2:2] + 4.0 * g[1:-1:2] + g[2::2])
    A = np.zeros(mesh.size)
    A[::2][:-1] = s[::-1].cumsum()[::-1]
    # Right-half integral of the per-double-cell quadratic:
    # (h/12) (-g_left + 8 g_mid + 5 g_right) with h the single-cell width.
    h1 = 0.5 * h2
    half = h1 / 12.0 * (-g[:-2:2] + 8.0 * g[1:-1:2] + 5.0 * g[2::2])
    A[1::2] = A[2::2] + half

    tb = mesh * g
    B = float(np.sum(h2 / 6.0 * (tb[:-2:2] + 4.0 * tb[1:-1:2] + tb[2::2])))

    H2 = (A - B) ** 2
    mid = float(np.sum(h2 / 6.0 * (H2[:-2:2] + 4.0 * H2[1:-1:2] + H2[2::2])))
    left = utau * (A[0] - B) ** 2
    right = (1.0 - btau) * B * B
    return left + mid + right


def variance_gradient(J, law, utau, btau, taus):
    """Gradient of the variance functional at J, evaluated on taus.

    d/dJ(tau) V[J] = 2 * int (min - prod) J(t) / (f(Q(tau)) f(Q(t))) dt.
    At the optimum this is a combination of 1 and Q on the trimmed range.
    """
    taus = np.asarray(taus, dtype=float)
    inner = J.breakpoints[(J.breakpoints > utau) & (J.breakpoints < btau)]
    points = np.unique(np.concatenate([[utau, btau], inner]))
    mesh, _ = _block_mesh(points, total=4096)
    g = _g_on_mesh(J, law, mesh)
    h2 = mesh[2::2] - mesh[:-2:2]

    out = np.empty(taus.size)
    for i, t in enumerate(taus):
        cov = np.minimum(t, mesh) - t * mesh
        itg = cov * g
        out[i] = float(
            np.sum(h2 / 6.0 * (itg[:-2:2] + 4.0 * itg[1:-1:2] + itg[2::2]))
        )
    return 2.0 * out / np.asarray(law.pdf(law.quantile(taus)), dtype=float)


# ---------------------------------------------------------------------
# The optimal weight.


def _moment_matrix(law, utau, btau):
    A = np.empty((2, 2))
    for k in (0, 1):
        for j in (1, 2):
            def f(t, k=k, j=j):
                q = float(law.quantile(t))
                return q ** k * float(psi_basis(j, t, law))

            A[k, j - 1] = quad(f, utau, btau, epsabs=1e-12, limit=300)[0]
    return A


def optimal_weight(target, law, utau, btau, degree=3, samples=400):
    """Variance-minimizing weight for the location or scale estimator.

    ``target`` is "mean" or "sd".  The solution C1 Psi_1 + C2 Psi_2 is
    sampled on a uniform grid over [utau, btau] and stored as a piecewise
    polynomial of the given degree.
    """
    if target not in ("mean", "sd"):
        raise ConfigError("target must be 'mean' or 'sd'")
    A = _moment_matrix(law, utau, btau)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if abs(det) <= 1e-10:
        raise SingularMomentSystem(
            "moment determinant %.3g is numerically singular" % det
        )
    if target == "mean":
        C1 = A[1, 1] / det
        C2 = -A[1, 0] / det
    else:
        C1 = -A[0, 1] / det
        C2 = A[0, 0] / det

    m = degree + 1
    pieces = samples // m
    n_samp = pieces * m
    step = (btau - utau) / n_samp
    taus = utau + (np.arange(n_samp) + 0.5) * step
    vals = C1 * psi_basis(1, taus, law) + C2 * psi_basis(2, taus, law)

    width = m * step
    s_local = (np.arange(m) + 0.5) / m
    vand = np.vander(s_local, m, increasing=True)
    inv = np.linalg.inv(vand)
    coeff_s = vals.reshape(pieces, m) @ inv.T
    coeff_u = coeff_s / width ** np.arange(m)
    bps = utau + np.arange(pieces + 1) * width
    bps[-1] = btau
    J_star = WeightFunction(bps, coeff_u, support=(utau, btau))
    V_star = variance_functional(J_star, law, utau, btau)
    return OptimalWeightSolution(
        J_star=J_star,
        C1=float(C1),
        C2=float(C2),
        moments=A,
        V_star=float(V_star),
        target=target,
        bounds=(utau, btau),
    )
