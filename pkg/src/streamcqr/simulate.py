"""Synthetic data: two regression models, centered error laws, outliers.

Model 1 (homoscedastic): Y = sin(2X) + 2 exp(-16 X^2) + 0.5 eps, X ~ N(0,1).
Model 2 (heteroscedastic): Y = X sin(2 pi X) + (2 + cos(2 pi X)) eps,
X ~ U(0,1).

Error laws are centered to mean zero; laws with a finite variance are
scaled to unit variance, while Pareto(3) and the F laws are centered
only.  Outliers come from the mixture 0.95 F_eps + 0.05 F_{lambda eps}:
each draw keeps its base value with probability 0.95 and is multiplied
by lambda otherwise.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .errors import ConfigError
from .state import Chunk


@dataclass(frozen=True)
class ErrorSpec:
    """A centered error law: sampler plus a frozen distribution object."""

    name: str
    sample: callable
    dist: object
    symmetric: bool


def _normal():
    return ErrorSpec(
        "normal",
        lambda rng, n: rng.standard_normal(n),
        stats.norm(),
        symmetric=True,
    )


def _laplace():
    s = 1.0 / math.sqrt(2.0)
    return ErrorSpec(
        "laplace",
        lambda rng, n: rng.laplace(0.0, s, n),
        stats.laplace(scale=s),
        symmetric=True,
    )


def _t3():
    s = 1.0 / math.sqrt(3.0)
    return ErrorSpec(
        "t3",
        lambda rng, n: rng.standard_t(3.0, n) * s,
        stats.t(3.0, scale=s),
        symmetric=True,
    )


def _pareto3():
    # rng.pareto draws the Lomax form; +1 gives the classical Pareto with
    # minimum 1 and index 3, whose mean 3/2 is then removed.
    return ErrorSpec(
        "pareto3",
        lambda rng, n: rng.pareto(3.0, n) + 1.0 - 1.5,
        stats.pareto(3.0, loc=-1.5),
        symmetric=False,
    )


def _f_10_6():
    return ErrorSpec(
        "f_10_6",
        lambda rng, n: rng.f(10.0, 6.0, n) - 1.5,
        stats.f(10.0, 6.0, loc=-1.5),
        symmetric=False,
    )


def _f_4_6():
    return ErrorSpec(
        "f_4_6",
        lambda rng, n: rng.f(4.0, 6.0, n) - 1.5,
        stats.f(4.0, 6.0, loc=-1.5),
        symmetric=False,
    )


def _lognormal():
    c = math.exp(0.5)
    s = math.sqrt(math.exp(2.0) - math.exp(1.0))
    return ErrorSpec(
        "lognormal",
        lambda rng, n: (rng.lognormal(0.0, 1.0, n) - c) / s,
        stats.lognorm(1.0, loc=-c / s, scale=1.0 / s),
        symmetric=False,
    )


ERROR_LAWS = {
    "normal": _normal,
    "laplace": _laplace,
    "t3": _t3,
    "pareto3": _pareto3,
    "f_10_6": _f_10_6,
    "f_4_6": _f_4_6,
    "lognormal": _lognormal,
}


def get_error_law(name):
    try:
        return ERROR_LAWS[name]()
    except KeyError:
        raise ConfigError(
            "unknown error law %r (choose from %s)"
            % (name, ", ".join(sorted(ERROR_LAWS)))
        ) from None


class ContaminatedLaw:
    """Distribution of the outlier mixture 0.95 F(z) + 0.05 F(z/lam)."""

    def __init__(self, base_dist, lam):
        self.base = base_dist
        self.lam = float(lam)

    def pdf(self, z):
        lam = self.lam
        return 0.95 * self.base.pdf(z) + 0.05 * self.base.pdf(
            np.asarray(z, float) / lam
        ) / lam

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        return 0.95 * self.base.cdf(z) + 0.05 * self.base.cdf(z / self.lam)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        flat = np.atleast_1d(q).ravel()
        lo = float(min(self.base.ppf(1e-12), self.lam * self.base.ppf(1e-12)))
        hi = float(max(self.base.ppf(1 - 1e-12), self.lam * self.base.ppf(1 - 1e-12)))
        out = np.array([brentq(lambda z, t=t: self.cdf(z) - t, lo, hi) for t in flat])
        return out.reshape(q.shape) if q.ndim else float(out[0])


def effective_dist(law, lam):
    """The error distribution actually feeding Y, outliers included."""
    return law.dist if lam == 1.0 else ContaminatedLaw(law.dist, lam)


@dataclass(frozen=True)
class Model:
    """Regression truth: mean, sd, covariate law, and their derivatives."""

    id: int
    m: callable
    dm: callable
    d2m: callable
    sigma: callable
    dsigma: callable
    d2sigma: callable
    f_X: callable
    df_X: callable
    sample_x: callable
    interval: tuple


def _model1():
    def m(x):
        x = np.asarray(x, dtype=float)
        return np.sin(2.0 * x) + 2.0 * np.exp(-16.0 * x * x)

    def dm(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.cos(2.0 * x) - 64.0 * x * np.exp(-16.0 * x * x)

    def d2m(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(-16.0 * x * x)
        return -4.0 * np.sin(2.0 * x) + (2048.0 * x * x - 64.0) * e

    z = np.zeros_like
    return Model(
        id=1,
        m=m,
        dm=dm,
        d2m=d2m,
        sigma=lambda x: np.full_like(np.asarray(x, float), 0.5),
        dsigma=lambda x: z(np.asarray(x, float)),
        d2sigma=lambda x: z(np.asarray(x, float)),
        f_X=stats.norm.pdf,
        df_X=lambda x: -np.asarray(x, float) * stats.norm.pdf(x),
        sample_x=lambda rng, n: rng.standard_normal(n),
        interval=(-1.5, 1.5),
    )


def _model2():
    tp = 2.0 * math.pi

    def m(x):
        x = np.asarray(x, dtype=float)
        return x * np.sin(tp * x)

    def dm(x):
        x = np.asarray(x, dtype=float)
        return np.sin(tp * x) + tp * x * np.cos(tp * x)

    def d2m(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * tp * np.cos(tp * x) - tp * tp * x * np.sin(tp * x)

    def ones(x):
        return np.ones_like(np.asarray(x, float))

    return Model(
        id=2,
        m=m,
        dm=dm,
        d2m=d2m,
        sigma=lambda x: 2.0 + np.cos(tp * np.asarray(x, float)),
        dsigma=lambda x: -tp * np.sin(tp * np.asarray(x, float)),
        d2sigma=lambda x: -tp * tp * np.cos(tp * np.asarray(x, float)),
        f_X=ones,
        df_X=lambda x: np.zeros_like(np.asarray(x, float)),
        sample_x=lambda rng, n: rng.random(n),
        interval=(0.0, 1.0),
    )


MODELS = {1: _model1, 2: _model2}


def get_model(model_id):
    try:
        return MODELS[int(model_id)]()
    except (KeyError, ValueError):
        raise ConfigError("model must be 1 or 2") from None


@dataclass
class ScenarioConfig:
    """One simulation scenario: model, error law, outliers, chunk plan."""

    model: int = 1
    error: str = "normal"
    lam: float = 1.0
    n_total: int = 20000
    chunk_size: int = 1000
    seed: int = 0
    replications: int = 50
    validation_size: int = 2000
    alpha: float = 0.1
    grid_size: int = 100
    tau_count: int = 99
    degree: int = 3
    include_average: bool = False
    include_nw: bool = True
    cv_folds: int = 10
    C_h: float = None
    C_h_nw: float = None

    def __post_init__(self):
        if self.lam < 1.0:
            raise ConfigError("contamination multiplier must be >= 1")
        if self.n_total <= 0 or self.chunk_size <= 0:
            raise ConfigError("n_total and chunk_size must be positive")
        if self.validation_size > self.n_total:
            raise ConfigError("validation size exceeds the total sample")
        get_model(self.model)
        get_error_law(self.error)

    def with_updates(self, **kw):
        return replace(self, **kw)


def replication_rng(seed, rep):
    """Counter-based generator for one replication, splittable by design."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, rep))))


def draw_dataset(config, rng):
    """One full dataset (x, y), outlier mask applied to 5% of the draws.

    The mask is drawn even at lambda = 1 so that contaminated and clean
    scenarios with the same seed share every base draw bit for bit.
    """
    model = get_model(config.model)
    law = get_error_law(config.error)
    n = config.n_total
    x = model.sample_x(rng, n)
    eps = law.sample(rng, n)
    mask = rng.random(n) < 0.05
    eps[mask] *= config.lam
    y = model.m(x) + model.sigma(x) * eps
    return x, y


def generate(config, replication=0):
    """Yield the scenario's chunks in stream order, deterministically."""
    rng = replication_rng(config.seed, replication)
    x, y = draw_dataset(config, rng)
    for start in range(0, config.n_total, config.chunk_size):
        sl = slice(start, min(start + config.chunk_size, config.n_total))
        yield Chunk(x[sl], y[sl])
