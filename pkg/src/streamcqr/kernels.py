"""Smoothing kernels and their moment constants."""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError


@dataclass(frozen=True)
class Kernel:
    """A symmetric density kernel with compact support.

    Parameters
    ----------
    name : str
        Registry name.
    evaluate : callable
        Vectorized map u -> K(u), zero outside [-support_radius, support_radius].
    support_radius : float
        Half-width of the support.
    """

    name: str
    evaluate: callable = field(repr=False)
    support_radius: float = 1.0

    def __call__(self, u):
        return self.evaluate(u)

    def scaled(self, u, h):
        """K_h(u) = K(u / h) / h."""
        return self.evaluate(np.asarray(u, dtype=float) / h) / h


@dataclass(frozen=True)
class KernelMoments:
    """Moment constants of a kernel.

    k21 = int u^2 K(u) du, k02 = int K(u)^2 du, k41 = int u^4 K(u) du.
    """

    k21: float
    k02: float
    k41: float


def _epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.maximum(0.0, 0.75 * (1.0 - u * u))


EPANECHNIKOV = Kernel("epanechnikov", _epanechnikov, 1.0)

KERNELS = {"epanechnikov": EPANECHNIKOV}


def get_kernel(name):
    try:
        return KERNELS[name]
    except KeyError:
        raise ConfigError("unknown kernel %r" % (name,)) from None


def kernel_eval(kernel, u):
    """Evaluate K(u) elementwise."""
    return kernel.evaluate(u)


def kernel_moments(kernel):
    """Moment constants by adaptive quadrature over the support."""
    if isinstance(kernel, str):
        kernel = get_kernel(kernel)
    r = kernel.support_radius
    k21 = quad(lambda u: u * u * kernel.evaluate(u), -r, r, epsabs=1e-12)[0]
    k02 = quad(lambda u: kernel.evaluate(u) ** 2, -r, r, epsabs=1e-12)[0]
    k41 = quad(lambda u: u ** 4 * kernel.evaluate(u), -r, r, epsabs=1e-12)[0]
    return KernelMoments(k21=k21, k02=k02, k41=k41)
