"""Scalar special functions: log-gamma, digamma, trigamma, log multinomial beta.

Thin validating wrappers over the kernel backend (see evmv._kernels). The
accuracy targets (relative error ~1e-10 or better on [1e-3, 1e6]) leave
loss-gradient checks limited by finite differences, not by these.
"""

import math

import numpy as np

from . import _kernels as kernels
from .errors import DomainError


def _checked_positive(x, name):
    xf = float(x)
    if not math.isfinite(xf) or xf <= 0.0:
        raise DomainError(f"{name} requires a finite argument > 0, got {x!r}")
    return xf


def ln_gamma(x):
    """Natural log of the gamma function for x > 0."""
    xf = _checked_positive(x, "ln_gamma")
    return float(kernels.lgamma(np.array([xf]))[0])


def digamma(x):
    """Logarithmic derivative of gamma for x > 0."""
    xf = _checked_positive(x, "digamma")
    return float(kernels.digamma(np.array([xf]))[0])


def trigamma(x):
    """Second log-derivative of gamma for x > 0; positive and decreasing."""
    xf = _checked_positive(x, "trigamma")
    return float(kernels.trigamma(np.array([xf]))[0])


def ln_multinomial_beta(alpha):
    """log B(alpha) = sum(ln_gamma(a_k)) - ln_gamma(sum(a_k)) for alpha > 0."""
    a = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if a.size == 0 or not np.all(np.isfinite(a)) or np.any(a <= 0.0):
        raise DomainError("ln_multinomial_beta requires a non-empty vector of finite values > 0")
    parts = kernels.lgamma(a)
    return float(parts.sum() - kernels.lgamma(np.array([a.sum()]))[0])
