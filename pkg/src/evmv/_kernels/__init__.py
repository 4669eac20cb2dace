"""Numeric kernel dispatch.

Two interchangeable backends implement the hot kernels: a compiled Cython
extension (_speedups) and a pure numpy fallback (pure). The compiled one
is selected at import when present; EVMV_BACKEND=pure|compiled forces the
choice, and use_backend() swaps at runtime for tests and benchmarks.
"""

import os

import numpy as np

from . import pure as _pure_mod

try:
    from . import _speedups as _compiled_mod
except ImportError:
    _compiled_mod = None

_BACKENDS = {"pure": _pure_mod}
if _compiled_mod is not None:
    _BACKENDS["compiled"] = _compiled_mod


def _default_backend():
    forced = os.environ.get("EVMV_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"EVMV_BACKEND={forced!r} but that backend is not available "
                f"(have: {sorted(_BACKENDS)})"
            )
        return forced
    return "compiled" if "compiled" in _BACKENDS else "pure"


_name = _default_backend()
_impl = _BACKENDS[_name]


def backend_name():
    return _name


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name):
    """Switch kernels at runtime. Returns the previously active name."""
    global _name, _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {sorted(_BACKENDS)}")
    previous = _name
    _name = name
    _impl = _BACKENDS[name]
    return previous


def _as_c64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def _elementwise(fn, x):
    # Backends operate on 1-d contiguous arrays; preserve the input shape.
    a = np.asarray(x, dtype=np.float64)
    out = fn(_as_c64(a.ravel()))
    return np.asarray(out).reshape(a.shape)


def lgamma(x):
    return _elementwise(_impl.lgamma, x)


def digamma(x):
    return _elementwise(_impl.digamma, x)


def trigamma(x):
    return _elementwise(_impl.trigamma, x)


def softplus(z):
    return _elementwise(_impl.softplus, z)


def softplus_grad(z):
    return _elementwise(_impl.softplus_grad, z)


def combine_pair_batch(b1, u1, b2, u2):
    """Dempster-combine two batches of opinions.

    b1, b2: (N, K) belief masses; u1, u2: (N,) uncertainty masses.
    Returns (b, u, kappa) with the combined masses renormalized.
    """
    b1 = _as_c64(b1)
    b2 = _as_c64(b2)
    u1 = _as_c64(u1)
    u2 = _as_c64(u2)
    if b1.ndim != 2 or b1.shape != b2.shape or u1.shape != (b1.shape[0],) or u2.shape != u1.shape:
        raise ValueError("combine_pair_batch expects (N, K) beliefs and (N,) uncertainties")
    return _impl.combine_pair_batch(b1, u1, b2, u2)
