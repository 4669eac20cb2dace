import math

import mpmath as mp
import numpy as np
import pytest

from evmv import _kernels
from evmv.errors import DomainError
from evmv.special import digamma, ln_gamma, ln_multinomial_beta, trigamma

mp.mp.dps = 40

EULER_GAMMA = 0.5772156649015329
PI2_OVER_6 = 1.6449340668482264
LN_SQRT_PI = 0.5723649429247001
LN2 = math.log(2.0)


def test_known_constants(kernel_backend):
    assert ln_gamma(1.0) == pytest.approx(0.0, abs=1e-13)
    assert ln_gamma(3.0) == pytest.approx(LN2, rel=1e-12)
    assert ln_gamma(0.5) == pytest.approx(LN_SQRT_PI, rel=1e-10)
    assert digamma(1.0) == pytest.approx(-EULER_GAMMA, rel=1e-10)
    assert trigamma(1.0) == pytest.approx(PI2_OVER_6, rel=1e-10)
    assert trigamma(100.0) == pytest.approx(0.010050166663333571, rel=1e-9)


def test_recurrence_identities(kernel_backend):
    for x in (0.5, 1.0, 2.0, 10.0, 100.0):
        assert digamma(x + 1.0) - digamma(x) - 1.0 / x == pytest.approx(0.0, abs=1e-10)
        assert trigamma(x) - trigamma(x + 1.0) - 1.0 / x**2 == pytest.approx(0.0, abs=1e-10)
    assert digamma(2.0) - digamma(1.0) == pytest.approx(1.0, abs=1e-12)
    assert digamma(102.0) - digamma(101.0) == pytest.approx(1.0 / 101.0, rel=1e-12)
    assert trigamma(4.0) - trigamma(5.0) == pytest.approx(0.0625, rel=1e-12)


def test_against_arbitrary_precision_grid(kernel_backend):
    rng = np.random.default_rng(2024)
    xs = np.concatenate([
        10.0 ** rng.uniform(-3, 6, size=200),
        np.array([1e-3, 0.5, 1.0, 1.4616321449683623, 2.0, 6.0, 1e6]),
    ])
    for x in xs:
        for ours, ref in (
            (ln_gamma, mp.loggamma),
            (digamma, mp.digamma),
            (trigamma, lambda v: mp.polygamma(1, v)),
        ):
            expected = float(ref(mp.mpf(float(x))))
            tol = 1e-10 * max(abs(expected), 1e-6)
            assert abs(ours(float(x)) - expected) <= tol, (ours.__name__, x)


def test_monotonicity(kernel_backend):
    grid = np.concatenate([np.linspace(1e-3, 1.0, 50), np.linspace(1.0, 1e4, 50)])
    dg = np.array([digamma(x) for x in grid])
    tg = np.array([trigamma(x) for x in grid])
    assert np.all(np.diff(dg) > 0)
    assert np.all(np.diff(tg) < 0)
    assert np.all(tg > 0)


def test_lgamma_derivative_matches_digamma(kernel_backend):
    rng = np.random.default_rng(5)
    h = 1e-5
    for x in rng.uniform(0.1, 50.0, size=50):
        fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2 * h)
        assert fd == pytest.approx(digamma(x), abs=1e-6)


def test_ln_multinomial_beta(kernel_backend):
    assert ln_multinomial_beta([1.0, 1.0]) == pytest.approx(0.0, abs=1e-13)
    assert ln_multinomial_beta([2.0, 1.0]) == pytest.approx(-LN2, rel=1e-12)
    assert ln_multinomial_beta([1.0, 1.0, 1.0]) == pytest.approx(-LN2, rel=1e-12)
    # generic case against mpmath
    alpha = [2.5, 0.7, 4.0]
    expected = float(
        sum(mp.loggamma(a) for a in alpha) - mp.loggamma(sum(alpha))
    )
    assert ln_multinomial_beta(alpha) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan, math.inf])
def test_domain_errors(bad):
    for fn in (ln_gamma, digamma, trigamma):
        with pytest.raises(DomainError):
            fn(bad)
    with pytest.raises(DomainError):
        ln_multinomial_beta([1.0, bad])


@pytest.mark.skipif(
    len(_kernels.available_backends()) < 2, reason="compiled backend unavailable"
)
def test_backends_agree():
    rng = np.random.default_rng(11)
    xs = 10.0 ** rng.uniform(-3, 6, size=2000)
    zs = rng.uniform(-40, 40, size=2000)
    results = {}
    for name in _kernels.available_backends():
        prev = _kernels.use_backend(name)
        results[name] = (
            _kernels.lgamma(xs),
            _kernels.digamma(xs),
            _kernels.trigamma(xs),
            _kernels.softplus(zs),
            _kernels.softplus_grad(zs),
        )
        _kernels.use_backend(prev)
    for a, b in zip(results["pure"], results["compiled"]):
        ref = np.maximum(np.abs(a), 1e-6)
        assert np.max(np.abs(a - b) / ref) < 1e-13
