import math

import numpy as np
import pytest

from osgood_she.catalog import iterated_log, repeated_log_h, resolve, resolve_spectrum
from osgood_she.errors import ConfigError, DomainError


@pytest.mark.parametrize("name,u,expected", [
    ("b.power:2", -3.0, 9.0),
    ("b.linear:0.5", 4.0, 2.0),
    ("b.zero", 7.0, 0.0),
    ("sigma.clip:1", -5.0, 1.0),
    ("sigma.clip:1", 0.25, 0.25),
    ("sigma.const:2.5", 10.0, 2.5),
    ("sigma.linear:3", -1.0, -3.0),
    ("h.power:2", 3.0, 9.0),
    ("h.linear:2", 3.0, 6.0),
])
def test_resolve_values(name, u, expected):
    assert float(resolve(name, 0.5)(u)) == pytest.approx(expected)


def test_b_ulog_is_odd():
    b = resolve("b.ulog:2")
    u = np.array([0.5, 3.0, 1e6])
    np.testing.assert_allclose(b(-u), -b(u))
    np.testing.assert_allclose(b(u), 2 * u * np.log(math.e + u))


def test_h_ulogu_regularized():
    h = resolve("h.ulogu", 0.5)
    np.testing.assert_allclose(h(np.array([0.5, 1.0, math.e])), math.e**2 * np.array([0.5, 1.0, math.e]))
    np.testing.assert_allclose(h(100.0), math.e**2 * 100 * math.log(100))


def test_iterated_log_frozen_below_threshold():
    np.testing.assert_array_equal(iterated_log(np.array([0.1, 2.0, 10.0]), 1), [1.0, 1.0, math.log(10.0)])
    np.testing.assert_allclose(iterated_log(np.array([math.e**math.e]), 2), [1.0])
    np.testing.assert_array_equal(iterated_log(np.array([10.0]), 3), [1.0])


def test_repeated_log_h_prefactor():
    for alpha in (0.25, 0.5, 1.0):
        np.testing.assert_allclose(repeated_log_h(2, alpha)(1.0), math.exp(1 / alpha))


def test_sigma_envelope_is_odd_and_zero_at_zero():
    s = resolve("sigma.envelope", 0.5, resolve("h.ulogu", 0.5))
    u = np.array([0.0, 0.3, 5.0, 1e9])
    np.testing.assert_allclose(s(-u), -s(u))
    assert float(s(0.0)) == 0.0


@pytest.mark.parametrize("name", ["nope", "b.power", "sigma.envelope", "h.power:x"])
def test_resolve_errors(name):
    with pytest.raises(ConfigError):
        resolve(name, 0.5)


def test_resolve_needs_alpha():
    with pytest.raises(ConfigError):
        resolve("h.ulogu")


def test_spectra_defaults_and_kernels():
    w = resolve_spectrum("fhat.white")
    assert w.white and w.alpha == 0.5
    g = resolve_spectrum("fhat.gaussian:1", d=1)
    assert g.alpha == 1.0
    np.testing.assert_allclose(g(0.0), 1.0)
    np.testing.assert_allclose(g.kernel(0.0), 1 / math.sqrt(4 * math.pi))
    r = resolve_spectrum("fhat.riesz:0.5", d=1)
    assert r.alpha == pytest.approx(0.75)
    np.testing.assert_allclose(r(2.0), 2.0**-0.5)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.9])
def test_riesz_kernel_is_fourier_pair(beta):
    # d = 1: (2 pi)^{-1} int |xi|^{beta-1} e^{i xi x} d xi = Gamma(beta) cos(pi beta / 2) |x|^{-beta} / pi
    r = resolve_spectrum(f"fhat.riesz:{beta}", d=1)
    x = 1.3
    exact = math.gamma(beta) * math.cos(math.pi * beta / 2) * x**-beta / math.pi
    np.testing.assert_allclose(r.kernel(x), exact, rtol=1e-12)


@pytest.mark.parametrize("name,d", [("fhat.riesz:1.5", 1), ("fhat.riesz:0", 2), ("fhat.bogus", 1)])
def test_spectrum_errors(name, d):
    with pytest.raises(ConfigError):
        resolve_spectrum(name, d=d)


def test_spectrum_alpha_range():
    with pytest.raises(DomainError):
        resolve_spectrum("fhat.white", 1.5)
