import math

import numpy as np
import pytest

from osgood_she.catalog import resolve, resolve_spectrum, sigma_envelope
from osgood_she.conditions import (check_drift_envelope, check_sigma_envelope, check_superlinear_ratio,
                                   dalang_upsilon, default_grid, noise_alpha_check, noise_g, osgood_classify,
                                   repeated_log_family)
from osgood_she.errors import DivergentIntegral, DomainError, LogDomainError, NonPositiveH

from conftest import fn

E = math.e

# closed forms of int_c^inf du / h(u)
FINITE_CASES = [
    ("u^2", lambda u: u**2, 1.0, 1.0),
    ("u^2 c=2", lambda u: u**2, 2.0, 0.5),
    ("u^1.5", lambda u: u**1.5, 1.0, 2.0),
    ("u^1.5 c=4", lambda u: u**1.5, 4.0, 1.0),
    ("u log^2 u", lambda u: u * np.log(u) ** 2, E, 1.0),
    ("u log u (log log u)^2", lambda u: u * np.log(u) * np.log(np.log(u)) ** 2, E**E, 1.0),
]

INFINITE_CASES = [
    ("u log u", lambda u: u * np.log(u), E),
    ("u log u log log u", lambda u: u * np.log(u) * np.log(np.log(u)), E**E),
    ("u log u log2 log3", lambda u: u * np.log(u) * np.log(np.log(u)) * np.log(np.log(np.log(u))), E**E**E),
    ("linear", lambda u: 3 * u, 1.0),
]


@pytest.mark.parametrize("name,f,c,exact", FINITE_CASES)
def test_osgood_finite_matches_closed_form(name, f, c, exact):
    v = osgood_classify(fn(f), c)
    assert v.kind == "Finite" and v.finite
    np.testing.assert_allclose(v.value, exact, rtol=1e-6)
    assert v.lower_limit == c


@pytest.mark.parametrize("name,f,c", INFINITE_CASES)
def test_osgood_infinite(name, f, c):
    v = osgood_classify(fn(f), c)
    assert v.kind == "Infinite" and not v.finite


@pytest.mark.parametrize("K", [1, 2, 3])
@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_repeated_log_family_infinite_and_superlinear(K, alpha):
    h, _ = repeated_log_family(K, alpha)
    assert osgood_classify(h, 1.0).kind == "Infinite"
    assert check_superlinear_ratio(h, alpha).holds


@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
@pytest.mark.parametrize("name,f,c,exact", FINITE_CASES[:3] + FINITE_CASES[4:5])
def test_osgood_scaling_invariance_finite(scale, name, f, c, exact):
    v = osgood_classify(fn(lambda u: scale * f(u)), c)
    assert v.kind == "Finite"
    np.testing.assert_allclose(v.value, exact / scale, rtol=1e-6)


@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
@pytest.mark.parametrize("name,f,c", INFINITE_CASES[:2])
def test_osgood_scaling_invariance_infinite(scale, name, f, c):
    assert osgood_classify(fn(lambda u: scale * f(u)), c).kind == "Infinite"


def test_osgood_errors():
    with pytest.raises(DomainError):
        osgood_classify(fn(lambda u: u**2), 0.0)
    with pytest.raises(DomainError):
        osgood_classify(fn(lambda u: u**2), -1.0)
    with pytest.raises(NonPositiveH):
        osgood_classify(fn(lambda u: u * np.log(u)), 0.5)


def test_osgood_verdict_serializes():
    d = osgood_classify(fn(lambda u: u**2), 1.0).to_dict()
    assert d["kind"] == "Finite"
    np.testing.assert_allclose(d["value"], 1.0, rtol=1e-9)


def test_superlinear_examples():
    assert check_superlinear_ratio(resolve("h.ulogu", 0.5), 0.5).holds
    assert not check_superlinear_ratio(fn(lambda u: u**0.5), 1.0).holds
    # unscaled u max(1, log u): ratio max(1, log u) starts below e^2
    rep = check_superlinear_ratio(fn(lambda u: u * np.maximum(1.0, np.log(u))), 0.5)
    assert not rep.holds
    np.testing.assert_allclose(rep.worst_ratio, E**2, rtol=1e-12)


def test_superlinear_grid_requirements():
    g = default_grid()
    assert g.size >= 10_000 and g[0] == 1e-8 and g[-1] == pytest.approx(1e12)
    with pytest.raises(DomainError):
        check_superlinear_ratio(fn(lambda u: u), 1.0, grid=[3.0, 2.0, 1.0])
    with pytest.raises(NonPositiveH):
        check_superlinear_ratio(fn(lambda u: u * np.log(u)), 0.5)


def test_drift_envelope_examples():
    h = fn(lambda u: 2 * u * np.log1p(u) + u)
    assert check_drift_envelope(fn(lambda u: u * np.log1p(np.abs(u))), h).holds
    assert not check_drift_envelope(fn(lambda u: u**2), fn(lambda u: u * np.log1p(u))).holds
    zero = check_drift_envelope(fn(lambda u: 0 * u), h)
    assert zero.holds and zero.worst_ratio == 0.0


def test_drift_envelope_checks_both_signs():
    h = fn(lambda u: u + 1.0)
    odd_bad = fn(lambda u: np.where(u < 0, 2 * (np.abs(u) + 1), 0.0))
    rep = check_drift_envelope(odd_bad, h)
    assert not rep.holds
    np.testing.assert_allclose(rep.worst_ratio, 2.0)


def test_sigma_envelope_zero_and_equality():
    h = fn(lambda u: E**2 * u * np.maximum(1.0, np.log(u)))
    assert check_sigma_envelope(fn(lambda u: 0 * u), h, 0.5).holds
    rep = check_sigma_envelope(sigma_envelope(h, 0.5), h, 0.5)
    assert rep.holds
    np.testing.assert_allclose(rep.worst_ratio, 1.0, rtol=1e-12)


def test_sigma_linear_sits_inside_log_envelope():
    # envelope/u = R^{1/4} (log R)^{-1/2} with R >= e^2, minimized at R = e^2
    h = fn(lambda u: E**2 * u * np.log(E + u))
    rep = check_sigma_envelope(fn(lambda u: u), h, 0.5)
    assert rep.holds
    np.testing.assert_allclose(rep.worst_ratio, math.sqrt(2) * math.exp(-0.5), rtol=1e-6)


def test_sigma_superlinear_breaks_envelope():
    h = fn(lambda u: E**2 * u * np.log(E + u))
    rep = check_sigma_envelope(fn(lambda u: u * np.log(E + np.abs(u))), h, 0.5)
    assert not rep.holds
    assert rep.worst_point > 1e6


def test_sigma_envelope_log_domain():
    with pytest.raises(LogDomainError):
        check_sigma_envelope(fn(lambda u: 0 * u), fn(lambda u: u), 0.5)


def test_envelope_report_dict_fields():
    d = check_drift_envelope(fn(lambda u: u), fn(lambda u: 2 * u)).to_dict()
    assert {"check", "holds", "worst_ratio", "worst_point", "value"} <= set(d)


def test_dalang_white_quarter_matches_beta_function():
    # (2 pi)^{-1} B(1/2, 1/4), independent of the radial ladder
    v = dalang_upsilon(resolve_spectrum("fhat.white", 0.25, 1))
    np.testing.assert_allclose(v, 0.834626841674073186, rtol=1e-8)


def test_dalang_white_quarter_riemann_oracle():
    x = np.linspace(-4000.0, 4000.0, 8_000_001)
    body = np.sum((1 + x * x) ** -0.75) * (x[1] - x[0])
    tail = 2 * 2 * 4000.0 ** -0.5  # int_X^inf x^{-3/2} dx on both sides
    v = dalang_upsilon(resolve_spectrum("fhat.white", 0.25, 1))
    np.testing.assert_allclose(v, (body + tail) / (2 * math.pi), rtol=1e-6)


def test_dalang_gaussian_alpha_one():
    v = dalang_upsilon(resolve_spectrum("fhat.gaussian:1", 1.0, 1))
    np.testing.assert_allclose(v, math.sqrt(math.pi) / (2 * math.pi), rtol=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 0.6, 0.75])
def test_dalang_white_diverges(alpha):
    with pytest.raises(DivergentIntegral):
        dalang_upsilon(resolve_spectrum("fhat.white", alpha, 1))


def test_dalang_monotone_in_alpha():
    vals = [dalang_upsilon(resolve_spectrum("fhat.gaussian:0.5", a, 2)) for a in (0.2, 0.4, 0.6, 0.8, 1.0)]
    assert np.all(np.diff(vals) >= 0)


def test_noise_g_white_closed_form():
    s = np.logspace(-6, 0, 13)
    np.testing.assert_allclose(noise_g(resolve_spectrum("fhat.white", 0.5, 1), s), np.sqrt(np.pi / s), rtol=1e-10)


def test_noise_g_gaussian_closed_form():
    s = np.logspace(-6, 0, 13)
    g = noise_g(resolve_spectrum("fhat.gaussian:1", 1.0, 1), s)
    np.testing.assert_allclose(g, np.sqrt(np.pi / (1 + s)), rtol=1e-10)


@pytest.mark.parametrize("name,alpha,holds", [
    ("fhat.white", 0.5, True),
    ("fhat.white", 0.25, True),
    ("fhat.white", 0.75, False),
    ("fhat.gaussian:1", 1.0, True),
    ("fhat.gaussian:1", 0.5, True),
])
def test_noise_alpha_check(name, alpha, holds):
    rep = noise_alpha_check(resolve_spectrum(name, alpha, 1))
    assert rep.holds is holds
    assert "limsup" in rep.notes


def test_noise_alpha_white_is_flat():
    rep = noise_alpha_check(resolve_spectrum("fhat.white", 0.5, 1))
    np.testing.assert_allclose(rep.value, math.sqrt(math.pi), rtol=1e-9)
    np.testing.assert_allclose(rep.worst_ratio, 0.1, rtol=1e-9)


def test_repeated_log_sigma_bound_shapes():
    _, s1 = repeated_log_family(1, 0.5)
    u = np.array([1e4, 1e8, 1e12])
    L1, L2 = np.log(u), np.log(np.log(u))
    np.testing.assert_allclose(s1(u), u * L1**0.25 * L2**-0.5, rtol=1e-12)
    _, s2 = repeated_log_family(2, 1.0)
    np.testing.assert_allclose(s2(u), u * L1**0.5, rtol=1e-12)


def test_repeated_log_family_errors():
    with pytest.raises(DomainError):
        repeated_log_family(0, 0.5)
    with pytest.raises(DomainError):
        repeated_log_family(1, 1.5)
