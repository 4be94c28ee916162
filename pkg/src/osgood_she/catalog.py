"""Named scalar functions and noise spectra addressable from config files.

Names look like ``"h.repeated_log:2"`` or ``"fhat.gaussian:0.5"``: a family
followed by an optional numeric parameter.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma

from .errors import ConfigError, DomainError

E = np.e


@dataclass(frozen=True)
class ScalarFn:
    """Vectorized real function with a label.

    ``antiderivative`` is an optional closed form of 1/f, used by tests.
    """

    fn: Callable
    label: str
    antiderivative: Optional[Callable] = None

    def __call__(self, u):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self.fn(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class NoiseSpectrum:
    """Isotropic spectral density f-hat(|xi|) with exponent alpha in dimension d."""

    density: Callable
    alpha: float
    d: int
    label: str = ""
    white: bool = False
    kernel: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.d < 1:
            raise DomainError(f"d must be positive, got {self.d}")

    def __call__(self, r):
        with np.errstate(divide="ignore", over="ignore"):
            return self.density(np.asarray(r, dtype=float))


def _exp_iter(k):
    """exp applied k times to 1 (thresholds where log(u, k) reaches 1)."""
    x = 1.0
    for _ in range(k):
        x = np.exp(x) if x < 709 else np.inf
    return x


def iterated_log(u, k):
    """log(u, k) = log(log(u, k-1)), frozen at 1 below exp^(k)(1)."""
    u = np.asarray(u, dtype=float)
    thr = _exp_iter(k)
    out = np.ones_like(u)
    mask = u >= thr
    x = u[mask]
    for _ in range(k):
        x = np.log(x)
    out[mask] = x
    return out


def repeated_log_h(K: int, alpha: float) -> ScalarFn:
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    c = np.exp(1.0 / alpha)

    def h(u):
        out = c * u
        for k in range(1, K + 1):
            out = out * iterated_log(u, k)
        return out

    return ScalarFn(h, f"h.repeated_log:{K}")


def repeated_log_sigma(K: int, alpha: float) -> ScalarFn:
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")

    def s(u):
        a = np.abs(u)
        out = a * iterated_log(a, 2) ** -0.5
        for k in range(1, K + 1):
            out = out * iterated_log(a, k) ** (alpha / 2)
        return np.sign(u) * out

    return ScalarFn(s, f"sigma.repeated_log:{K}")


def sigma_envelope(h: ScalarFn, alpha: float, scale: float = 1.0) -> ScalarFn:
    """Odd extension of |u|^{1-a/2} h(|u|)^{a/2} log(h(|u|)/|u|)^{-1/2}."""

    def s(u):
        a = np.abs(u)
        safe = np.where(a > 0, a, 1.0)
        hv = h(safe)
        env = safe ** (1 - alpha / 2) * hv ** (alpha / 2) / np.sqrt(np.log(hv / safe))
        return np.where(a > 0, scale * np.sign(u) * env, 0.0)

    return ScalarFn(s, f"sigma.envelope:{scale:g}")


def _num(name, arg, default=None):
    if arg is None:
        if default is None:
            raise ConfigError(name, "missing numeric parameter")
        return default
    try:
        return float(arg)
    except ValueError:
        raise ConfigError(name, f"bad numeric parameter {arg!r}") from None


def resolve(name: str, alpha: Optional[float] = None, h: Optional[ScalarFn] = None) -> ScalarFn:
    """Resolve an ``h.*``, ``b.*`` or ``sigma.*`` catalog name."""
    family, _, arg = name.partition(":")
    arg = arg or None

    def need_alpha():
        if alpha is None:
            raise ConfigError(name, "needs nonlinearity.alpha")
        return alpha

    if family == "h.ulogu":
        f = repeated_log_h(1, need_alpha())
        return ScalarFn(f.fn, name)
    if family == "h.repeated_log":
        K = int(_num(name, arg))
        return ScalarFn(repeated_log_h(K, need_alpha()).fn, name)
    if family == "h.power":
        p = _num(name, arg)
        return ScalarFn(lambda u: u**p, name)
    if family == "h.linear":
        c = _num(name, arg, 1.0)
        return ScalarFn(lambda u: c * u, name)
    if family == "b.power":
        p = _num(name, arg)
        return ScalarFn(lambda u: np.abs(u) ** p, name)
    if family == "b.ulog":
        c = _num(name, arg, 1.0)
        return ScalarFn(lambda u: c * u * np.log(E + np.abs(u)), name)
    if family == "b.linear":
        c = _num(name, arg, 1.0)
        return ScalarFn(lambda u: c * u, name)
    if family == "b.zero" or family == "sigma.zero":
        return ScalarFn(lambda u: np.zeros_like(u), name)
    if family == "sigma.envelope":
        if h is None:
            raise ConfigError(name, "needs nonlinearity.h")
        return ScalarFn(sigma_envelope(h, need_alpha(), _num(name, arg, 1.0)).fn, name)
    if family == "sigma.repeated_log":
        K = int(_num(name, arg))
        return ScalarFn(repeated_log_sigma(K, need_alpha()).fn, name)
    if family == "sigma.clip":
        c = _num(name, arg, 1.0)
        return ScalarFn(lambda u: np.minimum(np.abs(u), c), name)
    if family == "sigma.linear":
        c = _num(name, arg, 1.0)
        return ScalarFn(lambda u: c * u, name)
    if family == "sigma.const":
        c = _num(name, arg, 1.0)
        return ScalarFn(lambda u: np.full_like(u, c), name)
    raise ConfigError(name, "unknown catalog name")


def resolve_spectrum(name: str, alpha: Optional[float] = None, d: int = 1) -> NoiseSpectrum:
    """Resolve an ``fhat.*`` name.

    alpha defaults to the value the family implies (white: 1 - d/2 in d=1,
    Gaussian: 1, Riesz with exponent beta: 1 - beta/2).
    """
    family, _, arg = name.partition(":")
    arg = arg or None
    if family == "fhat.white":
        a = 0.5 if alpha is None else alpha
        return NoiseSpectrum(lambda r: np.ones_like(r), a, d, name, white=True)
    if family == "fhat.gaussian":
        ell = _num(name, arg, 1.0)
        a = 1.0 if alpha is None else alpha

        def kern(x):
            return (4 * np.pi * ell**2) ** (-d / 2) * np.exp(-np.asarray(x) ** 2 / (4 * ell**2))

        return NoiseSpectrum(lambda r: np.exp(-(r * ell) ** 2), a, d, name, kernel=kern)
    if family == "fhat.riesz":
        beta = _num(name, arg)
        if not 0 < beta < min(2, d):
            raise ConfigError(name, f"beta must lie in (0, min(2, d)), got {beta}")
        a = 1 - beta / 2 if alpha is None else alpha
        const = np.pi ** (-d / 2) * 2.0 ** (beta - d) * gamma(beta / 2) / gamma((d - beta) / 2)

        def kern(x):
            return const * np.abs(np.asarray(x, dtype=float)) ** (-beta)

        return NoiseSpectrum(lambda r: r ** (beta - d), a, d, name, kernel=kern)
    raise ConfigError(name, "unknown spectrum name")
