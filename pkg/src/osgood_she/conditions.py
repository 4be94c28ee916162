"""Numerical checks of the structural hypotheses on b, sigma, h and the noise.

Improper integrals are decided by a ladder heuristic: integrate one decade at
a time in s = log u up to ``u_max``; declare divergence once the partial
integral passes ``diverge_thresh`` and convergence once the per-decade
increments are negligible. Integrals still undecided at ``u_max`` (iterated
logarithms) are closed by reading off the power-law exponent of the integrand
in iterated-log coordinates.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gamma

from .catalog import NoiseSpectrum, ScalarFn, repeated_log_h, repeated_log_sigma
from .errors import DivergentIntegral, DomainError, LogDomainError, NonPositiveH

REL_TOL = 1e-10
U_MIN = 1e-8
U_MAX_CHECK = 1e12


@dataclass(frozen=True)
class QuadraturePolicy:
    diverge_thresh: float = 1e6
    conv_tol: float = 1e-9
    u_max: float = 1e300
    epsrel: float = 1e-12
    streak: int = 3
    max_level: int = 3
    fd_step: float = 1e-3


DEFAULT_POLICY = QuadraturePolicy()


@dataclass(frozen=True)
class OsgoodVerdict:
    kind: str
    value: Optional[float]
    lower_limit: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def finite(self) -> bool:
        return self.kind == "Finite"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "lower_limit": self.lower_limit,
                "reason": self.diagnostics.get("reason")}


@dataclass(frozen=True)
class EnvelopeReport:
    check: str
    holds: bool
    worst_ratio: float
    worst_point: float
    samples_checked: int
    value: Optional[float] = None
    notes: str = ""

    def to_dict(self) -> dict:
        return {"check": self.check, "holds": bool(self.holds), "worst_ratio": float(self.worst_ratio),
                "worst_point": float(self.worst_point), "value": self.value, "notes": self.notes}


def default_grid(n=20001):
    return np.geomspace(U_MIN, U_MAX_CHECK, n)


def _iter_log(x, k):
    """k-fold log of a scalar; None when some stage is not positive."""
    for _ in range(k):
        if not x > 0:
            return None
        x = math.log(x)
    return x


def _logrecip_of_h(h):
    def logrecip(u):
        v = float(h(u))
        if not v > 0:
            raise NonPositiveH(f"h({u:.6g}) = {v}")
        return -math.log(v)

    return logrecip


def _tail_level(logrecip, a, u_top, policy):
    """Find a level m whose integrand g_m(x_m) ~ x_m^{-p} with stationary p.

    Returns (m, p, tail) or None. x_m = log(u, m) and g_m is the integrand
    after the change of variables u -> x_m.
    """
    delta = policy.fd_step
    for m in range(policy.max_level + 1):
        y_top = _iter_log(u_top, m + 1)
        if y_top is None:
            break

        def logg(y):
            xs = [y]
            for _ in range(m):
                xs.append(math.exp(xs[-1]))
            # xs = [x_{m+1}, x_m, ..., x_1]
            u = math.exp(xs[-1])
            lr = logrecip(u)
            if m == 0:
                return lr
            return xs[-1] + sum(xs[1:-1]) + lr

        def expo(y):
            return -(logg(y + delta) - logg(y - delta)) / (2 * delta)

        y_low = 0.5 * y_top
        y_c = _iter_log(a, m + 1)
        if y_c is not None:
            y_low = max(y_low, 0.5 * (y_top + y_c))
        try:
            p_top, p_low = expo(y_top - delta), expo(y_low)
        except (OverflowError, ValueError):
            continue
        if not (np.isfinite(p_top) and np.isfinite(p_low)):
            continue
        if abs(p_top - p_low) <= 1e-3 * abs(p_top - 1) + 1e-6:
            # exponents within the stationarity tolerance of 1 count as divergent
            if p_top <= 1 + 1e-6:
                return m, p_top, math.inf
            x_top = math.exp(y_top)
            tail = x_top * math.exp(logg(y_top)) / (p_top - 1)
            return m, p_top, tail
    return None


def ladder_integrate(logrecip, a, policy=DEFAULT_POLICY):
    """Decide int_a^inf exp(logrecip(u)) du. Returns (kind, value, diagnostics)."""
    trace = []
    total = 0.0
    small = 0
    lo = math.log(a)
    hi_end = math.log(policy.u_max)
    step = math.log(10.0)

    def integrand(s):
        return math.exp(s + logrecip(math.exp(s)))

    while lo < hi_end - 1e-12:
        hi = min(lo + step, hi_end)
        with warnings.catch_warnings():
            # h overflowing to inf inside a decade is expected and harmless
            warnings.simplefilter("ignore", IntegrationWarning)
            seg, _ = quad(integrand, lo, hi, epsabs=0.0, epsrel=policy.epsrel, limit=200)
        total += seg
        trace.append((math.exp(hi), total))
        if not math.isfinite(total) or total > policy.diverge_thresh:
            return "Infinite", None, {"reason": "partial integral exceeded threshold", "trace": trace}
        small = small + 1 if seg <= policy.conv_tol * total else 0
        if small >= policy.streak:
            return "Finite", total, {"reason": "increments converged", "trace": trace}
        lo = hi
    # h may overflow close to u_max; back off along the ladder until it does not
    found = None
    for back in range(0, min(len(trace), 100), 10):
        u_top, partial = trace[len(trace) - 1 - back]
        found = _tail_level(logrecip, a, u_top, policy)
        if found is not None:
            total = partial
            break
    if found is None:
        return "Infinite", None, {"reason": "no stationary tail exponent", "trace": trace}
    m, p, tail = found
    diag = {"reason": f"tail exponent {p:.6g} at log level {m}", "trace": trace,
            "level": m, "exponent": p, "tail": tail}
    if not math.isfinite(tail) or total + tail > policy.diverge_thresh:
        return "Infinite", None, diag
    return "Finite", total + tail, diag


def osgood_classify(h: ScalarFn, c: float, policy: QuadraturePolicy = DEFAULT_POLICY) -> OsgoodVerdict:
    """Classify int_c^inf du / h(u) as Finite(value) or Infinite."""
    if not (c > 0 and math.isfinite(c)):
        raise DomainError(f"lower limit must be positive, got {c}")
    kind, value, diag = ladder_integrate(_logrecip_of_h(h), c, policy)
    return OsgoodVerdict(kind, value, float(c), diag)


def _check_grid(grid):
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be an increasing sequence of positive reals")
    return grid


def _positive_h(h, grid):
    hv = np.asarray(h(grid), dtype=float)
    bad = ~(hv > 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonPositiveH(f"h({grid[i]:.6g}) = {hv[i]}")
    return hv


def check_superlinear_ratio(h: ScalarFn, alpha: float, grid=None) -> EnvelopeReport:
    """h(u)/u nondecreasing on the grid and at least exp(1/alpha) at its first node."""
    grid = _check_grid(grid)
    r = _positive_h(h, grid) / grid
    drops = r[:-1] / r[1:]
    i = int(np.argmax(drops))
    floor = math.exp(1.0 / alpha) / r[0]
    worst, point = (float(drops[i]), float(grid[i + 1])) if drops[i] >= floor else (float(floor), float(grid[0]))
    return EnvelopeReport("superlinear_ratio", worst <= 1 + REL_TOL, worst, point, grid.size, float(r[0]))


def check_drift_envelope(b: ScalarFn, h: ScalarFn, grid=None) -> EnvelopeReport:
    """|b(u)| <= h(|u|) for u = +-grid."""
    grid = _check_grid(grid)
    hv = _positive_h(h, grid)
    bv = np.maximum(np.abs(b(grid)), np.abs(b(-grid)))
    ratio = bv / hv
    i = int(np.nanargmax(ratio)) if np.any(np.isfinite(ratio)) else 0
    worst = float(ratio[i])
    holds = bool(np.all(np.isfinite(ratio))) and worst <= 1 + REL_TOL
    return EnvelopeReport("drift_envelope", holds, worst, float(grid[i]), 2 * grid.size)


def sigma_envelope_values(h: ScalarFn, alpha: float, grid):
    hv = _positive_h(h, grid)
    R = hv / grid
    bad = ~(R > 1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise LogDomainError(f"h(u)/u = {R[i]:.6g} <= 1 at u = {grid[i]:.6g}")
    return grid ** (1 - alpha / 2) * hv ** (alpha / 2) / np.sqrt(np.log(R))


def check_sigma_envelope(sigma: ScalarFn, h: ScalarFn, alpha: float, grid=None) -> EnvelopeReport:
    """|sigma(u)| <= |u|^{1-a/2} h^{a/2} log(h/|u|)^{-1/2} for u = +-grid."""
    grid = _check_grid(grid)
    env = sigma_envelope_values(h, alpha, grid)
    sv = np.maximum(np.abs(sigma(grid)), np.abs(sigma(-grid)))
    ratio = sv / env
    i = int(np.nanargmax(ratio)) if np.any(np.isfinite(ratio)) else 0
    worst = float(ratio[i])
    holds = bool(np.all(np.isfinite(ratio))) and worst <= 1 + REL_TOL
    return EnvelopeReport("sigma_envelope", holds, worst, float(grid[i]), 2 * grid.size)


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / gamma(d / 2)


def dalang_upsilon(spec: NoiseSpectrum, policy: QuadraturePolicy = DEFAULT_POLICY) -> float:
    """(2 pi)^{-d} int f-hat(xi) (1 + |xi|^2)^{alpha-1} d xi via the radial form."""
    d, a = spec.d, spec.alpha
    const = math.log(sphere_area(d) / (2 * math.pi) ** d)

    def logint(r):
        if r <= 0:
            return -math.inf
        f = float(spec(r))
        if f < 0 or math.isnan(f):
            raise DomainError(f"negative spectral density {f} at {r}")
        if f == 0:
            return -math.inf
        lr = math.log(r)
        # log(1 + r^2) without overflowing r*r
        l1 = math.log1p(r * r) if r < 1 else 2 * lr + math.log1p(1 / (r * r))
        return const + (d - 1) * lr + math.log(f) - (1 - a) * l1

    def inner(s):
        return math.exp(s + logint(math.exp(s)))

    head, _ = quad(inner, -math.inf, 0.0, epsabs=0.0, epsrel=1e-10, limit=200)
    pol = QuadraturePolicy(**{**policy.__dict__, "diverge_thresh": 1e12})
    kind, tail, diag = ladder_integrate(logint, 1.0, pol)
    if kind == "Infinite" or not math.isfinite(head) or head + tail > 1e12:
        raise DivergentIntegral(f"Dalang integral diverges ({diag.get('reason')})")
    return head + tail


_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def noise_g(spec: NoiseSpectrum, s_grid) -> np.ndarray:
    """g(s) = int exp(-s |xi|^2) f-hat(xi) d xi for each s (radial, log-decade Gauss-Legendre)."""
    d = spec.d
    out = np.empty(len(s_grid))
    area = sphere_area(d)
    for j, s in enumerate(s_grid):
        if not s > 0:
            raise DomainError("s must be positive")
        top = 0.5 * math.log10(750.0 / s)
        edges = np.arange(-12.0, top + 1.0, 1.0)
        mid = 0.5 * (edges[:-1] + edges[1:])
        t = (mid[:, None] + 0.5 * _GL_X[None, :]) * math.log(10.0)
        r = np.exp(t)
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            f = spec(r)
            vals = r**d * np.exp(-s * r * r) * f
        out[j] = area * 0.5 * math.log(10.0) * np.sum(vals * _GL_W[None, :])
    if not np.all(np.isfinite(out)):
        raise DivergentIntegral("g(s) is not finite")
    return out


def noise_alpha_check(spec: NoiseSpectrum, s_grid=None, s_ref: float = 1e-2, factor: float = 10.0) -> EnvelopeReport:
    """Finite-grid proxy for limsup_{s->0} s^{1-alpha} g(s) < inf.

    holds when s^{1-alpha} g(s) on s <= s_ref stays below factor times its
    value at s_ref.
    """
    if s_grid is None:
        s_grid = np.logspace(-8, 0, 81)
    s_grid = np.asarray(s_grid, dtype=float)
    if not np.any(np.isclose(s_grid, s_ref)):
        s_grid = np.sort(np.append(s_grid, s_ref))
    g = noise_g(spec, s_grid)
    q = s_grid ** (1 - spec.alpha) * g
    ref = q[int(np.argmin(np.abs(s_grid - s_ref)))]
    small = s_grid <= s_ref * (1 + 1e-12)
    i = int(np.argmax(np.where(small, q, -np.inf)))
    worst = float(q[i] / (factor * ref))
    return EnvelopeReport("noise_alpha", worst <= 1 + REL_TOL, worst, float(s_grid[i]), int(s_grid.size),
                          float(q[i]), notes="finite-grid proxy for a limsup as s -> 0")


def repeated_log_family(K: int, alpha: float):
    """(h, sigma_bound) for h = e^{1/alpha} u prod_k log(u, k)."""
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    return repeated_log_h(K, alpha), repeated_log_sigma(K, alpha)
