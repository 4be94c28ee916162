"""Certification of experiment preconditions from the conditions module."""
import numpy as np

from ..conditions import (check_drift_envelope, check_sigma_envelope, check_superlinear_ratio,
                          noise_alpha_check, osgood_classify)
from ..config import RunConfig, functions_of, spectrum_of
from ..errors import ConditionsFailed, OsgoodSheError

_PROBE = np.concatenate([-np.geomspace(1e-8, 1e12, 2001)[::-1], [0.0], np.geomspace(1e-8, 1e12, 2001)])


def _entry(holds, **kw):
    return {"holds": bool(holds), **kw}


def _guard(name, fn):
    try:
        return fn()
    except OsgoodSheError as e:
        return _entry(False, check=name, error=f"{type(e).__name__}: {e}")


def _identically_zero(f) -> bool:
    return bool(np.all(f(_PROBE) == 0))


def global_checks(cfg: RunConfig) -> dict:
    """Infinite Osgood for h plus the drift, sigma and noise envelopes."""
    b, sigma, h = functions_of(cfg)
    alpha = cfg.nonlinearity.alpha
    out = {}
    if h is None:
        zero = _identically_zero(b) and _identically_zero(sigma)
        out["trivial_nonlinearity"] = _entry(zero, check="trivial_nonlinearity",
                                             notes="no h given; only b = sigma = 0 is certified")
        return out

    def osgood():
        v = osgood_classify(h, 1.0)
        return _entry(not v.finite, **{**v.to_dict(), "check": "osgood_infinite"})

    out["osgood_infinite"] = _guard("osgood_infinite", osgood)
    out["superlinear_ratio"] = _guard("superlinear_ratio", lambda: check_superlinear_ratio(h, alpha).to_dict())
    out["drift_envelope"] = _guard("drift_envelope", lambda: check_drift_envelope(b, h).to_dict())
    out["sigma_envelope"] = _guard("sigma_envelope", lambda: check_sigma_envelope(sigma, h, alpha).to_dict())
    out["noise_alpha"] = _guard("noise_alpha", lambda: noise_alpha_check(spectrum_of(cfg)).to_dict())
    out["alpha_consistent"] = _entry(alpha <= cfg.noise.alpha + 1e-12, check="alpha_consistent",
                                     value=alpha, notes=f"noise alpha {cfg.noise.alpha}")
    return out


def blowup_checks(cfg: RunConfig) -> dict:
    """Finite Osgood b, b(0) = 0, b nondecreasing and convex on u >= 0, sigma bounded with sigma(0) = 0."""
    b, sigma, _ = functions_of(cfg)
    out = {}

    def osgood():
        v = osgood_classify(b, 1.0)
        return _entry(v.finite, **{**v.to_dict(), "check": "osgood_finite"})

    out["osgood_finite"] = _guard("osgood_finite", osgood)
    out["b_zero_at_zero"] = _entry(float(b(0.0)) == 0.0, check="b_zero_at_zero", value=float(b(0.0)))
    x = np.linspace(0.0, 100.0, 20001)
    y = b(x)
    scale = max(float(np.max(np.abs(y))), 1.0)
    mono = bool(np.all(np.diff(y) >= -1e-12 * scale))
    conv = bool(np.all(np.diff(y, 2) >= -1e-9 * scale))
    out["b_monotone_convex"] = _entry(mono and conv, check="b_monotone_convex",
                                      notes=f"nondecreasing={mono}, convex={conv} on [0, 100]")
    s0 = float(sigma(0.0))
    out["sigma_zero_at_zero"] = _entry(s0 == 0.0, check="sigma_zero_at_zero", value=s0)
    sv = np.abs(sigma(_PROBE))
    inner = np.abs(_PROBE) <= 1e6
    sup_in, sup_all = float(np.max(sv[inner])), float(np.max(sv))
    bounded = np.all(np.isfinite(sv)) and sup_all <= sup_in * (1 + 1e-9) + 1e-300
    out["sigma_bounded"] = _entry(bounded, check="sigma_bounded", value=sup_all)
    return out


def all_hold(checks: dict) -> bool:
    return all(c["holds"] for c in checks.values())


def require(checks: dict, what: str):
    failed = [k for k, c in checks.items() if not c["holds"]]
    if failed:
        raise ConditionsFailed(f"{what} preconditions not certified: {', '.join(failed)}")


def sigma_sup(sigma) -> float:
    return float(np.max(np.abs(sigma(_PROBE))))
