"""Deterministic comparison ODE v' = b(v) and its Osgood blow-up time."""
import math
from dataclasses import dataclass

from scipy.integrate import quad

from ..catalog import ScalarFn
from ..conditions import osgood_classify
from ..errors import DomainError, NegativeDrift

V_CAP = 1e12


@dataclass(frozen=True)
class BlowupAt:
    t: float
    crosscheck: float
    kind: str = "BlowupAt"


@dataclass(frozen=True)
class SurvivedTo:
    horizon: float
    v_end: float
    crosscheck: float
    kind: str = "SurvivedTo"


def _b(b, v):
    x = float(b(v))
    if x < 0 or math.isnan(x):
        raise NegativeDrift(f"b({v:.6g}) = {x}")
    return x


def time_to_reach(b: ScalarFn, c: float, v: float) -> float:
    """int_c^v ds / b(s), in log coordinates."""
    if v <= c:
        return 0.0
    val, _ = quad(lambda s: math.exp(s) / _b(b, math.exp(s)), math.log(c), math.log(v),
                  epsabs=0.0, epsrel=1e-12, limit=500)
    return val


def ode_osgood_oracle(b: ScalarFn, c: float, horizon: float, rel_step: float = 1e-3):
    """Integrate v' = b(v), v(0) = c with RK4 and steps proportional to v / b(v).

    Once v passes V_CAP (or the next step is not finite) the remaining time to
    infinity is the Osgood tail int_v^inf ds / b(s). The result carries the
    relative gap between the integrated time and int_c^v ds / b(s).
    """
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if not horizon > 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    t, v = 0.0, float(c)
    floor = 1e-6 * horizon
    while t < horizon:
        bv = _b(b, v)
        if bv == 0:
            return SurvivedTo(horizon, v, 0.0)
        dt = min(max(rel_step * v / bv, floor), horizon - t)
        k1 = bv
        k2 = _b(b, v + 0.5 * dt * k1)
        k3 = _b(b, v + 0.5 * dt * k2)
        k4 = _b(b, v + dt * k3)
        v_new = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(v_new):
            break
        t, v = t + dt, v_new
        if v > V_CAP:
            break
    if t >= horizon and v <= V_CAP:
        ref = time_to_reach(b, c, v)
        return SurvivedTo(horizon, v, abs(t - ref) / max(ref, 1e-300))
    ref = time_to_reach(b, c, v)
    cross = abs(t - ref) / max(ref, 1e-300)
    tail = osgood_classify(b, v)
    if tail.finite and t + tail.value <= horizon:
        return BlowupAt(t + tail.value, cross)
    return SurvivedTo(horizon, v, cross)
