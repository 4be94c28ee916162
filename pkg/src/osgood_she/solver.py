"""Exponential-Euler time stepping of the mild equation with the 3^n cutoff ladder.

One step maps u to S_dt[u + dt*b_n(u) + sigma_n(u)*dW], where b_n, sigma_n are
b, sigma frozen outside [-3^n, 3^n]. The level n is raised each time the V_p
norm first exceeds 3^n, and the crossing time is recorded as tau_n.

The core works on a batch of paths at once; every path draws its noise from
its own counter-based stream, so a path's result does not depend on which
batch it ran in.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .catalog import ScalarFn
from .errors import ConfigError, DomainError, ExplodedField
from .field import GridField, apply_multiplier, boundary_mass, heat_multiplier, lattice_symbol, norms_array
from .lattice import Lattice
from .noise import NoiseIncrement, NoiseStream, SpectralWeights, _full_weights, synthesize

log = logging.getLogger(__name__)

EXPLODE_THRESH = 1e12
LOWEST_LEVEL = -30


@dataclass(frozen=True)
class CutoffFn:
    """base(u) for |u| <= 3^n, frozen at base(+-3^n) outside."""

    base: ScalarFn
    n: int

    @property
    def level(self) -> float:
        return 3.0**self.n

    def __call__(self, u):
        return self.base(np.clip(u, -self.level, self.level))

    def lipschitz(self, samples: int = 4001) -> float:
        """Max slope of the base on [-3^n, 3^n] by dense sampling."""
        x = np.linspace(-self.level, self.level, samples)
        y = self.base(x)
        return float(np.max(np.abs(np.diff(y)) / np.diff(x)))


def make_cutoff(g: ScalarFn, n: int) -> CutoffFn:
    return CutoffFn(g, int(n))


def mild_step(u: GridField, dt: float, b, sigma, dW: NoiseIncrement, nu: float = 0.5,
              order: str = "inside", symbol: str = "lattice") -> GridField:
    """One exponential-Euler step.

    ``order="inside"``: S_dt[u + dt b(u) + sigma(u) dW].
    ``order="separate"``: S_dt u + S_dt[dt b(u) + sigma(u) dW].
    """
    lat = u.lattice
    if dW.field.lattice != lat:
        raise DomainError("noise increment lives on a different lattice")
    if not math.isclose(dW.dt, dt, rel_tol=1e-12):
        raise DomainError(f"increment dt {dW.dt} != step dt {dt}")
    v = u.values
    mult = heat_multiplier(lat, dt, nu, symbol)
    with np.errstate(over="ignore", invalid="ignore"):
        forcing = dt * b(v) + sigma(v) * dW.field.values
        if order == "inside":
            out = apply_multiplier(v + forcing, mult, lat)
        elif order == "separate":
            out = apply_multiplier(v, mult, lat) + apply_multiplier(forcing, mult, lat)
        else:
            raise DomainError(f"unknown order {order!r}")
    if not np.all(np.isfinite(out)):
        raise ExplodedField("mild step produced non-finite values")
    return GridField(lat, out)


def tripling_sequence(h: ScalarFn, theta: float, n: int) -> float:
    """a_n = min(theta 3^{n+1} / h(3^{n+1}), 1/n)."""
    if not 0 < theta < 1 / 3:
        raise DomainError(f"theta must lie in (0, 1/3), got {theta}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    u = 3.0 ** (n + 1)
    hv = float(h(u))
    if not hv > 0:
        raise DomainError(f"h(3^{n + 1}) = {hv} is not positive")
    return min(theta * u / hv, 1.0 / n)


@dataclass
class LadderState:
    theta: float
    n_start: int
    n_current: int
    tau: list = field(default_factory=list)
    a_seq: list = field(default_factory=list)
    tripling_shortfalls: list = field(default_factory=list)


@dataclass
class PathResult:
    path_id: int
    seed: int
    stream: int
    exploded: bool
    t_explode: Optional[float]
    final_time: float
    norm_trace: np.ndarray
    ladder: LadderState
    boundary_mass_diag: float
    max_vp: float
    min_value: float
    stability_bound: float
    dt: float
    level_gap: float
    probes: dict = field(default_factory=dict)

    def summary_row(self) -> dict:
        return {"path_id": self.path_id, "seed": self.seed, "exploded": int(self.exploded),
                "t_explode": "" if self.t_explode is None else repr(float(self.t_explode)),
                "max_vp": repr(float(self.max_vp))}


@dataclass
class RunSetup:
    """Everything a path needs besides its seed and stream."""

    lattice: Lattice
    spectrum: SpectralWeights
    b: ScalarFn
    sigma: ScalarFn
    u0: np.ndarray
    dt: float
    T: float
    h: Optional[ScalarFn] = None
    nu: float = 0.5
    theta: float = 0.3
    p: float = 2.0
    explode_thresh: float = EXPLODE_THRESH
    order: str = "inside"
    symbol: str = "lattice"
    ladder: bool = True
    fixed_level: Optional[int] = None
    trace_every: Optional[int] = None
    probe_steps: tuple = ()
    observer: Optional[Callable] = None
    chunk: int = 256

    def __post_init__(self):
        if self.spectrum.lattice != self.lattice:
            raise ConfigError("noise", "spectrum lattice differs from run lattice")
        self.u0 = np.asarray(self.u0, dtype=float)
        if self.u0.shape != self.lattice.shape:
            raise ConfigError("initial", f"u0 shape {self.u0.shape} != lattice shape {self.lattice.shape}")
        if not np.all(np.isfinite(self.u0)):
            raise ConfigError("initial", "u0 has non-finite values")
        if not (self.dt > 0 and self.T > 0):
            raise ConfigError("solver.dt", "dt and T must be positive")
        if self.order not in ("inside", "separate"):
            raise ConfigError("solver.order", f"unknown order {self.order!r}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9))


def start_level(vp: float) -> int:
    """Smallest n with vp <= 3^n (bounded below by LOWEST_LEVEL)."""
    if vp <= 3.0**LOWEST_LEVEL:
        return LOWEST_LEVEL
    n = int(math.ceil(math.log(vp, 3)))
    while 3.0**n < vp:
        n += 1
    while n - 1 >= LOWEST_LEVEL and 3.0 ** (n - 1) >= vp:
        n -= 1
    return n


def stability_bound(b: ScalarFn, n: int) -> float:
    """min(1, 1/L_loc) with L_loc the max slope of b on [-3^n, 3^n]."""
    lip = make_cutoff(b, n).lipschitz()
    return min(1.0, 1.0 / lip) if lip > 0 else 1.0


def simulate_batch(setup: RunSetup, seed: int, streams, path_ids=None) -> list:
    """Run one path per stream id; returns PathResults in input order."""
    lat = setup.lattice
    shape = lat.shape
    B = len(streams)
    path_ids = list(streams) if path_ids is None else list(path_ids)
    dt, p, thresh = setup.dt, setup.p, setup.explode_thresh
    n_steps = setup.n_steps
    mult = heat_multiplier(lat, dt, setup.nu, setup.symbol)
    rngs = [NoiseStream(seed, s, lat.n_cells) for s in streams]
    expand = (slice(None),) + (None,) * lat.d
    trace_every = setup.trace_every or max(1, n_steps // 500)
    probe_steps = set(int(k) for k in setup.probe_steps)

    u = np.broadcast_to(setup.u0, (B,) + shape).copy()
    lp, linf = norms_array(u, p, lat)
    vp = np.maximum(lp, linf)
    n0 = np.array([start_level(v) for v in vp])
    track_n = n0.copy()
    cut_n = np.full(B, setup.fixed_level) if setup.fixed_level is not None else track_n
    use_cut = setup.ladder or setup.fixed_level is not None

    taus = [[] for _ in range(B)]
    exploded = np.zeros(B, bool)
    t_exp = np.full(B, np.nan)
    final_time = np.full(B, n_steps * dt)
    max_vp = vp.copy()
    min_val = u.reshape(B, -1).min(axis=1)
    bmass = boundary_mass(u, p, lat)
    traces = [[(0.0, float(lp[i]), float(linf[i]), float(vp[i]))] for i in range(B)]
    probes = [{} for _ in range(B)]
    if 0 in probe_steps:
        for i in range(B):
            probes[i][0] = float(u[(i,) + lat.origin])

    idx = np.arange(B)
    noise = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(n_steps):
            if idx.size == 0:
                break
            t = k * dt
            j = k % setup.chunk
            if j == 0:
                cnt = min(setup.chunk, n_steps - k)
                eps = np.stack([rngs[i].normals(k, cnt) for i in idx], axis=1)
                noise = synthesize(eps.reshape((cnt, idx.size) + shape), setup.spectrum, dt)
            dW = noise[j]
            if use_cut:
                lev = (3.0 ** cut_n[idx])[expand]
                uc = np.clip(u, -lev, lev)
            else:
                uc = u
            drift = setup.b(uc)
            kick = setup.sigma(uc) * dW
            if setup.observer is not None:
                setup.observer(k, t, idx, u, drift, kick)
            if setup.order == "inside":
                u_new = apply_multiplier(u + dt * drift + kick, mult, lat)
            else:
                u_new = apply_multiplier(u, mult, lat) + apply_multiplier(dt * drift + kick, mult, lat)
            lp, linf = norms_array(u_new, p, lat)
            vp_new = np.maximum(lp, linf)
            finite = np.isfinite(vp_new)
            t1 = t + dt

            levels = 3.0 ** track_n[idx]
            for r in np.nonzero(finite & (vp_new > levels))[0]:
                i = idx[r]
                while vp_new[r] > 3.0 ** track_n[i] and 3.0 ** track_n[i] <= thresh:
                    lev_v = 3.0 ** track_n[i]
                    frac = (lev_v - vp[r]) / (vp_new[r] - vp[r]) if vp_new[r] > vp[r] else 1.0
                    taus[i].append((int(track_n[i]), float(t + dt * min(max(frac, 0.0), 1.0))))
                    track_n[i] += 1

            boom = ~finite | (vp_new > thresh)
            max_vp[idx[finite]] = np.maximum(max_vp[idx[finite]], vp_new[finite])
            mins = u_new.reshape(idx.size, -1).min(axis=1)
            min_val[idx] = np.minimum(min_val[idx], np.where(np.isfinite(mins), mins, min_val[idx]))

            record = ((k + 1) % trace_every == 0) or (k + 1 == n_steps)
            if record or np.any(boom):
                bm = boundary_mass(u_new, p, lat)
                for r in range(idx.size):
                    if record or boom[r]:
                        i = idx[r]
                        traces[i].append((t1, float(lp[r]), float(linf[r]), float(vp_new[r])))
                        if np.isfinite(bm[r]):
                            bmass[i] = max(bmass[i], bm[r])
            if (k + 1) in probe_steps:
                for r in range(idx.size):
                    probes[idx[r]][k + 1] = float(u_new[(r,) + lat.origin])

            if np.any(boom):
                for r in np.nonzero(boom)[0]:
                    i = idx[r]
                    exploded[i] = True
                    if finite[r] and vp_new[r] > vp[r]:
                        frac = (thresh - vp[r]) / (vp_new[r] - vp[r])
                        t_exp[i] = t + dt * min(max(frac, 0.0), 1.0)
                    else:
                        t_exp[i] = t1
                    final_time[i] = t1
                keep = ~boom
                idx, u, vp = idx[keep], u_new[keep], vp_new[keep]
                noise = noise[:, keep]
            else:
                u, vp = u_new, vp_new

    results = []
    for i in range(B):
        top = int(max(track_n[i], cut_n[i]) if use_cut else track_n[i])
        gap = math.log10(thresh) - top * math.log10(3.0)
        if exploded[i]:
            log.debug("path %s exploded at t=%.6g; top level 3^%d, threshold gap %.2f decades",
                      path_ids[i], t_exp[i], top, gap)
        ladder = _ladder_record(setup, n0[i], track_n[i], taus[i], bool(exploded[i]),
                                t_exp[i], final_time[i])
        bound = stability_bound(setup.b, top) if use_cut else 1.0
        results.append(PathResult(
            path_id=int(path_ids[i]), seed=int(seed), stream=int(streams[i]), exploded=bool(exploded[i]),
            t_explode=float(t_exp[i]) if exploded[i] else None, final_time=float(final_time[i]),
            norm_trace=np.array(traces[i]), ladder=ladder, boundary_mass_diag=float(bmass[i]),
            max_vp=float(max_vp[i]), min_value=float(min_val[i]), stability_bound=bound, dt=dt,
            level_gap=gap, probes=probes[i]))
    return results


def _ladder_record(setup, n0, n_cur, taus, exploded, t_exp, final_time) -> LadderState:
    st = LadderState(theta=setup.theta, n_start=int(n0), n_current=int(n_cur), tau=list(taus))
    if setup.h is None or not 0 < setup.theta < 1 / 3:
        return st
    times = dict(taus)
    for n in range(max(1, int(n0)), int(n_cur) + 1):
        a_n = tripling_sequence(setup.h, setup.theta, n)
        st.a_seq.append((n, a_n))
        if n not in times:
            continue
        if n + 1 in times:
            short = bool(times[n + 1] - times[n] < a_n)
        elif exploded and t_exp - times[n] < a_n:
            short = True
        elif not exploded and final_time - times[n] >= a_n:
            short = False
        else:
            short = None
        st.tripling_shortfalls.append((n, short))
    return st


def run_localized(setup: RunSetup, seed: int, stream: int = 0) -> PathResult:
    """Single localized path driven by NoiseStream(seed, stream)."""
    return simulate_batch(setup, seed, [stream])[0]


def second_moment_oracle(lat: Lattice, spec: SpectralWeights, c: float, Lb: float, Ls: float,
                         dt: float, n_steps: int, nu: float = 0.5, symbol: str = "lattice") -> np.ndarray:
    """Exact E[u_k(x)^2], k = 0..n_steps, of the scheme with b = Lb u, sigma = Ls u, u_0 = c.

    The state stays spatially homogeneous in law, so its two-point function
    G(r) = E[u(x) u(x + r)] obeys G <- S_{2 dt}[G ((1 + Lb dt)^2 + Ls^2 Cov_dW(r))].
    """
    mult2 = heat_multiplier(lat, dt, nu, symbol) ** 2
    cov = spec.covariance(dt)
    G = np.full(lat.shape, float(c) ** 2)
    factor = (1 + Lb * dt) ** 2 + Ls**2 * cov
    out = [G[(0,) * lat.d]]
    for _ in range(n_steps):
        G = apply_multiplier(G * factor, mult2, lat)
        out.append(G[(0,) * lat.d])
    return np.array(out)


def ou_second_moment(lat: Lattice, spec: SpectralWeights, c: float, Ls: float, t: float,
                     nu: float = 0.5, symbol: str = "lattice") -> float:
    """First-order-in-Ls^2 second moment c^2 (1 + Ls^2 sum_k w_k (1 - e^{-2 lam_k t}) / (2 lam_k))."""
    lam = lattice_symbol(lat, nu, symbol, layout="full")
    w = _full_weights(spec) / lat.cell_volume / lat.n_cells
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(lam > 0, -np.expm1(-2 * lam * t) / (2 * lam), t)
    return float(c**2 * (1 + Ls**2 * np.sum(w * phi)))
