"""Blow-up experiment: u_0 = Theta p_1 with a finite-Osgood drift and bounded sigma.

Along each path we track Y_t = <u(t), p_{1-t}> together with its drift part
D_t and noise part M_t. The discrete weights are w_k = S_{1-t_k} delta / dx^d,
so Y_{k+1} = Y_k + dD_k + dM_k holds exactly for the exponential-Euler step.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..conditions import noise_g, osgood_classify
from ..config import RunConfig, build_setup, functions_of, spectrum_of
from ..errors import DomainError
from ..field import apply_multiplier, heat_multiplier
from ..lattice import Lattice
from ..solver import simulate_batch
from .montecarlo import McSummary, intervals_overlap, path_batches, run_ordered, summarize
from .ode import ode_osgood_oracle
from .preconditions import blowup_checks, require, sigma_sup

THETA_FACTORS = (0.1, 0.3, 1.0, 3.0, 10.0)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


@dataclass
class BlowupTrace:
    path_id: int
    theta: float
    Y: np.ndarray
    D: np.ndarray
    M: np.ndarray
    L_target: float = float("nan")


@dataclass
class PathFunctional:
    """Per-path summary of the Y = Y_0 + D + M decomposition."""

    path_id: int
    m_final: float
    m_star_inf: float
    y_min: float
    identity_gap: float


@dataclass
class BlowupRun:
    theta: float
    x0: float
    ode_time: float
    summary: McSummary
    functionals: list
    traces: list = field(default_factory=list)
    results: list = field(default_factory=list)

    @property
    def martingale(self):
        m = np.array([f.m_final for f in self.functionals])
        se = m.std(ddof=1) / math.sqrt(m.size) if m.size > 1 else float("inf")
        return float(m.mean()), float(se)


@dataclass
class BlowupResult:
    onset: float
    eps_y: float
    runs: list
    checks: dict
    c_f: float
    sigma_sup: float


def onset_x0(b, eps_y: float) -> float:
    """X_0 with int_{X_0}^inf ds / b(s) = 1 - eps_y."""
    target = 1.0 - eps_y

    def f(logx):
        return osgood_classify(b, math.exp(logx)).value - target

    lo, hi = 0.0, 0.0
    while f(lo) < 0:
        lo -= 2.0
    while f(hi) > 0:
        hi += 2.0
    return math.exp(brentq(f, lo, hi, xtol=1e-12, rtol=1e-12))


def onset_theta(b, d: int, eps_y: float) -> float:
    """Smallest Theta whose Jensen comparison X' = b(X), X_0 = Theta (4 pi)^{-d/2} blows up by 1 - eps_y."""
    return (4 * math.pi) ** (d / 2) * onset_x0(b, eps_y)


def doob_constant(spectrum, nu: float = 0.5) -> float:
    """C_f = int_{1/2}^1 (2 pi)^{-d} g(2 nu (1 - s)) ds, with g(s) = int e^{-s|xi|^2} f-hat.

    Substituting 1 - s = v^2 removes the s^{-1/2}-type endpoint singularity.
    """
    vmax = math.sqrt(0.5)
    v = 0.5 * vmax * (_GL_X + 1)
    g = noise_g(spectrum, 2 * nu * v * v)
    return float(0.5 * vmax * np.sum(_GL_W * 2 * v * g) / (2 * math.pi) ** spectrum.d)


def heat_weights(lat: Lattice, t: float, nu: float = 0.5, symbol: str = "lattice") -> np.ndarray:
    """S_t delta_0 / dx^d on the lattice (discrete p_t centred at the origin)."""
    delta = np.zeros(lat.shape)
    delta[lat.origin] = 1.0 / lat.cell_volume
    return apply_multiplier(delta, heat_multiplier(lat, t, nu, symbol), lat)


class _YdmObserver:
    def __init__(self, lat, nu, symbol, n_steps, dt, B):
        self.lat, self.nu, self.symbol, self.dt = lat, nu, symbol, dt
        self.Y = np.full((B, n_steps + 1), np.nan)
        self.dD = np.full((B, n_steps), np.nan)
        self.dM = np.full((B, n_steps), np.nan)

    def __call__(self, k, t, idx, u, drift, kick):
        lat = self.lat
        w = heat_weights(lat, 1.0 - t, self.nu, self.symbol) * lat.cell_volume
        ax = lat.axes
        self.Y[idx, k] = np.sum(u * w, axis=ax)
        self.dD[idx, k] = self.dt * np.sum(drift * w, axis=ax)
        self.dM[idx, k] = np.sum(kick * w, axis=ax)


def _batch(task):
    cfg, seed, ids, theta, T, n_trace = task
    setup = build_setup(cfg, T=T, ladder=False)
    lat = setup.lattice
    setup.u0 = theta * heat_weights(lat, 1.0, setup.nu, setup.symbol)
    obs = _YdmObserver(lat, setup.nu, setup.symbol, setup.n_steps, setup.dt, len(ids))
    setup.observer = obs
    results = simulate_batch(setup, seed, list(ids), ids)
    half = int(round(0.5 / setup.dt))
    funcs, traces = [], []
    for r, res in enumerate(results):
        dD, dM = obs.dD[r], obs.dM[r]
        ok = ~np.isnan(dM)
        n_ok = int(ok.sum())
        D = np.concatenate([[0.0], np.cumsum(dD[:n_ok])])
        M = np.concatenate([[0.0], np.cumsum(dM[:n_ok])])
        Y = obs.Y[r, : n_ok + 1].copy()
        y_end = Y[0] + D[-1] + M[-1]
        if not res.exploded:
            Y[n_ok] = y_end
        else:
            Y = Y[:n_ok]
        ref = Y[0] + D[: Y.size] + M[: Y.size]
        scale = max(float(np.nanmax(np.abs(Y))), 1e-300)
        gap = float(np.nanmax(np.abs(Y - ref)) / scale) if Y.size > 1 else 0.0
        tail = M[half:] - M[half] if M.size > half else np.zeros(1)
        funcs.append(PathFunctional(res.path_id, float(M[-1]), float(tail.min()),
                                    float(np.nanmin(Y)), gap))
        if res.path_id < n_trace:
            traces.append(BlowupTrace(res.path_id, theta, Y, D, M))
    return results, funcs, traces


def run_blowup(cfg: RunConfig, thetas=None, n_paths: int = None, seed: int = 0, workers: int = 1,
               certify: bool = True, n_trace: int = 3) -> BlowupResult:
    """Explosion fraction against Theta; all Theta values share the same noise streams."""
    checks = blowup_checks(cfg)
    if certify:
        require(checks, "blow-up")
    b, sigma, _ = functions_of(cfg)
    dt = cfg.solver.dt
    eps_y = 4 * dt
    T = 1.0 - eps_y
    d = cfg.lattice.d
    onset = onset_theta(b, d, eps_y)
    if thetas is None:
        thetas = [f * onset for f in THETA_FACTORS]
    if any(not th > 0 for th in thetas):
        raise DomainError("Theta values must be positive")
    n = cfg.n_paths if n_paths is None else n_paths
    runs = []
    for theta in thetas:
        tasks = [(cfg, seed, ids, float(theta), T, n_trace) for ids in path_batches(n)]
        out = run_ordered(_batch, tasks, workers)
        results = [r for o in out for r in o[0]]
        funcs = [f for o in out for f in o[1]]
        traces = [t for o in out for t in o[2]]
        x0 = theta * (4 * math.pi) ** (-d / 2)
        ode = ode_osgood_oracle(b, x0, T)
        ode_t = ode.t if ode.kind == "BlowupAt" else float("inf")
        runs.append(BlowupRun(float(theta), x0, ode_t, summarize(results), funcs, traces, results))
    return BlowupResult(onset, eps_y, runs, checks, doob_constant(spectrum_of(cfg), cfg.solver.nu),
                        sigma_sup(sigma))


def monotone_in_theta(runs) -> bool:
    """Explosion fraction nondecreasing in Theta up to Wilson interval overlap."""
    runs = sorted(runs, key=lambda r: r.theta)
    for a, b in zip(runs, runs[1:]):
        fa, fb = a.summary.explosion_fraction, b.summary.explosion_fraction
        if fb < fa and not intervals_overlap(a.summary.interval, b.summary.interval):
            return False
    return True


def doob_bound(L: float, c_f: float, s_sup: float) -> float:
    return math.exp(-L * L / (2 * c_f * s_sup * s_sup))


def doob_check(run: BlowupRun, c_f: float, s_sup: float, levels=None, slack: float = 0.5) -> list:
    """Empirical P(inf_{t in [1/2, 1]} M*_t <= -L) against the Gaussian martingale bound."""
    m = np.array([f.m_star_inf for f in run.functionals])
    if levels is None:
        levels = [math.sqrt(2 * c_f * s_sup**2 * math.log(1 / q)) for q in (0.5, 0.2, 0.05)]
    rows = []
    for L in levels:
        emp = float(np.mean(m <= -L))
        bound = doob_bound(L, c_f, s_sup)
        rows.append({"L": float(L), "empirical": emp, "bound": bound, "holds": emp <= bound * (1 + slack)})
    return rows
