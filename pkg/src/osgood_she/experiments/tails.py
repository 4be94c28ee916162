"""Tail of sup_t ||Z(t)||_{V_p} for the stochastic convolution with a constant integrand."""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ..config import NonlinearityCfg, RunConfig, build_setup
from ..errors import InsufficientPaths
from ..solver import simulate_batch
from .montecarlo import path_batches, run_ordered, stream_id, wilson_interval

log = logging.getLogger(__name__)

MIN_EXCEED = 100
RECOMMENDED_PATHS = 10_000
AUTO_QUANTILES = np.linspace(0.5, 0.99, 12)


@dataclass
class TailCurve:
    deltas: np.ndarray
    tail_probs: np.ndarray
    intervals: np.ndarray
    exceedances: np.ndarray
    fit_mask: np.ndarray
    fitted_slope: float
    intercept: float
    r2: float
    curvature: float
    M_used: float
    T_used: float
    alpha_used: float
    n_paths: int

    @property
    def collapse_constant(self) -> float:
        """B M^2 T^alpha with B = -fitted_slope."""
        return -self.fitted_slope * self.M_used**2 * self.T_used**self.alpha_used

    def to_dict(self) -> dict:
        return {"M": self.M_used, "T": self.T_used, "alpha": self.alpha_used, "n_paths": self.n_paths,
                "fitted_slope": self.fitted_slope, "intercept": self.intercept, "r2": self.r2,
                "curvature": self.curvature, "collapse_constant": self.collapse_constant,
                "n_fit": int(self.fit_mask.sum())}

    def rows(self):
        for d, p, (lo, hi) in zip(self.deltas, self.tail_probs, self.intervals):
            yield float(d), float(p), float(lo), float(hi)


def integrand_level(M: float, p: float, L: float, d: int) -> float:
    """Constant c whose field on the torus [-L, L)^d has V_p norm exactly M."""
    return M / max(1.0, (2 * L) ** (d / p))


def tail_config(cfg: RunConfig, M: float, T: float) -> RunConfig:
    c = integrand_level(M, cfg.solver.p, cfg.lattice.L, cfg.lattice.d)
    nl = NonlinearityCfg(b="b.zero", sigma=f"sigma.const:{c!r}", h=None, alpha=cfg.nonlinearity.alpha)
    return replace(cfg, nonlinearity=nl, solver=replace(cfg.solver, T=T))


def _batch(task):
    cfg, seed, ids, sub_run = task
    setup = build_setup(cfg, u0=np.zeros((cfg.lattice.N,) * cfg.lattice.d), ladder=False,
                        trace_every=10**9)
    res = simulate_batch(setup, seed, [stream_id(sub_run, i) for i in ids], ids)
    return np.array([r.max_vp for r in res]), sum(r.exploded for r in res)


def sample_sup_norms(cfg: RunConfig, M: float, T: float, n_paths: int, seed: int, workers: int = 1,
                     sub_run: int = 0) -> np.ndarray:
    """sup_{t <= T} ||Z(t)||_{V_p} per path, ordered by path id."""
    tc = tail_config(cfg, M, T)
    tasks = [(tc, seed, ids, sub_run) for ids in path_batches(n_paths)]
    out = run_ordered(_batch, tasks, workers)
    return np.concatenate([o[0] for o in out])


def tail_curve(sups: np.ndarray, deltas, M: float, T: float, alpha: float) -> TailCurve:
    sups = np.asarray(sups)
    n = sups.size
    deltas = np.asarray(deltas, dtype=float)
    k = np.array([int(np.sum(sups > d)) for d in deltas])
    probs = k / n
    iv = np.array([wilson_interval(int(x), n) for x in k])
    mask = (k >= MIN_EXCEED) & (deltas > 0) & (k < n)
    nan = float("nan")
    slope = icpt = r2 = curv = nan
    if mask.sum() >= 2:
        x, y = deltas[mask] ** 2, np.log(probs[mask])
        slope, icpt = np.polyfit(x, y, 1)
        resid = y - (slope * x + icpt)
        ss = np.sum((y - y.mean()) ** 2)
        r2 = float(1 - np.sum(resid**2) / ss) if ss > 0 else nan
        if mask.sum() >= 3:
            curv = float(np.polyfit(x, y, 2)[0])
    return TailCurve(deltas, probs, iv, k, mask, float(slope), float(icpt), r2, curv, float(M), float(T),
                     float(alpha), n)


def auto_deltas(sups: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.quantile(sups, AUTO_QUANTILES)])


def run_tail_estimate(cfg: RunConfig, M: float = 1.0, T: float = None, delta_grid=None, n_paths: int = None,
                      seed: int = 0, workers: int = 1, sub_run: int = 0) -> TailCurve:
    """Estimate P(sup_{t <= T} ||Z(t)||_{V_p} > delta) and fit log P = A - B delta^2."""
    T = cfg.solver.T if T is None else T
    n = cfg.n_paths if n_paths is None else n_paths
    if n < RECOMMENDED_PATHS:
        log.warning("tail estimate with %d paths; at least %d are recommended", n, RECOMMENDED_PATHS)
    sups = sample_sup_norms(cfg, M, T, n, seed, workers, sub_run)
    deltas = auto_deltas(sups) if delta_grid is None else np.asarray(delta_grid, dtype=float)
    positive = deltas[deltas > 0]
    if positive.size and np.sum(sups > positive.min()) < MIN_EXCEED:
        raise InsufficientPaths(f"fewer than {MIN_EXCEED} exceedances at delta = {positive.min():.4g}")
    return tail_curve(sups, deltas, M, T, cfg.noise.alpha)


def rescaling_consistent(a: TailCurve, b: TailCurve, factor: float = 2.0) -> bool:
    """(delta, M) -> (factor delta, factor M): probabilities agree up to Wilson interval overlap.

    ``b`` must have been evaluated at factor times the deltas of ``a``.
    """
    if not np.allclose(b.deltas, factor * a.deltas, rtol=1e-12):
        raise ValueError("delta grids are not rescaled copies")
    return all(lo1 <= hi2 and lo2 <= hi1 for (lo1, hi1), (lo2, hi2) in zip(a.intervals, b.intervals))
