"""Moment growth for linear b and sigma, measured at the origin."""
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from ..config import InitialCfg, NonlinearityCfg, RunConfig, build_setup, spectrum_of
from ..errors import ExplodedField, InsufficientPaths
from ..lattice import Lattice
from ..noise import build_spectrum
from ..solver import ou_second_moment, second_moment_oracle, simulate_batch
from .montecarlo import path_batches, run_ordered, stream_id

MIN_PATHS = 30


@dataclass
class MomentReport:
    Lb: float
    Ls: float
    alpha: float
    c: float
    p_list: list
    t_grid: np.ndarray
    moments: np.ndarray        # (len(p_list), len(t_grid)): ||u(t, 0)||_p
    std_err: np.ndarray
    kappa: np.ndarray          # per p: max(p^{1/alpha} Ls^{2/alpha}, Lb)
    fitted_C: float
    exponents: np.ndarray      # per p: slope of log ||u||_p against t
    second_exact: np.ndarray   # exact second moment of the scheme on t_grid
    second_ou: np.ndarray      # first-order closed form on t_grid
    n_paths: int

    def bound_holds(self) -> bool:
        lhs = np.log(self.moments)
        rhs = math.log(self.fitted_C) + math.log(self.c) + self.fitted_C * self.t_grid[None, :] * self.kappa[:, None]
        return bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-12))

    def exponents_increasing(self) -> bool:
        return bool(np.all(np.diff(self.exponents) > 0))

    def to_dict(self) -> dict:
        return {"Lb": self.Lb, "Ls": self.Ls, "alpha": self.alpha, "c": self.c, "p_list": list(self.p_list),
                "t_grid": [float(t) for t in self.t_grid], "fitted_C": self.fitted_C,
                "exponents": [float(x) for x in self.exponents], "kappa": [float(x) for x in self.kappa],
                "moments": [[float(x) for x in row] for row in self.moments],
                "second_exact": [float(x) for x in self.second_exact],
                "second_ou": [float(x) for x in self.second_ou], "n_paths": self.n_paths,
                "bound_holds": self.bound_holds()}


def minimal_constant(y: np.ndarray, tk: np.ndarray) -> float:
    """Smallest C > 0 with log C + C tk >= y at every point (tk >= 0)."""
    best = 0.0
    for yi, ti in zip(np.ravel(y), np.ravel(tk)):
        if ti == 0:
            c = math.exp(yi)
        else:
            f = lambda c: math.log(c) + c * ti - yi  # noqa: E731
            lo, hi = 1e-300, 1.0
            while f(hi) < 0:
                hi *= 2
            c = brentq(f, lo, hi, xtol=1e-300, rtol=1e-14)
        best = max(best, c)
    return best


def moment_config(cfg: RunConfig, Lb: float, Ls: float, c: float, T: float) -> RunConfig:
    nl = NonlinearityCfg(b=f"b.linear:{Lb!r}", sigma=f"sigma.linear:{Ls!r}", h=None, alpha=cfg.nonlinearity.alpha)
    return replace(cfg, nonlinearity=nl, initial=InitialCfg(kind="constant", value=c),
                   solver=replace(cfg.solver, T=T))


def _batch(task):
    cfg, seed, ids, steps, sub_run = task
    setup = build_setup(cfg, ladder=False, probe_steps=tuple(steps), trace_every=10**9)
    res = simulate_batch(setup, seed, [stream_id(sub_run, i) for i in ids], ids)
    if any(r.exploded for r in res):
        raise ExplodedField("linear moment run exploded")
    return np.array([[r.probes[k] for k in steps] for r in res])


def run_moment_growth(cfg: RunConfig, Lb: float, Ls: float, p_list=(2, 4), t_grid=(0.25, 0.5, 0.75, 1.0),
                      n_paths: int = None, seed: int = 0, workers: int = 1, c: float = 1.0,
                      sub_run: int = 0) -> MomentReport:
    n = cfg.n_paths if n_paths is None else n_paths
    if n < MIN_PATHS:
        raise InsufficientPaths(f"need at least {MIN_PATHS} paths, got {n}")
    dt = cfg.solver.dt
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    steps = [int(round(t / dt)) for t in t_grid]
    mc = moment_config(cfg, Lb, Ls, c, float(t_grid[-1]))
    tasks = [(mc, seed, ids, steps, sub_run) for ids in path_batches(n)]
    vals = np.concatenate(run_ordered(_batch, tasks, workers))
    alpha = cfg.noise.alpha
    p_arr = np.asarray(p_list, dtype=float)
    absv = np.abs(vals)
    mom, se = [], []
    for p in p_arr:
        mp = np.mean(absv**p, axis=0)
        m = mp ** (1 / p)
        # delta method for the p-th root of a sample mean
        se.append(m / (p * mp) * np.std(absv**p, axis=0, ddof=1) / math.sqrt(n))
        mom.append(m)
    mom, se = np.array(mom), np.array(se)
    kappa = np.maximum(p_arr ** (1 / alpha) * Ls ** (2 / alpha), Lb)
    y = np.log(mom) - math.log(c)
    C = minimal_constant(y, t_grid[None, :] * kappa[:, None])
    tt = np.concatenate([[0.0], t_grid])
    expo = np.array([np.polyfit(tt, np.concatenate([[math.log(c)], np.log(row)]), 1)[0] for row in mom])
    lat = Lattice(cfg.lattice.d, cfg.lattice.L, cfg.lattice.N)
    spec = build_spectrum(spectrum_of(cfg), lat)
    exact = second_moment_oracle(lat, spec, c, Lb, Ls, dt, steps[-1], cfg.solver.nu, cfg.solver.symbol)[steps]
    ou = np.array([ou_second_moment(lat, spec, c, Ls, t, cfg.solver.nu, cfg.solver.symbol) for t in t_grid])
    return MomentReport(float(Lb), float(Ls), float(alpha), float(c), list(p_list), t_grid, mom, se, kappa,
                        float(C), expo, np.asarray(exact), ou, n)
