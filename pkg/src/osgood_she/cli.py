"""Command-line entry point: validate a config, run one experiment, persist results atomically."""
import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import secrets
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .conditions import (check_drift_envelope, check_sigma_envelope, check_superlinear_ratio,
                         noise_alpha_check, osgood_classify)
from .errors import (ConditionsFailed, ConfigError, DomainError, ExplodedField, InsufficientPaths, IoError,
                     OsgoodSheError)
from .experiments import blowup as bl
from .experiments import global_existence as ge
from .experiments import moments as mo
from .experiments import tails as tl
from .experiments.montecarlo import summarize
from .experiments.ode import ode_osgood_oracle
from .experiments.preconditions import all_hold, blowup_checks, global_checks

log = logging.getLogger("osgood_she")

SCHEMA_VERSION = 1
SEED_ENV = "OSGOOD_SHE_SEED"
EXIT_OK, EXIT_IO, EXIT_REFUSED, EXIT_EXPLODED = 0, 1, 2, 3

_PARAMS = {
    "check": (),
    "simulate": (),
    "global": (),
    "blowup": ("thetas", "theta_factors", "n_trace"),
    "tails": ("M", "deltas", "rescale"),
    "moments": ("Lb", "Ls", "p_list", "t_grid", "c"),
    "ode": ("c", "horizon"),
}


# ---------------------------------------------------------------- output helpers

def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def _num(x):
    """Floats as repr strings so CSV bytes do not depend on locale or formatting width."""
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(x) for x in r])
    return buf.getvalue()


def atomic_write(path: Path, text: str):
    """Write to a .partial sibling, then rename over the target."""
    tmp = path.with_name(path.name + ".partial")
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as e:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise IoError(f"cannot write {path}: {e}") from None


def prepare_output(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
        for stale in out.glob("*.partial"):
            stale.unlink()
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise IoError(f"output directory {out} is not writable: {e}") from None
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------- validation

def _report_entry(fn):
    try:
        return fn()
    except OsgoodSheError as e:
        return {"holds": False, "error": f"{type(e).__name__}: {e}"}


def condition_checks(cfg) -> dict:
    """The five conditions-module checks that apply to the configured functions."""
    b, sigma, h = cfgmod.functions_of(cfg)
    alpha = cfg.nonlinearity.alpha
    out = {"noise_alpha": _report_entry(lambda: noise_alpha_check(cfgmod.spectrum_of(cfg)).to_dict())}
    if h is not None:
        def osg():
            v = osgood_classify(h, 1.0)
            return {"holds": not v.finite, **v.to_dict()}
        out["osgood_infinite"] = _report_entry(osg)
        out["superlinear_ratio"] = _report_entry(lambda: check_superlinear_ratio(h, alpha).to_dict())
        out["drift_envelope"] = _report_entry(lambda: check_drift_envelope(b, h).to_dict())
        out["sigma_envelope"] = _report_entry(lambda: check_sigma_envelope(sigma, h, alpha).to_dict())
    return out


def validate(cfg, experiment: str = None) -> dict:
    """Run the precondition checks for an experiment and sign the report.

    The signature is the sha256 of the canonical JSON of everything else in the report.
    """
    experiment = experiment or cfg.experiment
    if experiment == "global":
        checks = global_checks(cfg)
    elif experiment == "blowup":
        checks = blowup_checks(cfg)
    else:
        checks = condition_checks(cfg)
    gating = experiment in ("global", "blowup")
    body = {"schema_version": SCHEMA_VERSION, "experiment": experiment,
            "checks": _jsonable(checks), "certified": all_hold(checks), "gating": gating}
    body["signature"] = hashlib.sha256(canonical(body).encode()).hexdigest()
    return body


def resolve_seed(cli_seed, cfg_seed):
    """CLI flag, then $OSGOOD_SHE_SEED, then the config, then a fresh draw (recorded)."""
    if cli_seed is not None:
        return int(cli_seed), "cli"
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            v = int(env)
        except ValueError:
            raise ConfigError("seed", f"{SEED_ENV}={env!r} is not an integer") from None
        if not 0 <= v < 2**63:
            raise ConfigError("seed", f"{SEED_ENV} must lie in [0, 2^63)")
        return v, "env"
    if cfg_seed is not None:
        return int(cfg_seed), "config"
    return secrets.randbits(63), "drawn"


def _check_params(cfg, experiment):
    allowed = _PARAMS[experiment]
    for k in cfg.params:
        if k not in allowed:
            raise ConfigError(f"params.{k}", f"unknown field for experiment {experiment!r}")


# ---------------------------------------------------------------- experiments

def _header(cfg, experiment, seed, seed_source, report):
    conf = cfg.to_dict()
    conf.pop("workers", None)
    conf.pop("output_dir", None)
    return {"schema_version": SCHEMA_VERSION, "experiment": experiment, "seed": seed,
            "seed_source": seed_source, "config": conf, "validation": report}


def _paths_rows(results):
    return [(r.path_id, r.seed, r.exploded, "" if r.t_explode is None else float(r.t_explode), float(r.max_vp))
            for r in results]


PATHS_HEADER = ("path_id", "seed", "exploded", "t_explode", "max_vp")

GP_TRACE = """set datafile separator ','
set key autotitle columnhead
set xlabel 't'
set ylabel 'V_p norm'
set logscale y
plot 'trace.csv' using 1:2 with lines title 'mean', '' using 1:3 with lines title 'max'
"""


def _trace_rows(summary):
    return [(float(t), float(m), float(x)) for t, m, x in zip(summary.times, summary.mean_vp, summary.max_vp)]


def run_simulate(cfg, seed, workers, files, head):
    results = ge.simulate_paths(cfg, cfg.n_paths, seed, workers)
    s = summarize(results)
    files["paths.csv"] = csv_text(PATHS_HEADER, _paths_rows(results))
    files["trace.csv"] = csv_text(("t", "mean_vp", "max_vp"), _trace_rows(s))
    files["plot.gp"] = GP_TRACE
    head["summary"] = s.to_dict()
    return EXIT_OK, f"simulate: {s.exploded_count}/{s.n_paths} paths exploded"


def run_global(cfg, seed, workers, files, head):
    res = ge.run_global_existence(cfg, cfg.n_paths, seed, workers, certify=False)
    s = res.summary
    files["paths.csv"] = csv_text(PATHS_HEADER, _paths_rows(res.results))
    files["trace.csv"] = csv_text(("t", "mean_vp", "max_vp"), _trace_rows(s))
    files["stopping.csv"] = csv_text(("n", "a_n", "eligible", "shortfalls", "censored", "frequency", "lo", "hi"),
                                     [tuple(r.to_dict().values()) for r in res.table])
    files["plot.gp"] = GP_TRACE + ("pause -1\nunset logscale y\nset xlabel 'n'\nset ylabel 'shortfall frequency'\n"
                                   "plot 'stopping.csv' using 1:6:7:8 with yerrorbars title 'shortfall'\n")
    head["summary"] = s.to_dict()
    head["stopping_table"] = [r.to_dict() for r in res.table]
    head["shortfall_trend_ok"] = ge.shortfall_trend_ok(res.table)
    code = EXIT_EXPLODED if s.exploded_count else EXIT_OK
    return code, f"global: {s.exploded_count}/{s.n_paths} paths exploded"


def run_blowup(cfg, seed, workers, files, head):
    p = cfg.params
    thetas = p.get("thetas")
    b, _, _ = cfgmod.functions_of(cfg)
    if thetas is None and "theta_factors" in p:
        onset = bl.onset_theta(b, cfg.lattice.d, 4 * cfg.solver.dt)
        thetas = [f * onset for f in p["theta_factors"]]
    res = bl.run_blowup(cfg, thetas, cfg.n_paths, seed, workers, certify=False, n_trace=int(p.get("n_trace", 3)))
    rows, trace_rows, runs = [], [], []
    for j, r in enumerate(res.runs):
        s = r.summary
        mean, se = r.martingale
        rows.append((r.theta, r.x0, r.ode_time, s.n_paths, s.exploded_count, s.explosion_fraction,
                     s.interval[0], s.interval[1], mean, se))
        files[f"paths_theta{j}.csv"] = csv_text(PATHS_HEADER, _paths_rows(r.results))
        stride = max(1, (r.traces[0].Y.size if r.traces else 1) // 500)
        for tr in r.traces:
            for k in range(0, tr.Y.size, stride):
                trace_rows.append((r.theta, tr.path_id, k * cfg.solver.dt, tr.Y[k], tr.D[k], tr.M[k]))
        runs.append({"theta": r.theta, "x0": r.x0, "ode_blowup_time": r.ode_time, "summary": s.to_dict(),
                     "martingale_mean": mean, "martingale_se": se,
                     "y_min": min(f.y_min for f in r.functionals),
                     "identity_gap": max(f.identity_gap for f in r.functionals),
                     "doob": bl.doob_check(r, res.c_f, res.sigma_sup)})
    files["blowup.csv"] = csv_text(("theta", "x0", "ode_time", "n_paths", "exploded", "fraction", "lo", "hi",
                                    "martingale_mean", "martingale_se"), rows)
    files["trace.csv"] = csv_text(("theta", "path_id", "t", "Y", "D", "M"), trace_rows)
    files["plot.gp"] = ("set datafile separator ','\nset key autotitle columnhead\nset logscale x\n"
                        "set xlabel 'Theta'\nset ylabel 'explosion fraction'\n"
                        "plot 'blowup.csv' using 1:6:7:8 with yerrorbars title 'fraction'\n")
    head.update({"onset_theta": res.onset, "eps_y": res.eps_y, "c_f": res.c_f, "sigma_sup": res.sigma_sup,
                 "runs": runs, "monotone_in_theta": bl.monotone_in_theta(res.runs)})
    frac = ", ".join(f"{r.theta:.3g}:{r.summary.explosion_fraction:.2f}" for r in res.runs)
    return EXIT_OK, f"blowup: explosion fraction by Theta {frac}"


def run_tails(cfg, seed, workers, files, head):
    p = cfg.params
    M = float(p.get("M", 1.0))
    deltas = p.get("deltas")
    curve = tl.run_tail_estimate(cfg, M, cfg.solver.T, deltas, cfg.n_paths, seed, workers)
    files["tail.csv"] = csv_text(("delta", "prob", "lo", "hi"), curve.rows())
    head["tail"] = curve.to_dict()
    if p.get("rescale", False):
        c2 = tl.run_tail_estimate(cfg, 2 * M, cfg.solver.T, 2 * curve.deltas, cfg.n_paths, seed, workers, sub_run=1)
        files["tail_rescaled.csv"] = csv_text(("delta", "prob", "lo", "hi"), c2.rows())
        head["tail_rescaled"] = c2.to_dict()
        head["rescaling_consistent"] = tl.rescaling_consistent(curve, c2)
    files["plot.gp"] = ("set datafile separator ','\nset key autotitle columnhead\nset logscale y\n"
                        "set xlabel 'delta^2'\nset ylabel 'P(sup > delta)'\n"
                        "plot 'tail.csv' using ($1**2):2:3:4 with yerrorbars title 'tail'\n")
    return EXIT_OK, f"tails: slope {curve.fitted_slope:.4g}, R^2 {curve.r2:.4f}"


def run_moments(cfg, seed, workers, files, head):
    p = cfg.params
    rep = mo.run_moment_growth(cfg, float(p.get("Lb", 0.0)), float(p.get("Ls", 0.0)),
                               tuple(p.get("p_list", (2, 4))), tuple(p.get("t_grid", (0.25, 0.5, 0.75, 1.0))),
                               cfg.n_paths, seed, workers, float(p.get("c", 1.0)))
    rows = []
    for i, pp in enumerate(rep.p_list):
        for j, t in enumerate(rep.t_grid):
            bound = rep.c * rep.fitted_C * math.exp(rep.fitted_C * t * rep.kappa[i])
            rows.append((float(pp), float(t), rep.moments[i, j], rep.std_err[i, j], bound))
    files["moments.csv"] = csv_text(("p", "t", "moment", "se", "bound"), rows)
    files["plot.gp"] = ("set datafile separator ','\nset key autotitle columnhead\nset logscale y\n"
                        "set xlabel 't'\nset ylabel '||u(t,0)||_p'\n"
                        "plot 'moments.csv' using 2:3:4 with yerrorbars title 'moment', '' using 2:5 title 'bound'\n")
    head["moments"] = rep.to_dict()
    return EXIT_OK, f"moments: fitted C {rep.fitted_C:.4g}, exponents {np.round(rep.exponents, 4).tolist()}"


def run_ode(cfg, seed, workers, files, head):
    b, _, _ = cfgmod.functions_of(cfg)
    c = float(cfg.params.get("c", 1.0))
    horizon = float(cfg.params.get("horizon", cfg.solver.T))
    r = ode_osgood_oracle(b, c, horizon)
    head["ode"] = {"c": c, "horizon": horizon, **r.__dict__}
    if r.kind == "BlowupAt":
        return EXIT_OK, f"ode: BlowupAt t={r.t:.6g}"
    return EXIT_OK, f"ode: SurvivedTo horizon={r.horizon:.6g}"


RUNNERS = {"simulate": run_simulate, "global": run_global, "blowup": run_blowup, "tails": run_tails,
           "moments": run_moments, "ode": run_ode}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="osgood-she",
                                 description="Stochastic heat equation experiments on a periodic lattice.")
    ap.add_argument("experiment", choices=cfgmod.EXPERIMENTS)
    ap.add_argument("--config", required=True, help="TOML or JSON run configuration")
    ap.add_argument("--seed", type=int, default=None, help="overrides $OSGOOD_SHE_SEED and the config seed")
    ap.add_argument("--paths", type=int, default=None, help="number of Monte Carlo paths")
    ap.add_argument("--workers", type=int, default=None, help="worker processes")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--force", action="store_true", help="run even if preconditions are not certified")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def dispatch(cfg, experiment: str, seed: int, seed_source: str, workers: int, out: Path, force: bool = False) -> int:
    _check_params(cfg, experiment)
    report = validate(cfg, experiment)
    if experiment == "check":
        prepare_output(out)
        atomic_write(out / "check.json", json_text(report))
        status = "all checks pass" if report["certified"] else "some checks fail"
        print(f"check: {status} (signature {report['signature'][:12]})")
        return EXIT_OK
    if report["gating"] and not report["certified"] and not force:
        failed = [k for k, v in report["checks"].items() if not v["holds"]]
        print(f"refused: {experiment} preconditions not certified ({', '.join(failed)}); use --force to override",
              file=sys.stderr)
        return EXIT_REFUSED
    prepare_output(out)
    cfg = replace(cfg, seed=seed)
    files, head = {}, _header(cfg, experiment, seed, seed_source, report)
    code, line = RUNNERS[experiment](cfg, seed, workers, files, head)
    files["summary.json"] = json_text(head)
    for name in sorted(files):
        atomic_write(out / name, files[name])
    print(line)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load(args.config)
        seed, source = resolve_seed(args.seed, cfg.seed)
        if args.paths is not None:
            if args.paths < 1:
                raise ConfigError("paths", "must be >= 1")
            cfg = replace(cfg, n_paths=args.paths)
        workers = args.workers if args.workers is not None else cfg.workers
        if workers < 1:
            raise ConfigError("workers", "must be >= 1")
        out = Path(args.out if args.out is not None else cfg.output_dir)
        return dispatch(cfg, args.experiment, seed, source, workers, out, args.force)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except (ConditionsFailed, InsufficientPaths, DomainError) as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except ExplodedField as e:
        print(f"exploded: {e}", file=sys.stderr)
        return EXIT_EXPLODED
    except IoError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO
    except OsgoodSheError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
