"""Run configuration: TOML or JSON in, one internal schema, TOML or JSON out."""
import json
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import tomli
import tomli_w

from .catalog import resolve, resolve_spectrum
from .errors import ConfigError
from .field import gaussian_profile
from .lattice import Lattice
from .noise import build_spectrum
from .solver import RunSetup

EXPERIMENTS = ("check", "simulate", "global", "blowup", "tails", "moments", "ode")


@dataclass
class LatticeCfg:
    d: int
    N: int
    L: float


@dataclass
class NoiseCfg:
    kind: str = "white"
    density: str = "fhat.white"
    alpha: float = 0.5


@dataclass
class NonlinearityCfg:
    b: str = "b.zero"
    sigma: str = "sigma.zero"
    h: Optional[str] = None
    alpha: float = 0.5


@dataclass
class SolverCfg:
    dt: float = 1e-3
    T: float = 1.0
    nu: float = 0.5
    theta: float = 0.3
    explode_thresh: float = 1e12
    p: float = 2.0
    order: str = "inside"
    symbol: str = "lattice"


@dataclass
class InitialCfg:
    kind: str = "gaussian"
    amplitude: float = 1.0
    t: float = 1.0
    value: float = 0.0


@dataclass
class RunConfig:
    experiment: str
    lattice: LatticeCfg
    noise: NoiseCfg = field(default_factory=NoiseCfg)
    nonlinearity: NonlinearityCfg = field(default_factory=NonlinearityCfg)
    solver: SolverCfg = field(default_factory=SolverCfg)
    initial: InitialCfg = field(default_factory=InitialCfg)
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None
    n_paths: int = 100
    workers: int = 1
    output_dir: str = "results"

    def to_dict(self) -> dict:
        return _drop_none(asdict(self))


_SECTIONS = {"lattice": LatticeCfg, "noise": NoiseCfg, "nonlinearity": NonlinearityCfg,
             "solver": SolverCfg, "initial": InitialCfg}
_TOP = {"experiment": str, "seed": int, "n_paths": int, "workers": int, "output_dir": str}


def _drop_none(d):
    if isinstance(d, dict):
        return {k: _drop_none(v) for k, v in d.items() if v is not None}
    return d


def _coerce(name, value, typ):
    if typ in (int, Optional[int]):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if typ in (str, Optional[str]):
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    return value


def _section(name, cls, raw):
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a table")
    known = {f.name: f for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    kwargs = {}
    for fname, f in known.items():
        if fname in raw:
            kwargs[fname] = _coerce(f"{name}.{fname}", raw[fname], f.type)
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(f"{name}.{fname}", "missing required field")
    return cls(**kwargs)


def from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config", "expected a table at top level")
    for key in raw:
        if key not in _TOP and key not in _SECTIONS and key != "params":
            raise ConfigError(key, "unknown field")
    if "experiment" not in raw:
        raise ConfigError("experiment", "missing required field")
    exp = _coerce("experiment", raw["experiment"], str)
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if "lattice" not in raw:
        raise ConfigError("lattice", "missing required section")
    kw = {"experiment": exp}
    for key in ("seed", "n_paths", "workers", "output_dir"):
        if key in raw:
            kw[key] = _coerce(key, raw[key], _TOP[key])
    for name, cls in _SECTIONS.items():
        if name in raw:
            kw[name] = _section(name, cls, raw[name])
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "expected a table")
    kw["params"] = dict(params)
    cfg = RunConfig(**kw)
    _check_values(cfg)
    return cfg


def _check_values(cfg: RunConfig):
    lat = cfg.lattice
    if lat.d not in (1, 2):
        raise ConfigError("lattice.d", "must be 1 or 2")
    if lat.N < 8 or lat.N & (lat.N - 1):
        raise ConfigError("lattice.N", "must be a power of two >= 8")
    if not lat.L > 0:
        raise ConfigError("lattice.L", "must be positive")
    if cfg.noise.kind not in ("white", "spectral"):
        raise ConfigError("noise.kind", "must be 'white' or 'spectral'")
    if cfg.noise.kind == "white" and lat.d != 1:
        raise ConfigError("noise.kind", "white noise requires lattice.d = 1")
    if not 0 < cfg.noise.alpha <= 1:
        raise ConfigError("noise.alpha", "must lie in (0, 1]")
    if not 0 < cfg.nonlinearity.alpha <= 1:
        raise ConfigError("nonlinearity.alpha", "must lie in (0, 1]")
    s = cfg.solver
    for name in ("dt", "T", "nu", "explode_thresh"):
        if not getattr(s, name) > 0:
            raise ConfigError(f"solver.{name}", "must be positive")
    if s.p < 1:
        raise ConfigError("solver.p", "must be >= 1")
    if s.order not in ("inside", "separate"):
        raise ConfigError("solver.order", "must be 'inside' or 'separate'")
    if s.symbol not in ("lattice", "spectral"):
        raise ConfigError("solver.symbol", "must be 'lattice' or 'spectral'")
    if cfg.initial.kind not in ("gaussian", "constant", "zero"):
        raise ConfigError("initial.kind", "must be 'gaussian', 'constant' or 'zero'")
    if cfg.initial.kind == "gaussian" and not cfg.initial.t > 0:
        raise ConfigError("initial.t", "must be positive")
    if cfg.n_paths < 1:
        raise ConfigError("n_paths", "must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    if cfg.seed is not None and not 0 <= cfg.seed < 2**63:
        raise ConfigError("seed", "must lie in [0, 2^63)")
    # catalog names must resolve
    nl = cfg.nonlinearity
    try:
        h = resolve(nl.h, nl.alpha) if nl.h else None
    except ConfigError as e:
        raise ConfigError("nonlinearity.h", str(e)) from None
    for key in ("b", "sigma"):
        try:
            resolve(getattr(nl, key), nl.alpha, h)
        except ConfigError as e:
            raise ConfigError(f"nonlinearity.{key}", str(e)) from None
    try:
        resolve_spectrum(cfg.noise.density, cfg.noise.alpha, lat.d)
    except ConfigError as e:
        raise ConfigError("noise.density", str(e)) from None


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}") from None
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomli.loads(text.decode())
    except (ValueError, tomli.TOMLDecodeError) as e:
        raise ConfigError("config", f"parse error: {e}") from None
    return from_dict(raw)


def dumps(cfg: RunConfig, fmt: str = "toml") -> str:
    d = cfg.to_dict()
    if fmt == "json":
        return json.dumps(d, sort_keys=True, indent=2)
    return tomli_w.dumps(d)


def loads(text: str, fmt: str = "toml") -> RunConfig:
    return from_dict(json.loads(text) if fmt == "json" else tomli.loads(text))


def initial_field(cfg: RunConfig, lat: Lattice) -> np.ndarray:
    ini = cfg.initial
    if ini.kind == "gaussian":
        return gaussian_profile(lat, ini.t, ini.amplitude).values
    if ini.kind == "constant":
        return np.full(lat.shape, float(ini.value))
    return np.zeros(lat.shape)


def spectrum_of(cfg: RunConfig):
    density = "fhat.white" if cfg.noise.kind == "white" else cfg.noise.density
    return resolve_spectrum(density, cfg.noise.alpha, cfg.lattice.d)


def functions_of(cfg: RunConfig):
    nl = cfg.nonlinearity
    h = resolve(nl.h, nl.alpha) if nl.h else None
    return resolve(nl.b, nl.alpha, h), resolve(nl.sigma, nl.alpha, h), h


def build_setup(cfg: RunConfig, **overrides) -> RunSetup:
    lat = Lattice(cfg.lattice.d, cfg.lattice.L, cfg.lattice.N)
    b, sigma, h = functions_of(cfg)
    s = cfg.solver
    kw = dict(lattice=lat, spectrum=build_spectrum(spectrum_of(cfg), lat), b=b, sigma=sigma,
              u0=initial_field(cfg, lat), dt=s.dt, T=s.T, h=h, nu=s.nu, theta=s.theta, p=s.p,
              explode_thresh=s.explode_thresh, order=s.order, symbol=s.symbol)
    kw.update(overrides)
    return RunSetup(**kw)
