import numpy as np
import pytest

from osgood_she.catalog import ScalarFn
from osgood_she.config import from_dict
from osgood_she.lattice import Lattice


def fn(f, label="test"):
    return ScalarFn(f, label)


@pytest.fixture
def lat1():
    return Lattice(1, 8.0, 128)


@pytest.fixture
def lat2():
    return Lattice(2, 4.0, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_cfg(**sections):
    raw = {"experiment": "simulate", "lattice": {"d": 1, "N": 64, "L": 4.0}}
    for k, v in sections.items():
        if isinstance(v, dict) and isinstance(raw.get(k), dict):
            raw[k] = {**raw[k], **v}
        else:
            raw[k] = v
    return from_dict(raw)


GLOBAL_RAW = {
    "experiment": "global", "seed": 7, "n_paths": 200,
    "lattice": {"d": 1, "N": 128, "L": 8.0},
    "noise": {"kind": "white", "alpha": 0.5},
    "nonlinearity": {"b": "b.ulog:1", "sigma": "sigma.envelope", "h": "h.ulogu", "alpha": 0.5},
    "solver": {"dt": 1e-3, "T": 1.0, "p": 6.0},
    "initial": {"kind": "gaussian", "amplitude": 3.0, "t": 0.25},
}

BLOWUP_RAW = {
    "experiment": "blowup", "seed": 11, "n_paths": 100,
    "lattice": {"d": 1, "N": 128, "L": 8.0},
    "noise": {"kind": "white"},
    "nonlinearity": {"b": "b.power:2", "sigma": "sigma.clip:1"},
    "solver": {"dt": 2e-4, "T": 1.0},
}

TAILS_RAW = {
    "experiment": "tails", "seed": 3, "n_paths": 20000,
    "lattice": {"d": 1, "N": 128, "L": 8.0},
    "solver": {"dt": 2e-3, "p": 6.0, "T": 0.25},
}


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a PASS/FAIL line for an acceptance criterion."""

    def _record(k, ok, detail=""):
        ACCEPTANCE[k] = f"criterion {k!s:>4}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[k])
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("ab")), str(k))):
            terminalreporter.write_line(ACCEPTANCE[k])
