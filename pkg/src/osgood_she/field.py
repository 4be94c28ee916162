"""Grid fields, discrete V_p norms and the periodic heat semigroup."""
import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ExplodedField
from .lattice import Lattice

log = logging.getLogger(__name__)

CLAMP_REL = 1e-12


@dataclass(frozen=True, eq=False)
class GridField:
    """Real field on a lattice. Values are stored read-only.

    Non-finite values flag the field as exploded instead of raising.
    """

    lattice: Lattice
    values: np.ndarray
    exploded: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.lattice.shape:
            raise DomainError(f"values shape {v.shape} != lattice shape {self.lattice.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if not self.exploded and not np.all(np.isfinite(v)):
            object.__setattr__(self, "exploded", True)


@dataclass(frozen=True)
class VpNorm:
    p: float
    lp_value: float
    linf_value: float
    vp_value: float


def norms_array(values, p, lattice: Lattice):
    """Return (lp, linf) over the trailing lattice axes of a (batched) array.

    The L^p sum is scaled by the max modulus so that large fields do not overflow.
    """
    axes = lattice.axes
    a = np.abs(values)
    linf = a.max(axis=axes)
    scale = np.where(linf > 0, linf, 1.0)
    r = a / np.expand_dims(scale, axes)
    lp = scale * (np.sum(r**p, axis=axes) * lattice.cell_volume) ** (1.0 / p)
    return lp, linf


def vp_norm(u: GridField, p: float) -> VpNorm:
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if u.exploded or not np.all(np.isfinite(u.values)):
        raise ExplodedField("field has non-finite values")
    lp, linf = norms_array(u.values, p, u.lattice)
    lp, linf = float(lp), float(linf)
    return VpNorm(p=float(p), lp_value=lp, linf_value=linf, vp_value=max(lp, linf))


def lattice_symbol(lattice: Lattice, nu: float, symbol: str = "lattice", layout="rfft"):
    """Decay rate per Fourier mode of the generator nu*Laplacian."""
    comps = lattice.rfft_components if layout == "rfft" else lattice.full_components
    if symbol == "lattice":
        dx = lattice.dx
        return nu * sum((4.0 / dx**2) * np.sin(0.5 * c * dx) ** 2 for c in comps)
    if symbol == "spectral":
        return nu * sum(c * c for c in comps)
    raise DomainError(f"unknown symbol {symbol!r}")


def heat_multiplier(lattice: Lattice, t: float, nu: float = 0.5, symbol: str = "lattice"):
    return np.exp(-t * lattice_symbol(lattice, nu, symbol))


def apply_multiplier(values, mult, lattice: Lattice):
    """Fourier multiplier on the trailing lattice axes (real in, real out)."""
    axes = lattice.axes
    return np.fft.irfftn(np.fft.rfftn(values, axes=axes) * mult, s=lattice.shape, axes=axes)


def heat_semigroup(u: GridField, t: float, nu: float = 0.5, symbol: str = "lattice") -> GridField:
    """Apply S_t = exp(t * nu * Laplacian) on the periodic lattice.

    ``symbol="lattice"`` uses the second-difference Laplacian, whose kernel is
    a probability density on the grid (positive, mass one, exact semigroup).
    ``symbol="spectral"`` uses the multiplier exp(-nu |k|^2 t).
    """
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if t == 0:
        return GridField(u.lattice, u.values, u.exploded)
    out = apply_multiplier(u.values, heat_multiplier(u.lattice, t, nu, symbol), u.lattice)
    if np.all(u.values >= 0):
        out = clamp_ringing(out, float(np.max(u.values)))
    return GridField(u.lattice, out)


def clamp_ringing(values, scale):
    """Zero out negative round-off in [-CLAMP_REL*scale, 0); log its size."""
    neg = (values < 0) & (values >= -CLAMP_REL * scale)
    if np.any(neg):
        log.debug("clamped %d values, max magnitude %.3e", int(neg.sum()), float(-values[neg].min()))
        values = np.where(neg, 0.0, values)
    return values


def gaussian_profile(lattice: Lattice, t: float, amplitude: float = 1.0) -> GridField:
    """amplitude * p_t(x) with p_t the Gaussian density of variance t per axis."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    d = lattice.d
    vals = amplitude * (2.0 * np.pi * t) ** (-d / 2) * np.exp(-lattice.radius2() / (2.0 * t))
    return GridField(lattice, vals)


def compose(u: GridField, g) -> GridField:
    if u.exploded:
        raise ExplodedField("cannot compose an exploded field")
    return GridField(u.lattice, np.asarray(g(u.values), dtype=float))


def weighted_integral(u: GridField, w: GridField) -> float:
    if u.lattice != w.lattice:
        raise DomainError("fields live on different lattices")
    if u.exploded or w.exploded:
        raise ExplodedField("weighted integral of an exploded field")
    return float(np.sum(u.values * w.values) * u.lattice.cell_volume)


def boundary_mass(values, p: float, lattice: Lattice):
    """Fraction of sum |u|^p carried by cells within L/4 of the boundary.

    Works on batched arrays (reduces the trailing lattice axes).
    """
    edge = np.abs(lattice.axis()) >= 0.75 * lattice.L
    if lattice.d == 2:
        edge = edge[:, None] | edge[None, :]
    a = np.abs(values)
    scale = np.expand_dims(np.where(a.max(axis=lattice.axes) > 0, a.max(axis=lattice.axes), 1.0), lattice.axes)
    w = (a / scale) ** p
    tot = w.sum(axis=lattice.axes)
    return np.where(tot > 0, (w * edge).sum(axis=lattice.axes) / np.where(tot > 0, tot, 1.0), 0.0)


def write_norm_trace(path, rows):
    """Write rows of (t, lp, linf, vp) as CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "lp", "linf", "vp"])
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


def dump_binary(path, values, lattice: Lattice, dt=None, seed=None):
    """Little-endian float64, row-major, plus a JSON sidecar header."""
    path = Path(path)
    np.ascontiguousarray(values, dtype="<f8").tofile(path)
    header = {"d": lattice.d, "N": lattice.N, "L": lattice.L, "dt": dt, "seed": seed,
              "shape": list(np.shape(values))}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, sort_keys=True))


def load_binary(path):
    path = Path(path)
    header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.fromfile(path, dtype="<f8").reshape(header["shape"])
    return data, header
