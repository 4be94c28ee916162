"""Space-time Gaussian noise increments on the periodic lattice.

Increments are white in time and have spatial covariance dt * f_L, where f_L
is the periodization of the correlation kernel f truncated to the lattice
wavenumbers. Each increment is drawn from a counter-based stream so that
(seed, stream, step) identifies it exactly.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .catalog import NoiseSpectrum
from .errors import DimensionError, DomainError, InsufficientSamples
from .field import GridField
from .lattice import Lattice

__all__ = ["Lattice", "SpectralWeights", "NoiseIncrement", "NoiseStream", "build_spectrum",
           "sample_increment", "synthesize", "empirical_covariance", "CovarianceProfile",
           "dump_increments"]


@dataclass(frozen=True, eq=False)
class SpectralWeights:
    """f-hat(|k|) on the rfft layout of the lattice (white_flag: i.i.d. cells)."""

    lattice: Lattice
    weights: np.ndarray
    white_flag: bool = False

    def amplitude(self, dt: float) -> np.ndarray:
        """Per-mode amplitude sqrt(dt * f-hat / dx^d) applied to the DFT of i.i.d. normals."""
        return np.sqrt(self.weights * dt / self.lattice.cell_volume)

    def covariance(self, dt: float) -> np.ndarray:
        """Exact covariance Cov(W(0), W(r)) of one increment as a lattice array over lags r."""
        lat = self.lattice
        if self.white_flag:
            c = np.zeros(lat.shape)
            c[(0,) * lat.d] = dt / lat.cell_volume
            return c
        return np.fft.irfftn(self.weights * dt / lat.cell_volume, s=lat.shape, axes=lat.axes)


@dataclass(frozen=True, eq=False)
class NoiseIncrement:
    field: GridField
    dt: float
    seed_path: tuple


def build_spectrum(model: NoiseSpectrum, lat: Lattice) -> SpectralWeights:
    if model.white:
        if lat.d > 1:
            raise DimensionError("space-time white noise is only supported in d = 1")
        return SpectralWeights(lat, np.ones(lat.kmag().shape), True)
    k = lat.kmag()
    w = np.array(model(k), dtype=float)
    zero = (0,) * lat.d
    if not np.isfinite(w[zero]):
        # singular at the origin: use the smallest nonzero lattice wavenumber
        w[zero] = float(model(np.pi / lat.L))
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise DomainError(f"spectral density {model.label} is negative or not finite on the lattice")
    return SpectralWeights(lat, w, False)


def synthesize(eps, spec: SpectralWeights, dt: float):
    """Map i.i.d. N(0,1) cell values (batched over leading axes) to noise increments."""
    lat = spec.lattice
    if spec.white_flag:
        return eps * np.sqrt(dt / lat.cell_volume)
    amp = spec.amplitude(dt)
    return np.fft.irfftn(np.fft.rfftn(eps, axes=lat.axes) * amp, s=lat.shape, axes=lat.axes)


def imaginary_residue(eps, spec: SpectralWeights, dt: float) -> float:
    """Relative imaginary part left by a full complex inverse FFT of the synthesis.

    The Hermitian symmetry of the spectrum of real normals makes this round-off.
    """
    lat = spec.lattice
    if spec.white_flag:
        return 0.0
    amp_full = np.sqrt(np.asarray(_full_weights(spec)) * dt / lat.cell_volume)
    z = np.fft.ifftn(np.fft.fftn(eps, axes=lat.axes) * amp_full, axes=lat.axes)
    scale = np.max(np.abs(z.real))
    return float(np.max(np.abs(z.imag)) / scale) if scale > 0 else 0.0


def _full_weights(spec: SpectralWeights):
    """Expand rfft-layout weights to the full FFT layout using w(-k) = w(k)."""
    lat = spec.lattice
    w = spec.weights
    h = lat.N // 2
    if lat.d == 1:
        return np.concatenate([w, w[1:h][::-1]])
    neg_rows = np.roll(w[::-1], 1, axis=0)
    return np.concatenate([w, neg_rows[:, 1:h][:, ::-1]], axis=1)


class NoiseStream:
    """Counter-based stream of standard normals, addressed by step index.

    Each step consumes a fixed block of 64-bit Philox words, so any step can
    be regenerated without replaying earlier ones.
    """

    def __init__(self, seed: int, stream: int, n_per_step: int):
        if not 0 <= seed < 2**64 or not 0 <= stream < 2**64:
            raise DomainError("seed and stream must be 64-bit unsigned integers")
        self.seed = int(seed)
        self.stream = int(stream)
        self.n_per_step = int(n_per_step)
        self.words_per_step = -(-self.n_per_step // 4) * 4

    def normals(self, step: int, count: int = 1) -> np.ndarray:
        """Normals for steps [step, step + count), shape (count, n_per_step)."""
        bg = np.random.Philox(key=self.seed + (self.stream << 64))
        bg.advance(step * self.words_per_step // 4)
        raw = bg.random_raw(count * self.words_per_step).reshape(count, self.words_per_step)
        raw = raw[:, : self.n_per_step]
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return ndtri(u)


def sample_increment(spec: SpectralWeights, dt: float, rng: NoiseStream, step: int = 0) -> NoiseIncrement:
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    lat = spec.lattice
    eps = rng.normals(step, 1)[0].reshape(lat.shape)
    field = GridField(lat, synthesize(eps, spec, dt))
    return NoiseIncrement(field, dt, (rng.seed, rng.stream, step))


def sample_block(spec: SpectralWeights, dt: float, rng: NoiseStream, step: int, count: int) -> np.ndarray:
    """Array of ``count`` consecutive increments, shape (count,) + lattice shape."""
    lat = spec.lattice
    eps = rng.normals(step, count).reshape((count,) + lat.shape)
    return synthesize(eps, spec, dt)


@dataclass(frozen=True)
class CovarianceProfile:
    lags: np.ndarray
    distances: np.ndarray
    values: np.ndarray
    se: np.ndarray
    temporal_corr: float
    temporal_se: float
    n_samples: int


def _as_array(samples):
    if isinstance(samples, np.ndarray):
        return samples
    return np.stack([s.field.values for s in samples])


def empirical_covariance(samples, max_lag: int, dt: float = None, lattice: Lattice = None) -> CovarianceProfile:
    """Average of W(x) W(x + r) / dt over x, axis directions and samples, for |r| <= max_lag cells.

    Negative lags are included so evenness can be checked. Standard errors
    come from the spread of per-sample averages. The temporal correlation is
    between consecutive samples at the same point.
    """
    if not isinstance(samples, np.ndarray):
        samples = list(samples)
        if samples:
            dt = samples[0].dt if dt is None else dt
            lattice = samples[0].field.lattice if lattice is None else lattice
    arr = _as_array(samples)
    n = arr.shape[0]
    if n < 100:
        raise InsufficientSamples(f"need at least 100 samples, got {n}")
    if dt is None or lattice is None:
        raise DomainError("dt and lattice are required for raw arrays")
    axes = tuple(range(1, arr.ndim))
    lags = np.arange(-max_lag, max_lag + 1)
    vals, ses = [], []
    for r in lags:
        prods = np.mean([np.mean(arr * np.roll(arr, -r, axis=ax), axis=axes) for ax in axes], axis=0) / dt
        vals.append(prods.mean())
        ses.append(prods.std(ddof=1) / np.sqrt(n))
    var = np.mean(arr * arr, axis=axes)
    cross = np.mean(arr[:-1] * arr[1:], axis=axes) / var.mean()
    return CovarianceProfile(lags, lags * lattice.dx, np.array(vals), np.array(ses),
                             float(cross.mean()), float(cross.std(ddof=1) / np.sqrt(len(cross))), n)


def cross_correlation(a: np.ndarray, b: np.ndarray):
    """Same-point correlation between two equally shaped sample arrays: (mean, se)."""
    axes = tuple(range(1, a.ndim))
    norm = np.sqrt(np.mean(a * a) * np.mean(b * b))
    c = np.mean(a * b, axis=axes) / norm
    return float(c.mean()), float(c.std(ddof=1) / np.sqrt(len(c)))


def dump_increments(path, increments: np.ndarray, lattice: Lattice, dt: float, seed: int):
    """Flat little-endian float64 dump plus JSON sidecar {d, N, L, dt, seed}."""
    path = Path(path)
    np.ascontiguousarray(increments, dtype="<f8").tofile(path)
    header = {"d": lattice.d, "N": lattice.N, "L": lattice.L, "dt": dt, "seed": seed,
              "shape": list(increments.shape)}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(header, sort_keys=True))
