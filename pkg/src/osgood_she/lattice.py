"""Periodic lattice on [-L, L)^d."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class Lattice:
    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise DimensionError(f"d must be 1 or 2, got {self.d}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise DomainError(f"L must be positive, got {self.L}")
        n = int(self.N)
        if n != self.N or n < 8 or n & (n - 1):
            raise DomainError(f"N must be a power of two >= 8, got {self.N}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", n)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def n_cells(self) -> int:
        return self.N**self.d

    @property
    def origin(self) -> tuple:
        return (self.N // 2,) * self.d

    @property
    def axes(self) -> tuple:
        return tuple(range(-self.d, 0))

    def axis(self) -> np.ndarray:
        """Signed coordinates -L + j*dx along one axis."""
        return -self.L + self.dx * np.arange(self.N)

    def coords(self) -> list:
        return np.meshgrid(*([self.axis()] * self.d), indexing="ij")

    def radius2(self) -> np.ndarray:
        return sum(x * x for x in self.coords())

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers 2*pi*fftfreq along one axis (spacing pi/L)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, self.dx)

    @cached_property
    def rfft_components(self) -> tuple:
        """Per-axis wavenumber arrays broadcasting to the rfftn layout."""
        k = self.wavenumbers()
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.N, self.dx)
        if self.d == 1:
            return (kr,)
        return (k[:, None], kr[None, :])

    @cached_property
    def full_components(self) -> tuple:
        k = self.wavenumbers()
        if self.d == 1:
            return (k,)
        return (k[:, None], k[None, :])

    def kmag(self, layout="rfft") -> np.ndarray:
        comps = self.rfft_components if layout == "rfft" else self.full_components
        return np.sqrt(sum(c * c for c in comps))

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "N": self.N}
