"""Periodic cubic grid on [-L, L)^3 with spectral transforms and quadrature.

Transform convention (used everywhere in the package): the forward transform
approximates the continuum Fourier integral,

    to_spectral(u)[k] = h^3 * sum_x u(x) exp(-i k.x),

and the inverse divides it back out,

    from_spectral(F)(x) = (2L)^{-3} * sum_k F[k] exp(+i k.x),

with angular wavenumbers k_j = (pi/L) m_j, m_j in [-n/2, n/2).  Under this
pairing Plancherel reads  h^3 sum |u|^2 = (2L)^{-3} sum |F|^2.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


def fft_workers() -> int:
    """Worker count for scipy.fft, from FRACSP_THREADS (default: all cores)."""
    env = os.environ.get("FRACSP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid: n points per axis on [-L, L)^3, spacing h = 2L/n.

    Coordinates are x_j = -L + j h.  Arrays are indexed (ix, iy, iz) in
    C order; the on-disk dump format transposes so that x varies fastest.
    """

    n: int
    L: float

    def __post_init__(self) -> None:
        if self.n % 2 != 0:
            raise ValueError("n must be even")
        if self.n < 8:
            raise ValueError("n must be >= 8")
        if not self.L > 0:
            raise ValueError("L must be positive")
        h = 2.0 * self.L / self.n
        x1 = -self.L + h * np.arange(self.n)
        k1 = 2.0 * np.pi * sfft.fftfreq(self.n, d=h)  # (pi/L) * m
        x1.setflags(write=False)
        k1.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "k1", k1)

    h: float = field(init=False, repr=False)
    x1: np.ndarray = field(init=False, repr=False)
    k1: np.ndarray = field(init=False, repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinate arrays broadcastable to the grid shape."""
        x = self.x1
        return x[:, None, None], x[None, :, None], x[None, None, :]

    def radius_sq(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        """|x - center|^2 on the grid (no periodic wrapping)."""
        x, y, z = self.coords()
        return (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2

    def k_sq(self) -> np.ndarray:
        """|k|^2 on the spectral grid (full fftn layout)."""
        k2 = self.k1**2
        return k2[:, None, None] + k2[None, :, None] + k2[None, None, :]

    def origin_index(self) -> tuple[int, int, int]:
        """Grid index of the coordinate origin x = 0."""
        j = self.n // 2
        return (j, j, j)


def make_grid(n: int, L: float) -> Grid:
    """Build a periodic grid; rejects odd n, n < 8, and nonpositive L."""
    return Grid(n=int(n), L=float(L))


@dataclass(frozen=True)
class Field:
    """Real scalar samples on a Grid.  Values are immutable once constructed."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite samples")
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def max_location(self) -> tuple[np.ndarray, tuple[int, int, int]]:
        """Coordinates and index of the global maximum (lowest linear index wins ties)."""
        idx = np.unravel_index(int(np.argmax(self.values)), self.grid.shape)
        x1 = self.grid.x1
        return np.array([x1[idx[0]], x1[idx[1]], x1[idx[2]]]), idx


def norm_l2sq(u: Field) -> float:
    """Squared L^2 norm, h^3 sum u^2 (the mass of the state)."""
    return float(u.grid.cell_volume * np.sum(u.values * u.values))


def norm_lp(u: Field, q: float) -> float:
    """L^q norm (h^3 sum |u|^q)^{1/q}; requires q >= 1."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return float((u.grid.cell_volume * np.sum(np.abs(u.values) ** q)) ** (1.0 / q))


def integral_pow(u: Field, q: float) -> float:
    """h^3 sum |u|^q (the integral itself, not the root)."""
    return float(u.grid.cell_volume * np.sum(np.abs(u.values) ** q))


def shift(u: Field, offset: tuple[int, int, int]) -> Field:
    """Cyclic index shift; an exact permutation of samples, so an L^q isometry."""
    return Field(u.grid, np.roll(u.values, offset, axis=(0, 1, 2)))


def to_spectral(u: Field) -> np.ndarray:
    """Forward transform, h^3 * fftn; see the module docstring for the convention."""
    return u.grid.cell_volume * sfft.fftn(u.values, workers=fft_workers())


def from_spectral(grid: Grid, coeffs: np.ndarray) -> Field:
    """Inverse of to_spectral; imaginary residue of the ifft is discarded."""
    vals = sfft.ifftn(np.asarray(coeffs), workers=fft_workers()) / grid.cell_volume
    return Field(grid, np.real(vals))


def spectral_l2sq(grid: Grid, coeffs: np.ndarray) -> float:
    """Spectral-side squared L^2 norm, (2L)^{-3} sum |F|^2 (Plancherel partner)."""
    return float(np.sum(np.abs(coeffs) ** 2) / (2.0 * grid.L) ** 3)
