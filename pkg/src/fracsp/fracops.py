"""Fourier-multiplier fractional operators and the free-space Riesz convolution.

The fractional Laplacian acts spectrally as multiplication by |k|^{2s} (the
zero mode maps to zero).  The attractive double integral is evaluated through
the potential phi_u = K * u^2 with kernel K(x) = |x|^{-(3-2s)}; the kernel
normalization constant is set to 1 throughout the package, and the
convolution is free-space (2x zero padding, no periodic images).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .grid import Field, Grid, fft_workers

S_RANGE = (0.75, 1.0)


@dataclass(frozen=True)
class FracParams:
    """Fractional order with the standing admissibility window s in (3/4, 1).

    Out-of-range orders are permitted only with allow_outside_range=True,
    for diagnostics such as operator composition checks.
    """

    s: float
    allow_outside_range: bool = False

    def __post_init__(self) -> None:
        if not self.s > 0:
            raise ValueError("s must be positive")
        if not self.allow_outside_range and not (S_RANGE[0] < self.s < S_RANGE[1]):
            raise ValueError(f"s={self.s} outside ({S_RANGE[0]}, {S_RANGE[1]}); "
                             "set allow_outside_range to override")


def frac_laplacian(u: Field, s: float) -> Field:
    """Apply (-Delta)^s spectrally: multiplier |k|^{2s}, zero mode -> 0."""
    if not s > 0:
        raise ValueError("s must be positive")
    g = u.grid
    mult = g.k_sq() ** s
    out = sfft.ifftn(sfft.fftn(u.values, workers=fft_workers()) * mult,
                     workers=fft_workers())
    return Field(g, np.real(out))


def seminorm_sq(u: Field, s: float) -> float:
    """Kinetic seminorm |(-Delta)^{s/2} u|_2^2 = (2L)^{-3} sum |k|^{2s} |u_hat|^2.

    Equals <(-Delta)^s u, u> exactly under the package transform convention.
    """
    g = u.grid
    uh = sfft.fftn(u.values, workers=fft_workers())
    # h^3 * fftn normalization folded in: (2L)^{-3} h^6 = h^3 / n^3
    scale = g.cell_volume / g.n**3
    return float(scale * np.sum(g.k_sq() ** s * np.abs(uh) ** 2))


def _origin_cell_average(h: float, beta: float, nsub: int = 16) -> float:
    """Cell average of |x|^{-beta} over [-h/2, h/2]^3 by nsub^3 midpoints.

    Integrable for beta < 3; the midpoint set never contains the origin
    because nsub is even.
    """
    q = (np.arange(nsub) + 0.5) / nsub * h - h / 2
    r2 = (q**2)[:, None, None] + (q**2)[None, :, None] + (q**2)[None, None, :]
    return float(np.mean(r2 ** (-beta / 2)))


@dataclass(frozen=True)
class HartreeKernel:
    """Precomputed spectrum of |x|^{-(3-2s)} on the 2x zero-padded grid.

    Immutable and shareable across workers.  khat is the (real) rfftn of the
    kernel sampled at wrapped offsets; origin_value is the cell-averaged
    replacement for the singular sample at zero offset.
    """

    grid: Grid
    s: float
    khat: np.ndarray = field(repr=False)
    origin_value: float

    @classmethod
    def build(cls, grid: Grid, s: float) -> "HartreeKernel":
        FracParams(s, allow_outside_range=True)  # s > 0 check
        beta = 3.0 - 2.0 * s
        if not 0 < beta < 3:
            raise ValueError("kernel exponent 3-2s must lie in (0, 3)")
        n, h = grid.n, grid.h
        pad = 2 * n
        idx = np.arange(pad)
        off = np.where(idx <= n, idx, idx - pad) * h
        r2 = (off**2)[:, None, None] + (off**2)[None, :, None] + (off**2)[None, None, :]
        with np.errstate(divide="ignore"):
            ker = r2 ** (-beta / 2)
        origin = _origin_cell_average(h, beta)
        ker[0, 0, 0] = origin
        khat = sfft.rfftn(ker, workers=fft_workers())
        # kernel is even on the circulant grid, so its spectrum is real
        assert np.max(np.abs(khat.imag)) < 1e-8 * np.max(np.abs(khat.real))
        khat = np.ascontiguousarray(khat.real)
        khat.setflags(write=False)
        return cls(grid=grid, s=s, khat=khat, origin_value=origin)

    def scaled(self, weight: float) -> "HartreeKernel":
        """Kernel multiplied by a constant coupling weight."""
        kh = self.khat * weight
        kh.setflags(write=False)
        return replace(self, khat=kh, origin_value=self.origin_value * weight)

    def convolve(self, density: np.ndarray) -> np.ndarray:
        """Free-space h^3 * (K * density) restricted back to the grid."""
        n = self.grid.n
        pad = 2 * n
        big = np.zeros((pad, pad, pad))
        big[:n, :n, :n] = density
        conv = sfft.irfftn(sfft.rfftn(big, workers=fft_workers()) * self.khat,
                           s=(pad, pad, pad), workers=fft_workers())
        return self.grid.cell_volume * conv[:n, :n, :n]


_KERNEL_CACHE: dict[tuple[int, float, float], HartreeKernel] = {}
_KERNEL_LOCK = threading.Lock()


def get_kernel(grid: Grid, s: float) -> HartreeKernel:
    """Cached kernel lookup keyed on (n, L, s); construction is synchronized."""
    key = (grid.n, float(grid.L), float(s))
    with _KERNEL_LOCK:
        ker = _KERNEL_CACHE.get(key)
        if ker is None:
            ker = HartreeKernel.build(grid, s)
            _KERNEL_CACHE[key] = ker
    return ker


def _check_match(u: Field, kernel: HartreeKernel) -> None:
    if kernel.grid.n != u.grid.n or kernel.grid.L != u.grid.L:
        raise ValueError("kernel was built for a different grid")


def poisson_phi(u: Field, kernel: HartreeKernel) -> Field:
    """Riesz potential phi_u = K * u^2 (free space, c_s = 1)."""
    _check_match(u, kernel)
    return Field(u.grid, kernel.convolve(u.values * u.values))


def hartree_energy(u: Field, kernel: HartreeKernel) -> float:
    """Double integral D(u) = int phi_u u^2; nonnegative, quartic in u."""
    _check_match(u, kernel)
    phi = kernel.convolve(u.values * u.values)
    return float(u.grid.cell_volume * np.sum(phi * u.values * u.values))


def hls_bound_check(u: Field, kernel: HartreeKernel) -> float:
    """Scale- and translation-invariant Hartree/seminorm ratio.

    Returns D(u) / (|(-Delta)^{s/2}u|_2^2)^{(6-4s)/(4s)} / (|u|_2^2)^{(6s-3)/(2s)}.
    The exponents make the ratio invariant under u -> lambda u and under
    dilations, so boundedness across random fields is the diagnostic; the
    sharp constant is not computed.
    """
    s = kernel.s
    from .grid import norm_l2sq

    m = norm_l2sq(u)
    if m == 0:
        raise ValueError("zero field")
    d = hartree_energy(u, kernel)
    k = seminorm_sq(u, s)
    return float(d / k ** ((6 - 4 * s) / (4 * s)) / m ** ((6 * s - 3) / (2 * s)))
