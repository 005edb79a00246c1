"""Ground profile of (-Delta)^s Q + Q = Q^{p-1} and its identity diagnostics.

The profile is computed by a stabilized fixed-point iteration: each step
solves ((-Delta)^s + 1) u_{n+1} = S_n^gamma u_n^{p-1} with the normalization
factor S_n = <((-Delta)^s + 1) u_n, u_n> / <u_n^{p-1}, u_n> and stabilizer
gamma = (p-1)/(p-2).  The critical mass is a* = |Q|_2^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .fracops import seminorm_sq
from .grid import Field, Grid, fft_workers, integral_pow, norm_l2sq, shift


class IterationDivergence(RuntimeError):
    """Fixed-point normalization factor left its admissible window."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class GroundStateQ:
    """Converged positive radial profile with its certification numbers."""

    Q: Field
    a_star: float
    residual: float                 # L^2 norm of (-Delta)^s Q + Q - Q^{p-1}
    pohozaev_ratios: tuple[float, float]
    decay_exponent: float
    iterations: int
    s: float
    p: float

    def summary(self) -> dict:
        return {
            "s": self.s, "p": self.p,
            "n": self.Q.grid.n, "L": self.Q.grid.L,
            "a_star": self.a_star,
            "residual": self.residual,
            "residual_rel": self.residual / np.sqrt(self.a_star),
            "pohozaev_ratios": list(self.pohozaev_ratios),
            "decay_exponent": self.decay_exponent,
            "iterations": self.iterations,
        }


def recenter_to_origin(u: Field) -> Field:
    """Cyclic shift placing the global maximum at the origin cell."""
    _, idx = u.max_location()
    j = u.grid.n // 2
    return shift(u, (j - idx[0], j - idx[1], j - idx[2]))


def pde_residual_field(vals: np.ndarray, grid: Grid, s: float, p: float) -> np.ndarray:
    """Pointwise defect of (-Delta)^s u + u - |u|^{p-2}u."""
    mult = grid.k_sq() ** s
    flu = np.real(sfft.ifftn(sfft.fftn(vals, workers=fft_workers()) * mult,
                             workers=fft_workers()))
    return flu + vals - np.abs(vals) ** (p - 2.0) * vals


def solve_Q(grid: Grid, s: float, p: float, tol: float = 1e-12,
            max_iter: int = 500, seed: Field | None = None,
            residual_tol: float = 1e-7) -> GroundStateQ:
    """Compute the positive ground profile on the grid.

    Converged when |S_n - 1| < tol and the relative PDE residual falls below
    residual_tol.  Divergence (S outside [1e-3, 1e3]) raises
    IterationDivergence with the factor trace; exceeding max_iter raises
    RuntimeError.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    h3 = grid.cell_volume
    mult = grid.k_sq() ** s
    invop = 1.0 / (mult + 1.0)
    gamma = (p - 1.0) / (p - 2.0)
    if seed is None:
        u = np.exp(-grid.radius_sq())
    else:
        u = np.array(seed.values)
    trace: list[float] = []
    workers = fft_workers()
    for it in range(1, max_iter + 1):
        up = np.abs(u) ** (p - 2.0) * u
        lin = np.real(sfft.ifftn(sfft.fftn(u, workers=workers) * (mult + 1.0),
                                 workers=workers))
        S = h3 * np.sum(lin * u) / (h3 * np.sum(up * u))
        trace.append(float(S))
        if not (1e-3 < S < 1e3):
            raise IterationDivergence(f"normalization factor S={S} diverged", trace)
        u = S**gamma * np.real(sfft.ifftn(sfft.fftn(up, workers=workers) * invop,
                                          workers=workers))
        if abs(S - 1.0) < tol:
            res = pde_residual_field(u, grid, s, p)
            rel = np.sqrt(h3 * np.sum(res * res) / (h3 * np.sum(u * u)))
            if rel < residual_tol:
                break
    else:
        raise RuntimeError(f"no convergence after {max_iter} iterations "
                           f"(last |S-1| = {abs(trace[-1]-1):.3e})")

    q = Field(grid, u)
    _, idx = q.max_location()
    if q.values[idx] < 0:
        q = Field(grid, -q.values)
    q = recenter_to_origin(q)
    a_star = norm_l2sq(q)
    resid = pde_residual_field(q.values, grid, s, p)
    residual = float(np.sqrt(h3 * np.sum(resid * resid)))
    ratios = pohozaev_check(q, s, p)
    decay = decay_fit(q, expected=3.0 + 2.0 * s)
    return GroundStateQ(Q=q, a_star=a_star, residual=residual,
                        pohozaev_ratios=ratios, decay_exponent=decay.exponent,
                        iterations=it, s=s, p=p)


def pohozaev_check(Q, s: float, p: float) -> tuple[float, float]:
    """The two virial ratios of the profile.

    Returns (seminorm^2 / int Q^p, seminorm^2 / int Q^2); their continuum
    values are 3(p-2)/(2sp) and 3(p-2)/(6-(3-2s)p).
    """
    q = Q.Q if isinstance(Q, GroundStateQ) else Q
    k = seminorm_sq(q, s)
    return (k / integral_pow(q, p), k / norm_l2sq(q))


def pohozaev_targets(s: float, p: float) -> tuple[float, float]:
    return (3.0 * (p - 2.0) / (2.0 * s * p),
            3.0 * (p - 2.0) / (6.0 - (3.0 - 2.0 * s) * p))


@dataclass(frozen=True)
class DecayFit:
    """Log-log tail fit: u ~ C |x|^{-exponent} over the fit window."""

    exponent: float
    r_squared: float
    window: tuple[float, float]
    n_samples: int


def decay_fit(u: Field, expected: float) -> DecayFit:
    """Least-squares slope of log u vs log |x| on the window |x| in [L/4, 3L/4].

    Samples run along the six axis rays from the maximum cell.  The expected
    exponent is echoed in diagnostics only; a poor fit shows up as a low
    r_squared.  Non-positive samples in the window are rejected.
    """
    g = u.grid
    n, h, L = g.n, g.h, g.L
    _, idx = u.max_location()
    vals = u.values
    lines = (vals[:, idx[1], idx[2]], vals[idx[0], :, idx[2]], vals[idx[0], idx[1], :])
    rays = []
    for ax, line in enumerate(lines):
        line = np.roll(line, -idx[ax])       # max cell at position 0
        rays.append(line[1:n // 2])          # +axis direction
        rays.append(line[-1:n // 2:-1])      # -axis direction
    r = h * np.arange(1, n // 2)
    mask = (r >= L / 4.0) & (r <= 3.0 * L / 4.0)
    logr = []
    logu = []
    for ray in rays:
        seg = ray[mask]
        if np.any(seg <= 0):
            raise ValueError("fit window contains non-positive samples")
        logr.append(np.log(r[mask]))
        logu.append(np.log(seg))
    logr = np.concatenate(logr)
    logu = np.concatenate(logu)
    slope, intercept = np.polyfit(logr, logu, 1)
    pred = slope * logr + intercept
    ss_res = float(np.sum((logu - pred) ** 2))
    ss_tot = float(np.sum((logu - logu.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(exponent=float(-slope), r_squared=r2,
                    window=(L / 4.0, 3.0 * L / 4.0), n_samples=int(mask.sum()))


def spectral_gradient(u: Field) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cartesian gradient via ik multipliers."""
    g = u.grid
    uh = sfft.fftn(u.values, workers=fft_workers())
    k = g.k1
    out = []
    for ax, shape in enumerate([(-1, 1, 1), (1, -1, 1), (1, 1, -1)]):
        kk = k.reshape(shape)
        out.append(np.real(sfft.ifftn(1j * kk * uh, workers=fft_workers())))
    return out[0], out[1], out[2]


@dataclass(frozen=True)
class KernelCheck:
    """Residuals of the linearized operator on its analytic null directions."""

    axis_residuals: tuple[float, float, float]
    pseudo_eigen_rel_err: float


def linearized_kernel_check(gs: GroundStateQ, s: float, p: float) -> KernelCheck:
    """Apply L = (-Delta)^s + 1 - (p-1) Q^{p-2} to dQ/dx_i and to the dilation
    pseudo-eigenvector Q + ((p-2)/(2s)) x.grad Q (target -(p-2) Q)."""
    q = gs.Q
    g = q.grid
    h3 = g.cell_volume
    mult = g.k_sq() ** s
    qvals = q.values

    def L_op(w):
        flw = np.real(sfft.ifftn(sfft.fftn(w, workers=fft_workers()) * mult,
                                 workers=fft_workers()))
        return flw + w - (p - 1.0) * np.abs(qvals) ** (p - 2.0) * w

    gx, gy, gz = spectral_gradient(q)
    res = []
    for d in (gx, gy, gz):
        res.append(float(np.sqrt(np.sum(L_op(d) ** 2) / np.sum(d**2))))
    x, y, z = g.coords()
    xdg = x * gx + y * gy + z * gz
    v = qvals + (p - 2.0) / (2.0 * s) * xdg
    target = -(p - 2.0) * qvals
    err = float(np.sqrt(h3 * np.sum((L_op(v) - target) ** 2)
                        / (h3 * np.sum(target**2))))
    return KernelCheck(axis_residuals=(res[0], res[1], res[2]), pseudo_eigen_rel_err=err)


def virial_check(u: Field, s: float, boundary_tol: float = 1e-4) -> float:
    """Relative mismatch of int (-Delta)^s u (x.grad u) = (2s-3)/2 |(-Delta)^{s/2}u|_2^2.

    Requires the field to have decayed below boundary_tol * max|u| on the
    boundary ring; otherwise the periodic sawtooth in x.grad u would
    dominate and the check is rejected.
    """
    g = u.grid
    vals = u.values
    peak = np.max(np.abs(vals))
    ring = max(np.max(np.abs(vals[0, :, :])), np.max(np.abs(vals[:, 0, :])),
               np.max(np.abs(vals[:, :, 0])))
    if ring > boundary_tol * peak:
        raise ValueError(f"insufficient boundary decay: ring max {ring:.3e} "
                         f"vs {boundary_tol:.0e} * peak {peak:.3e}")
    gx, gy, gz = spectral_gradient(u)
    x, y, z = g.coords()
    xdg = x * gx + y * gy + z * gz
    mult = g.k_sq() ** s
    flu = np.real(sfft.ifftn(sfft.fftn(vals, workers=fft_workers()) * mult,
                             workers=fft_workers()))
    lhs = g.cell_volume * float(np.sum(flu * xdg))
    rhs = (2.0 * s - 3.0) / 2.0 * seminorm_sq(u, s)
    return abs(lhs - rhs) / abs(rhs)
