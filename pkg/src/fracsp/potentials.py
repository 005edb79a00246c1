"""External trapping potentials and the concentration-landscape analyzer.

Built-in potentials are bounded, vanish at their wells, and approach their
supremum V_inf at infinity.  Each well carries a homogeneous local model
V_i(z) = c_i |z|^{r_i}; the landscape analyzer minimizes the smoothed-well
quadratures H_i(y) = int V_i(x+y) Q^2(x) dx over the offset y and reports
which wells capture the concentration as the interaction grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Field, Grid

POTENTIAL_KINDS = ("zero", "constant", "single_well", "multi_well", "custom_table")


@dataclass(frozen=True)
class Well:
    center: np.ndarray  # shape (3,)
    degree: float       # homogeneity degree r_i > 0
    coeff: float        # local model coefficient c_i

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.degree > 0:
            raise ValueError("well degree must be positive")
        if not self.coeff > 0:
            raise ValueError("well coefficient must be positive")

    def local_model(self, dx, dy, dz):
        """Homogeneous model V_i(z) = c_i |z|^{r_i} at offsets from the well."""
        r2 = dx * dx + dy * dy + dz * dz
        return self.coeff * r2 ** (self.degree / 2.0)


@dataclass(frozen=True)
class Potential:
    """Evaluable external potential, normalized so min V = 0 and sup V = V_inf."""

    kind: str
    V_inf: float
    wells: tuple[Well, ...]
    evaluator: Callable = field(repr=False)

    def __post_init__(self) -> None:
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.V_inf < 0:
            raise ValueError("V_inf must be nonnegative")

    def __call__(self, x, y, z):
        return self.evaluator(x, y, z)

    def table(self, grid: Grid) -> np.ndarray:
        """V sampled on the grid (broadcast evaluation)."""
        x, y, z = grid.coords()
        return np.broadcast_to(np.asarray(self.evaluator(x, y, z), dtype=np.float64),
                               grid.shape).copy()


def make_zero() -> Potential:
    return Potential(kind="zero", V_inf=0.0, wells=(),
                     evaluator=lambda x, y, z: np.zeros(np.broadcast(x, y, z).shape))


def make_constant(value: float) -> Potential:
    if value < 0:
        raise ValueError("constant potential must be nonnegative")
    return Potential(kind="constant", V_inf=float(value), wells=(),
                     evaluator=lambda x, y, z: np.full(np.broadcast(x, y, z).shape, float(value)))


def make_single_well(x0: Sequence[float], r: float, V_inf: float) -> Potential:
    """V(x) = V_inf |x-x0|^r / (1 + |x-x0|^r): zero at the well, sup V_inf at infinity."""
    if not r > 0:
        raise ValueError("degree r must be positive")
    if not V_inf > 0:
        raise ValueError("V_inf must be positive")
    x0 = np.asarray(x0, dtype=np.float64).reshape(3)

    def ev(x, y, z):
        rr = ((x - x0[0]) ** 2 + (y - x0[1]) ** 2 + (z - x0[2]) ** 2) ** (r / 2.0)
        return V_inf * rr / (1.0 + rr)

    well = Well(center=x0, degree=r, coeff=V_inf)
    return Potential(kind="single_well", V_inf=float(V_inf), wells=(well,), evaluator=ev)


def make_multi_well(wells: Sequence[tuple[Sequence[float], float]], V_inf: float,
                    L: float | None = None) -> Potential:
    """V = V_inf f/(1+f) with f(x) = prod_i |x - x_i|^{r_i}.

    The local model at well j has degree r_j and coefficient
    c_j = V_inf prod_{i!=j} |x_j - x_i|^{r_i}.  When the box half-width L is
    given, wells must stay inside with margin >= L/4.
    """
    if not V_inf > 0:
        raise ValueError("V_inf must be positive")
    if len(wells) == 0:
        raise ValueError("need at least one well")
    centers = [np.asarray(c, dtype=np.float64).reshape(3) for c, _ in wells]
    degrees = [float(r) for _, r in wells]
    for r in degrees:
        if not r > 0:
            raise ValueError("degree r must be positive")
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if np.linalg.norm(centers[i] - centers[j]) < 1e-9:
                raise ValueError("overlapping wells")
    if L is not None:
        for c in centers:
            if np.max(np.abs(c)) > 0.75 * L:
                raise ValueError("well too close to boundary")

    def ev(x, y, z):
        f = np.ones(np.broadcast(x, y, z).shape)
        for c, r in zip(centers, degrees):
            r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
            f = f * r2 ** (r / 2.0)
        return V_inf * f / (1.0 + f)

    built = []
    for j, (cj, rj) in enumerate(zip(centers, degrees)):
        coeff = V_inf
        for i, (ci, ri) in enumerate(zip(centers, degrees)):
            if i != j:
                coeff *= float(np.linalg.norm(cj - ci) ** ri)
        built.append(Well(center=cj, degree=rj, coeff=coeff))
    kind = "single_well" if len(built) == 1 else "multi_well"
    return Potential(kind=kind, V_inf=float(V_inf), wells=tuple(built), evaluator=ev)


def make_table_potential(grid: Grid, values: np.ndarray, V_inf: float) -> Potential:
    """Potential backed by a precomputed table on a grid (nearest-sample lookup)."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.shape != grid.shape:
        raise ValueError("table shape mismatch")

    def ev(x, y, z):
        ix = np.rint((np.asarray(x) + grid.L) / grid.h).astype(int) % grid.n
        iy = np.rint((np.asarray(y) + grid.L) / grid.h).astype(int) % grid.n
        iz = np.rint((np.asarray(z) + grid.L) / grid.h).astype(int) % grid.n
        return vals[ix, iy, iz]

    return Potential(kind="custom_table", V_inf=float(V_inf), wells=(), evaluator=ev)


def compute_H(pot: Potential, well: int, y: Sequence[float], Q: Field, a_star: float) -> float:
    """Quadrature H_i(y) = h^3 sum V_i(x+y) Q^2(x) with the homogeneous model V_i.

    Q must carry mass a_star (|Q|_2^2 = a_star).  Offsets are capped at
    |y|_inf <= L/4 so the Q^2-weighted quadrature window stays representative.
    """
    w = pot.wells[well]
    g = Q.grid
    from .grid import norm_l2sq

    if abs(norm_l2sq(Q) - a_star) > 1e-6 * a_star:
        raise ValueError("Q is not normalized to mass a_star")
    y = np.asarray(y, dtype=np.float64).reshape(3)
    if np.max(np.abs(y)) > g.L / 4.0:
        raise ValueError("offset y too large for the quadrature window")
    x, yy, zz = g.coords()
    vloc = w.local_model(x + y[0], yy + y[1], zz + y[2])
    return float(g.cell_volume * np.sum(vloc * Q.values * Q.values))


def _H_batch(well: Well, offsets: np.ndarray, Q2: np.ndarray, grid: Grid) -> np.ndarray:
    """Vectorized H_i over a batch of offsets, chunked to bound memory."""
    x, y, z = grid.coords()
    out = np.empty(len(offsets))
    chunk = max(1, int(64 * 32**3 / Q2.size))
    for lo in range(0, len(offsets), chunk):
        off = offsets[lo:lo + chunk]
        dx = x[None] + off[:, 0, None, None, None]
        dy = y[None] + off[:, 1, None, None, None]
        dz = z[None] + off[:, 2, None, None, None]
        r2 = dx * dx + dy * dy + dz * dz
        vals = well.coeff * r2 ** (well.degree / 2.0)
        out[lo:lo + chunk] = grid.cell_volume * np.tensordot(vals, Q2, axes=3)
    return out


@dataclass(frozen=True)
class WellMinimum:
    well: int
    y0: np.ndarray
    H0: float
    hessian: np.ndarray
    converged: bool


@dataclass(frozen=True)
class LandscapeReport:
    r: float                      # max homogeneity degree over wells
    Zbar: tuple[int, ...]         # wells attaining r
    lambda_bar: dict              # well index -> min_y H_i(y)
    lambda_bar_0: float           # min over Zbar
    Z0: tuple[int, ...]           # wells in Zbar attaining lambda_bar_0
    minima: tuple[WellMinimum, ...]  # refined minimizer data for wells in Z0
    K0: tuple[np.ndarray, ...]    # deduplicated minimizing offsets of H
    nondegenerate: bool

    def satisfies_v3(self) -> bool:
        """Single concentration well with a unique nondegenerate offset."""
        return len(self.Z0) == 1 and len(self.K0) == 1 and self.nondegenerate


def _coordinate_descent(well: Well, y0: np.ndarray, Q2: np.ndarray, grid: Grid,
                        step0: float, step_min: float, max_steps: int = 200):
    """Pattern search on H_i: axis probes with halving steps down to step_min."""
    y = y0.copy()
    fy = _H_batch(well, y[None], Q2, grid)[0]
    step = step0
    for _ in range(max_steps):
        probes = []
        for ax in range(3):
            for sgn in (-1.0, 1.0):
                t = y.copy()
                t[ax] += sgn * step
                probes.append(t)
        probes = np.array(probes)
        vals = _H_batch(well, probes, Q2, grid)
        best = int(np.argmin(vals))
        if vals[best] < fy:
            y, fy = probes[best], vals[best]
        else:
            if step <= step_min:
                return y, fy, True
            step /= 2.0
    return y, fy, False


def _hessian_H(well: Well, y0: np.ndarray, Q2: np.ndarray, grid: Grid, step: float) -> np.ndarray:
    """3x3 Hessian of H_i at y0 by central differences."""
    H = np.zeros((3, 3))
    e = np.eye(3) * step
    f0 = _H_batch(well, y0[None], Q2, grid)[0]
    for i in range(3):
        fp = _H_batch(well, (y0 + e[i])[None], Q2, grid)[0]
        fm = _H_batch(well, (y0 - e[i])[None], Q2, grid)[0]
        H[i, i] = (fp - 2 * f0 + fm) / step**2
        for j in range(i + 1, 3):
            fpp = _H_batch(well, (y0 + e[i] + e[j])[None], Q2, grid)[0]
            fpm = _H_batch(well, (y0 + e[i] - e[j])[None], Q2, grid)[0]
            fmp = _H_batch(well, (y0 - e[i] + e[j])[None], Q2, grid)[0]
            fmm = _H_batch(well, (y0 - e[i] - e[j])[None], Q2, grid)[0]
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * step**2)
    return H


def analyze_landscape(pot: Potential, Q: Field, a_star: float,
                      search_radius: float = 2.0) -> LandscapeReport:
    """Locate and classify the minimizing offsets of the well quadratures H_i.

    Coarse grid search (step h, |y|_inf <= search_radius) feeds a pattern
    refinement down to step h/16; the Hessian at each refined minimum uses
    central differences with step h/4.
    """
    if not pot.wells:
        raise ValueError("potential has no declared wells")
    grid = Q.grid
    from .grid import norm_l2sq

    if abs(norm_l2sq(Q) - a_star) > 1e-6 * a_star:
        raise ValueError("Q is not normalized to mass a_star")
    Q2 = Q.values * Q.values
    h = grid.h

    r = max(w.degree for w in pot.wells)
    Zbar = tuple(i for i, w in enumerate(pot.wells) if w.degree == r)

    ticks = np.arange(-search_radius, search_radius + h / 2, h)
    gx, gy, gz = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    coarse = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    lambda_bar: dict[int, float] = {}
    refined: dict[int, tuple[np.ndarray, float, bool]] = {}
    k0_candidates: dict[int, list[tuple[np.ndarray, float]]] = {}
    for i, w in enumerate(pot.wells):
        vals = _H_batch(w, coarse, Q2, grid)
        vgrid = vals.reshape(gx.shape)
        # basins: strict local minima of the coarse table (boundary-padded)
        pad = np.pad(vgrid, 1, constant_values=np.inf)
        is_min = np.ones_like(vgrid, dtype=bool)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    if dx == dy == dz == 0:
                        continue
                    nb = pad[1 + dx:1 + dx + vgrid.shape[0],
                             1 + dy:1 + dy + vgrid.shape[1],
                             1 + dz:1 + dz + vgrid.shape[2]]
                    is_min &= vgrid <= nb
        seeds = coarse[is_min.ravel()]
        ends: list[tuple[np.ndarray, float]] = []
        ok_all = True
        for seed in seeds:
            yref, fref, ok = _coordinate_descent(w, seed, Q2, grid, h, h / 16.0)
            ok_all = ok_all and ok
            ends.append((yref, fref))
        fbest = min(f for _, f in ends)
        ybest = next(y for y, f in ends if f == fbest)
        lambda_bar[i] = fbest
        refined[i] = (ybest, fbest, ok_all)
        k0_candidates[i] = ends

    lambda_bar_0 = min(lambda_bar[i] for i in Zbar)
    tol0 = 1e-9 * max(abs(lambda_bar_0), 1.0) + 1e-12
    Z0 = tuple(i for i in Zbar if lambda_bar[i] <= lambda_bar_0 + tol0)

    minima = []
    nondeg = True
    k0: list[np.ndarray] = []
    for i in Z0:
        ybest, fbest, ok = refined[i]
        hess = _hessian_H(pot.wells[i], ybest, Q2, grid, h / 4.0)
        eigs = np.linalg.eigvalsh(hess)
        nondeg = nondeg and bool(eigs.min() > 0)
        minima.append(WellMinimum(well=i, y0=ybest, H0=fbest, hessian=hess, converged=ok))
        # minimizing offsets within tolerance of the global level, dedup h/2
        for yc, fc in k0_candidates[i]:
            if fc <= lambda_bar_0 + 1e-6 * max(abs(lambda_bar_0), 1.0):
                if all(np.linalg.norm(yc - prev) > h / 2 for prev in k0):
                    k0.append(yc)

    return LandscapeReport(r=r, Zbar=Zbar, lambda_bar=lambda_bar,
                           lambda_bar_0=lambda_bar_0, Z0=Z0, minima=tuple(minima),
                           K0=tuple(k0), nondegenerate=nondeg)


def landscape_to_dict(rep: LandscapeReport) -> dict:
    """JSON-ready view of a LandscapeReport."""
    return {
        "r": rep.r,
        "Zbar": list(rep.Zbar),
        "lambda_bar": {str(k): v for k, v in sorted(rep.lambda_bar.items())},
        "lambda_bar_0": rep.lambda_bar_0,
        "Z0": list(rep.Z0),
        "minima": [
            {
                "well": m.well,
                "y0": [float(v) for v in m.y0],
                "H0": m.H0,
                "hessian": [[float(v) for v in row] for row in m.hessian],
                "converged": m.converged,
            }
            for m in rep.minima
        ],
        "K0": [[float(v) for v in y] for y in rep.K0],
        "nondegenerate": rep.nondegenerate,
        "satisfies_v3": rep.satisfies_v3(),
    }
