"""Energy functionals, gradients, multipliers, and the interpolation constant.

Four functional variants share one implementation:

    full : kinetic + int V u^2 - D(u)/2 - (2 a^{p-2}/p) int |u|^p
    V0   : drops the external potential
    Vinf : potential frozen at its supremum V_inf (constant)
    tilde: drops both the potential and the attractive double integral

The gradient returned here is half the Frechet derivative of the functional,
so stationarity on the mass sphere reads exactly as the PDE
(-Delta)^s u + V u = mu u + phi_u u + a^{p-2}|u|^{p-2} u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .fracops import FracParams, HartreeKernel, get_kernel
from .grid import Field, Grid, fft_workers, norm_l2sq
from .potentials import Potential

VARIANTS = ("full", "V0", "Vinf", "tilde")


@dataclass(frozen=True)
class Params:
    """Problem parameters (s, p, a, m) with the admissibility window.

    s in (3/4, 1) unless allow_s_outside; 2 < p < 2 + 4s/3; a, m > 0.
    The derived exponent signs 3p-6-4s < 0 and 6-(3-2s)p > 0 follow from the
    p-window and are asserted.
    """

    s: float
    p: float
    a: float
    m: float
    allow_s_outside: bool = False

    def __post_init__(self) -> None:
        FracParams(self.s, allow_outside_range=self.allow_s_outside)
        if not (2.0 < self.p < 2.0 + 4.0 * self.s / 3.0):
            raise ValueError(f"p={self.p} outside (2, 2+4s/3) = (2, {2 + 4*self.s/3})")
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not self.m > 0:
            raise ValueError("m must be positive")
        assert 3 * self.p - 6 - 4 * self.s < 0
        assert 6 - (3 - 2 * self.s) * self.p > 0

    def with_a(self, a: float) -> "Params":
        return Params(self.s, self.p, a, self.m, self.allow_s_outside)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Term-by-term energy values; total = kinetic + potential_term - hartree - power."""

    kinetic: float
    potential_term: float
    hartree: float   # D(u)/2, entering the total with a minus sign
    power: float     # (2 a^{p-2}/p) int |u|^p, entering with a minus sign
    total: float

    def to_dict(self) -> dict:
        return {"kinetic": self.kinetic, "potential_term": self.potential_term,
                "hartree": self.hartree, "power": self.power, "total": self.total}


class EnergyModel:
    """Bound evaluation context: grid, parameters, variant, cached tables.

    Prepares the potential table and Hartree kernel once so that iterative
    solvers can evaluate energies and gradients repeatedly at FFT cost.
    """

    def __init__(self, grid: Grid, pot: Potential | None, prm: Params,
                 variant: str = "full", kernel: HartreeKernel | None = None):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        self.grid = grid
        self.prm = prm
        self.variant = variant
        self.coeff_p = prm.a ** (prm.p - 2.0)
        self.mult = grid.k_sq() ** prm.s
        if variant == "full":
            if pot is None:
                raise ValueError("variant 'full' needs a potential")
            self.vtable = pot.table(grid)
        elif variant == "Vinf":
            if pot is None:
                raise ValueError("variant 'Vinf' needs a potential")
            self.vtable = np.full(grid.shape, float(pot.V_inf))
        else:
            self.vtable = None
        if variant == "tilde":
            self.kernel = None
        else:
            self.kernel = kernel if kernel is not None else get_kernel(grid, prm.s)
            if kernel is not None and (kernel.grid.n != grid.n or kernel.grid.L != grid.L):
                raise ValueError("kernel grid mismatch")

    def energy_and_gradient(self, vals: np.ndarray):
        """Returns (EnergyBreakdown, gradient array) for one field evaluation."""
        g = self.grid
        h3 = g.cell_volume
        p = self.prm.p
        uh = sfft.fftn(vals, workers=fft_workers())
        flu = np.real(sfft.ifftn(uh * self.mult, workers=fft_workers()))
        kinetic = h3 * float(np.sum(flu * vals))
        grad = flu
        if self.vtable is not None:
            vterm = h3 * float(np.sum(self.vtable * vals * vals))
            grad = grad + self.vtable * vals
        else:
            vterm = 0.0
        if self.kernel is not None:
            phi = self.kernel.convolve(vals * vals)
            d = h3 * float(np.sum(phi * vals * vals))
            grad = grad - phi * vals
        else:
            d = 0.0
        absu = np.abs(vals)
        pint = h3 * float(np.sum(absu**p))
        grad = grad - self.coeff_p * absu ** (p - 2.0) * vals
        power = 2.0 * self.coeff_p / p * pint
        hart = 0.5 * d
        total = kinetic + vterm - hart - power
        bd = EnergyBreakdown(kinetic=kinetic, potential_term=vterm,
                             hartree=hart, power=power, total=total)
        return bd, grad

    def energy(self, vals: np.ndarray) -> EnergyBreakdown:
        return self.energy_and_gradient(vals)[0]

    def multiplier_of(self, vals: np.ndarray, grad: np.ndarray) -> float:
        return float(self.grid.cell_volume * np.sum(grad * vals) / self.prm.m)


def energy(u: Field, pot: Potential | None, prm: Params, variant: str = "full",
           kernel: HartreeKernel | None = None) -> EnergyBreakdown:
    """Evaluate the chosen functional variant on a field."""
    return EnergyModel(u.grid, pot, prm, variant, kernel).energy(u.values)


def gradient(u: Field, pot: Potential | None, prm: Params, variant: str = "full",
             kernel: HartreeKernel | None = None) -> Field:
    """Half the Frechet derivative: (-Delta)^s u + Vu - phi_u u - a^{p-2}|u|^{p-2}u."""
    model = EnergyModel(u.grid, pot, prm, variant, kernel)
    _, grad = model.energy_and_gradient(u.values)
    return Field(u.grid, grad)


def multiplier(u: Field, pot: Potential | None, prm: Params, variant: str = "full",
               kernel: HartreeKernel | None = None) -> float:
    """Lagrange multiplier mu = <gradient(u), u> / m; requires |u|_2^2 = m."""
    mass = norm_l2sq(u)
    if abs(mass - prm.m) > 1e-8 * prm.m:
        raise ValueError(f"mass constraint violated: |u|_2^2 = {mass}, m = {prm.m}")
    model = EnergyModel(u.grid, pot, prm, variant, kernel)
    _, grad = model.energy_and_gradient(u.values)
    return model.multiplier_of(u.values, grad)


def multiplier_identity(u: Field, pot: Potential | None, prm: Params,
                        variant: str = "full", kernel: HartreeKernel | None = None) -> float:
    """Multiplier via the identity mu m = E(u) - D(u)/2 - ((p-2)/p) a^{p-2} int |u|^p.

    Algebraically equal to <gradient, u>/m at any field; serves as the
    cross-check formula at converged minimizers.
    """
    bd = energy(u, pot, prm, variant, kernel)
    return (bd.total - bd.hartree - 0.5 * (prm.p - 2.0) * bd.power) / prm.m


def gn_constant(prm: Params, q_norm_sq: float) -> float:
    """Sharp interpolation constant attained by the ground profile.

    C_opt = 2sp/(6-p(3-2s)) * ((6-p(3-2s))/(3p-6))^{3(p-2)/(4s)} / |Q|_2^{p-2},
    with |Q|_2^2 = q_norm_sq supplied from the profile computation.
    """
    if not q_norm_sq > 0:
        raise ValueError("q_norm_sq must be positive")
    s, p = prm.s, prm.p
    pref = 2.0 * s * p / (6.0 - p * (3.0 - 2.0 * s))
    inner = (6.0 - p * (3.0 - 2.0 * s)) / (3.0 * p - 6.0)
    return pref * inner ** (3.0 * (p - 2.0) / (4.0 * s)) / q_norm_sq ** ((p - 2.0) / 2.0)


def gn_ratio(u: Field, s: float, p: float) -> float:
    """int |u|^p / (seminorm^{3(p-2)/(4s)} * mass^{p/2 - 3(p-2)/(4s)}).

    Bounded by gn_constant over all fields, with equality at the ground
    profile; unit-checked against rescalings in the tests.
    """
    from .fracops import seminorm_sq
    from .grid import integral_pow

    theta = 3.0 * (p - 2.0) / (4.0 * s)
    pint = integral_pow(u, p)
    k = seminorm_sq(u, s)
    mass = norm_l2sq(u)
    if k == 0 or mass == 0:
        raise ValueError("zero field")
    return float(pint / (k**theta * mass ** (p / 2.0 - theta)))
