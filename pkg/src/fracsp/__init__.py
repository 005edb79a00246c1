"""Spectral solvers for constrained fractional Schrodinger-Poisson ground states."""

from .asymptotics import (ConcentrationReport, ScalingFit, SweepAborted, SweepRecord,
                          UniquenessReport, check_concentration, fit_energy_scaling,
                          run_sweep, sweep_point, uniqueness_probe)
from .energy import (EnergyBreakdown, Params, energy, gn_constant, gn_ratio, gradient,
                     multiplier, multiplier_identity)
from .fieldio import dump_field, load_field
from .fracops import (FracParams, HartreeKernel, frac_laplacian, get_kernel,
                      hartree_energy, hls_bound_check, poisson_phi, seminorm_sq)
from .grid import (Field, Grid, from_spectral, make_grid, norm_l2sq, norm_lp, shift,
                   spectral_l2sq, to_spectral)
from .minimizer import (LineSearchError, MinimizeResult, SolverConfig, el_residual,
                        epsilon_scale, minimize, project_mass, rescaled_q_seed,
                        trilinear_sample)
from .potentials import (LandscapeReport, Potential, Well, analyze_landscape,
                         compute_H, make_constant, make_multi_well, make_single_well,
                         make_zero)
from .qsolver import (DecayFit, GroundStateQ, KernelCheck, decay_fit,
                      linearized_kernel_check, pohozaev_check, pohozaev_targets,
                      solve_Q, virial_check)

__version__ = "0.1.0"
