"""Numerical laboratory for a nonlocal stripe-forming phase-field energy.

The model couples an anisotropic (1-norm) Modica-Mortola term with a
power-law repulsive interaction kernel.  The package evaluates the energy,
verifies its directional lower-bound decomposition, solves the 1D
optimal-period problem with pointwise coefficients, and runs d=2
gradient-flow experiments that exhibit stripe formation.
"""

from .model import (ModelParams, DomainError, double_well,
                    transition_energy, omega_gap_ratio)
from .field import (PeriodicField, Profile1D, StripeSpec, GridMismatchError,
                    make_stripes, make_one_dimensional, l1_distance,
                    read_pfd, write_pfd)
from .kernel import (KernelMoments, DivergentMomentError, moments, c_tau,
                     j_c, kernel_value, marginal_kernel)
from .energy import (EnergyBreakdown, total_energy, modica_mortola,
                     nonlocal_energy, sharp_stripe_energy,
                     optimal_sharp_period)
from .decomposition import DecompositionReport, lower_bound_report
from .onedim import (MinimizeProfileResult, PeriodSearchResult, f1d,
                     minimize_profile, optimal_period, el_residual,
                     gamma_limit_study, reflection_positivity_check,
                     chessboard_check)
from .flow import (FlowOptions, FlowTrace, StripeMetrics, gradient_flow,
                   stripe_metrics, symmetry_breaking_experiment)

__all__ = [
    "ModelParams",
    "DomainError",
    "double_well",
    "transition_energy",
    "omega_gap_ratio",
    "PeriodicField",
    "Profile1D",
    "StripeSpec",
    "GridMismatchError",
    "make_stripes",
    "make_one_dimensional",
    "l1_distance",
    "read_pfd",
    "write_pfd",
    "KernelMoments",
    "DivergentMomentError",
    "moments",
    "c_tau",
    "j_c",
    "kernel_value",
    "marginal_kernel",
    "EnergyBreakdown",
    "total_energy",
    "modica_mortola",
    "nonlocal_energy",
    "sharp_stripe_energy",
    "optimal_sharp_period",
    "DecompositionReport",
    "lower_bound_report",
    "MinimizeProfileResult",
    "PeriodSearchResult",
    "f1d",
    "minimize_profile",
    "optimal_period",
    "el_residual",
    "gamma_limit_study",
    "reflection_positivity_check",
    "chessboard_check",
    "FlowOptions",
    "FlowTrace",
    "StripeMetrics",
    "gradient_flow",
    "stripe_metrics",
    "symmetry_breaking_experiment",
]

__version__ = "0.1.0"
