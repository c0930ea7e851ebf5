"""Brownian motion in a heavy-tailed Poissonian trap potential.

Simulation and verification toolkit: marked Poisson trap fields with a
radius-stratified spatial index, killed-Brownian path sampling with exact
drift corrections, environment tilting with explicit likelihood ratios,
Dirichlet heat-kernel references, and the closed-form exponent calculator.
"""

__version__ = "0.1.0"

from .field import (ModelParams, Trap, TrapField, Window, campbell_exp_moment,
                    load_field, max_potential_scan, potential, potential_many,
                    rotate_field, sample_field, save_field, truncation_bias)
from .kernels import (KernelQuery, dirichlet_kernel_box, dirichlet_kernel_unit,
                      hitting_time_cdf, kernel_bounds_check, slab_exit_tail)
from .sampler import (Estimate, PathConfig, PathResult, estimate_Z,
                      measure_fluctuation, rotation_exchange_test,
                      simulate_path, slab_occupation_stats, tube_window)
from .tilt import (TiltSpec, paired_tilt_comparison, rn_derivative,
                   sample_tilt, slab_coverage_check)
from .exponents import (ExponentInput, analytic_covariance, bar_xi,
                        feasibility, lower_bound_exponent, mc_covariance,
                        p2p_bound, sup_feasible_xi)
from .rng import split_seed

MODULE_VERSIONS = {
    "field": __version__,
    "kernels": __version__,
    "sampler": __version__,
    "tilt": __version__,
    "exponents": __version__,
    "cli": __version__,
}
