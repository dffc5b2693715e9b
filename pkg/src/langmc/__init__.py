"""Langevin MCMC toolkit for smooth targets that are strongly convex outside
a ball, with coupling-based convergence diagnostics."""

__version__ = "0.1.0"

from .potentials import (PotentialModel, Quadratic, GaussianMixture,
                         SmoothedDoubleWell, make_potential, load_potential,
                         audit_constants, check_gradient_fd)
from .distance_fn import DistanceFn, check_f_properties
from .overdamped import OverdampedPlan, plan_overdamped, od_step, od_run
from .underdamped import (UnderdampedPlan, C_ABS, plan_underdamped,
                          ud_kernel_moments, ud_step, ud_run)
from .metrics import (w1_exact_1d, w1_sliced, wf_empirical, wf_sandwich_bounds,
                      second_moment_check)
from .coupling import (CouplingConstants, lyapunov_fn, lyapunov_eval,
                       od_coupled_step, od_coupled_run, ud_coupled_step,
                       ud_coupled_run, check_jump_nonpositive)
from .discretization import od_discretization_sweep, ud_discretization_sweep
from .reference import target_reference

__all__ = [
    "PotentialModel", "Quadratic", "GaussianMixture", "SmoothedDoubleWell",
    "make_potential", "load_potential", "audit_constants", "check_gradient_fd",
    "DistanceFn", "check_f_properties",
    "OverdampedPlan", "plan_overdamped", "od_step", "od_run",
    "UnderdampedPlan", "C_ABS", "plan_underdamped", "ud_kernel_moments",
    "ud_step", "ud_run",
    "w1_exact_1d", "w1_sliced", "wf_empirical", "wf_sandwich_bounds",
    "second_moment_check",
    "CouplingConstants", "lyapunov_fn", "lyapunov_eval", "od_coupled_step",
    "od_coupled_run", "ud_coupled_step", "ud_coupled_run",
    "check_jump_nonpositive",
    "od_discretization_sweep", "ud_discretization_sweep",
    "target_reference",
]
