"""Bregman proximal gradient methods for sparse measure recovery.

Solves F(f) = R(integral of Phi f) + H(f) over densities on discretized
periodic domains, in the geometry of a chosen distance-generating
function (power, entropy or hyperbolic), with plain and accelerated
proximal gradient methods and a benchmark harness for their
convergence-rate theory.
"""

from .analysis import (
    RateModel,
    classify_setting,
    fit_rate,
    mollify,
    psi_envelope,
    reference_inf,
    theoretical_exponent,
)
from .dgf import (
    EntropyDgf,
    HyperbolicDgf,
    PowerDgf,
    bregman_div,
    parse_dgf,
    sc_constant,
    step_size,
)
from .grid import (
    Density,
    Grid,
    ball_mass,
    circle_grid,
    dirac_density,
    geodesic_dist,
    torus_grid,
    uniform_density,
)
from .objective import (
    Problem,
    Regularizer,
    SmoothObjective,
    build_problem,
    deconv_problem,
    eval_F,
    eval_G,
    grad_potential,
    lb_problem,
    nonneg_tv,
    parse_regularizer,
    relu_problem,
    simplex,
    tv,
    tv_ball,
)
from .prox import MirrorState, bregman_step, kkt_residual, soft_threshold, solve_kappa
from .solver import SolverConfig, Trace, gamma_next, run, run_apgm, run_pgm
from .verify import (
    CheckResult,
    entropy_closed_form_check,
    fd_gradient_check,
    gamma_bound_check,
    kkt_sweep,
    mirror_flow_equivalence,
    pinsker_sample,
    run_all_checks,
)

__version__ = "0.1.0"

__all__ = [
    "RateModel", "classify_setting", "fit_rate", "mollify", "psi_envelope",
    "reference_inf", "theoretical_exponent",
    "EntropyDgf", "HyperbolicDgf", "PowerDgf", "bregman_div", "parse_dgf",
    "sc_constant", "step_size",
    "Density", "Grid", "ball_mass", "circle_grid", "dirac_density",
    "geodesic_dist", "torus_grid", "uniform_density",
    "Problem", "Regularizer", "SmoothObjective", "build_problem",
    "deconv_problem", "eval_F", "eval_G", "grad_potential", "lb_problem",
    "nonneg_tv", "parse_regularizer", "relu_problem", "simplex", "tv", "tv_ball",
    "MirrorState", "bregman_step", "kkt_residual", "soft_threshold", "solve_kappa",
    "SolverConfig", "Trace", "gamma_next", "run", "run_apgm", "run_pgm",
    "CheckResult", "entropy_closed_form_check", "fd_gradient_check",
    "gamma_bound_check", "kkt_sweep", "mirror_flow_equivalence",
    "pinsker_sample", "run_all_checks",
]
