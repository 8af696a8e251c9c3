"""Numerical toolkit for hypoelliptic Ornstein-Uhlenbeck semigroups on
step-2 Carnot groups: exact gamma calculus on truncated Taylor expansions,
curvature-type lower bounds and their constants, seeded Monte Carlo
samplers for the semigroup and its invariant measure, Carnot-Caratheodory
distances, and statistical checks of the resulting functional inequalities.
"""

__version__ = "0.1.0"

from .errors import CarnotouError
from .group import (
    GroupSpec,
    ValidatedSpec,
    Point,
    Frame,
    builtin_heisenberg,
    heisenberg,
    validate_spec,
    load_group_spec,
    group_mul,
    group_inv,
    dilate,
    frame_at,
    origin,
)
from .constants import (
    CDConstants,
    RatePlan,
    carnot_ou_constants,
    harnack_coefficient,
    kappa,
    lambda_eps,
    optimal_eps_for_time,
    prefactor_C,
    rho2,
)
from .gamma import (
    OperatorContext,
    apply_L,
    carre_oracle,
    cd_slack,
    cd_slack_sweep,
    check_A2,
    check_lyapunov,
    gamma,
    gamma2,
    gamma2Z,
    gammaZ,
    make_corpus,
)
from .reports import CheckReport, Estimate
from .simulate import (
    PathEnsemble,
    SimConfig,
    estimate_entropy_decay,
    estimate_gradient_decay,
    estimate_mu_integral,
    estimate_qt_mu_integral,
    estimate_variance_decay,
    mehler_qt,
    sample_heat,
    sample_invariant,
    sde_qt,
)
from .distance import (
    DistanceResult,
    distance,
    estimate_D2,
    estimate_exp_integrability,
    heis_distance,
    homogeneous_bounds,
)
from .checks import (
    check_entropy_decay,
    check_L2_decay,
    check_log_harnack,
    check_logsob,
    check_poincare,
    check_reverse_logsob,
    check_reverse_poincare,
    check_wang_harnack,
    estimate_Nt,
    run_checks,
)

__all__ = [
    "CarnotouError",
    "GroupSpec",
    "ValidatedSpec",
    "Point",
    "Frame",
    "builtin_heisenberg",
    "heisenberg",
    "validate_spec",
    "load_group_spec",
    "group_mul",
    "group_inv",
    "dilate",
    "frame_at",
    "origin",
    "CDConstants",
    "RatePlan",
    "carnot_ou_constants",
    "harnack_coefficient",
    "kappa",
    "lambda_eps",
    "optimal_eps_for_time",
    "prefactor_C",
    "rho2",
    "OperatorContext",
    "apply_L",
    "carre_oracle",
    "cd_slack",
    "cd_slack_sweep",
    "check_A2",
    "check_lyapunov",
    "gamma",
    "gamma2",
    "gamma2Z",
    "gammaZ",
    "make_corpus",
    "CheckReport",
    "Estimate",
    "PathEnsemble",
    "SimConfig",
    "estimate_entropy_decay",
    "estimate_gradient_decay",
    "estimate_mu_integral",
    "estimate_qt_mu_integral",
    "estimate_variance_decay",
    "mehler_qt",
    "sample_heat",
    "sample_invariant",
    "sde_qt",
    "DistanceResult",
    "distance",
    "estimate_D2",
    "estimate_exp_integrability",
    "heis_distance",
    "homogeneous_bounds",
    "check_entropy_decay",
    "check_L2_decay",
    "check_log_harnack",
    "check_logsob",
    "check_poincare",
    "check_reverse_logsob",
    "check_reverse_poincare",
    "check_wang_harnack",
    "estimate_Nt",
    "run_checks",
]
