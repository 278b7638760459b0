"""Accelerated Condat-Vu primal-dual solver and rate benchmark tools."""

from .errors import DivergenceError, ScheduleValidationError, UsageError
from .functions import (
    BoxPlusQuadratic,
    ProxFunction,
    SmoothFunction,
    box_plus_quadratic,
    elastic_net,
    grad_least_squares,
    huber_conjugate,
    indicator_zero,
    l1_norm,
    linf_ball,
    moreau_check,
    nonneg,
    nonneg_plus_l2,
    scaled_huber,
    zero_function,
    zero_smooth,
)
from .linops import (
    LinearOperator,
    NormEstimate,
    attach_norm_hint,
    build_dense,
    build_forward_difference_2d,
    build_mask,
    build_pair_difference,
    build_scaled,
    build_zero,
    estimate_op_norm,
    identity,
    to_dense,
)
from .metrics import (
    ConvergenceRecord,
    GapBox,
    default_gap_box,
    fit_linear_rate,
    fit_rate_slope,
    gap_vs_reference,
    lagrangian,
    pd_gap_box,
    primal_objective,
)
from .solver import (
    ParamSchedule,
    SaddleProblem,
    SolverState,
    StepParams,
    ValidationReport,
    acv_step,
    compute_T0,
    condat_vu_book_params,
    init_state,
    make_saddle_problem,
    run,
    schedule_general,
    schedule_sc_dual,
    schedule_sc_primal,
    schedule_sc_smooth,
    validate_schedule,
)

__version__ = "0.1.0"
