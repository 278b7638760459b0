"""Accelerated Condat-Vu iteration, parameter schedules, and validators.

The single step :func:`acv_step` implements the momentum-augmented
primal-dual update

    u   = alpha*x + (1-alpha)*v
    y+  = prox_{gamma f*}(y + gamma*A(x + theta*(x - x_prev)))
    x+  = prox_{tau g}(x - tau*grad_h(u) - tau*A^T y+)
    v+  = alpha*x+ + (1-alpha)*v

together with the dual running average w+ = alpha*y+ + (1-alpha)*w. Setting
alpha = theta = 1 with constant steps recovers the classical Condat-Vu
iteration; a zero coupling operator recovers accelerated proximal gradient
descent. Schedules cover the convex regime, the two-phase strongly convex
regime (primal or dual), the strongly-convex-plus-smooth regime, and the
constant-step Condat-Vu baseline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from time import perf_counter
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import metrics
from .errors import DivergenceError, UsageError
from .functions import ProxFunction, SmoothFunction
from .linops import NORM_SAFETY_FACTOR, LinearOperator, estimate_op_norm

# Constraint sweeps accept violations up to this slack (scaled by magnitude).
SLACK = 1e-12


class StepParams(NamedTuple):
    gamma: float
    tau: float
    alpha: float
    theta: float


@dataclass(frozen=True)
class SaddleProblem:
    """The triple (f o A, g, h) plus the constants the schedules need.

    mu_g and mu_fstar are read from the function records; opnorm_A must be a
    true upper bound on ||A||_op (builders attach the safety factor).
    """

    f_conj: ProxFunction
    g: ProxFunction
    h: SmoothFunction
    A: LinearOperator
    L: float
    opnorm_A: float
    mu_g: float
    mu_fstar: float

    def __post_init__(self):
        if self.L != self.h.lipschitz_L:
            raise UsageError("L must equal h.lipschitz_L")
        if self.mu_g != self.g.strong_convexity:
            raise UsageError("mu_g must equal g.strong_convexity")
        if self.mu_fstar != self.f_conj.strong_convexity:
            raise UsageError("mu_fstar must equal f_conj.strong_convexity")
        if not (self.g.dim == self.h.dim == self.A.in_dim):
            raise UsageError("primal dimensions disagree")
        if self.f_conj.dim != self.A.out_dim:
            raise UsageError("dual dimension disagrees with the operator")


def make_saddle_problem(
    f_conj: ProxFunction,
    g: ProxFunction,
    h: SmoothFunction,
    A: LinearOperator,
    opnorm_A: Optional[float] = None,
) -> SaddleProblem:
    """Assemble a SaddleProblem, estimating ||A||_op if no bound is known."""
    if opnorm_A is None:
        if A.norm_hint is not None:
            opnorm_A = A.norm_hint
        else:
            opnorm_A = estimate_op_norm(A, tol=1e-9, max_iters=5000).value * NORM_SAFETY_FACTOR
    return SaddleProblem(
        f_conj=f_conj,
        g=g,
        h=h,
        A=A,
        L=h.lipschitz_L,
        opnorm_A=float(opnorm_A),
        mu_g=g.strong_convexity,
        mu_fstar=f_conj.strong_convexity,
    )


@dataclass(frozen=True)
class SolverState:
    x: np.ndarray
    x_prev: np.ndarray
    y: np.ndarray
    v: np.ndarray
    w: np.ndarray
    k: int = 0


def init_state(problem: SaddleProblem, x0=None, y0=None, v0=None) -> SolverState:
    """Default start: everything zero, x_prev = x0, w = y0."""
    x0 = np.zeros(problem.A.in_dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    y0 = np.zeros(problem.A.out_dim) if y0 is None else np.asarray(y0, dtype=float).copy()
    v0 = x0.copy() if v0 is None else np.asarray(v0, dtype=float).copy()
    return SolverState(x=x0, x_prev=x0.copy(), y=y0, v=v0, w=y0.copy(), k=0)


@dataclass(frozen=True)
class ParamSchedule:
    """Per-iteration parameters (gamma_k, tau_k, alpha_k, theta_k).

    regime is one of "general", "sc-primal", "sc-dual", "sc-smooth", "cv".
    warmup_T0 marks the switch index of two-phase schedules; the driver
    resets the extrapolation anchor there.
    """

    regime: str
    params: Callable[[int], StepParams]
    warmup_T0: Optional[int] = None

    def at(self, k: int) -> StepParams:
        return self.params(k)


def acv_step(problem: SaddleProblem, state: SolverState, params: StepParams) -> SolverState:
    """One accelerated Condat-Vu update; raises DivergenceError on NaN/Inf."""
    gamma, tau, alpha, theta = params
    if gamma <= 0 or tau <= 0:
        raise UsageError("step sizes must be positive")
    if not (0.0 < alpha <= 1.0):
        raise UsageError("alpha must lie in (0, 1]")
    x, y, v, w = state.x, state.y, state.v, state.w
    with np.errstate(over="ignore", invalid="ignore"):
        u = alpha * x + (1.0 - alpha) * v
        y_new = problem.f_conj.prox(y + gamma * problem.A.matvec(x + theta * (x - state.x_prev)), gamma)
        x_new = problem.g.prox(x - tau * problem.h.grad(u) - tau * problem.A.rmatvec(y_new), tau)
        v_new = alpha * x_new + (1.0 - alpha) * v
        w_new = alpha * y_new + (1.0 - alpha) * w
    if not (
        np.isfinite(x_new).all()
        and np.isfinite(y_new).all()
        and np.isfinite(v_new).all()
        and np.isfinite(w_new).all()
    ):
        raise DivergenceError(f"iterate diverged at step {state.k}", state=state)
    return SolverState(x=x_new, x_prev=x, y=y_new, v=v_new, w=w_new, k=state.k + 1)


# ---------------------------------------------------------------------------
# schedules


def schedule_general(L: float, opnorm_A: float) -> ParamSchedule:
    """Convex-regime schedule: alpha_k = 1/(k/2+1), growing equal steps.

    gamma_k = tau_k = (k+1) / (sqrt(2)*||A||_op*(k+1) + 4L). The (k+1)
    multiplier on the norm term keeps L*alpha_k*tau_k <= 1/2 and
    gamma_k*tau_k*||A||_op^2 <= 1/2 at every k, so the coupling constraint
    holds from the first iteration. theta_k = gamma_{k-1}/gamma_k with
    theta_0 = 1 (the k=0 extrapolation is inert since x_prev = x0).
    """
    if L < 0 or opnorm_A < 0:
        raise UsageError("constants must be non-negative")
    if L == 0 and opnorm_A == 0:
        raise UsageError("need L > 0 or ||A||_op > 0")
    root2_a = math.sqrt(2.0) * opnorm_A

    def gamma(k: int) -> float:
        return (k + 1) / (root2_a * (k + 1) + 4.0 * L)

    def params(k: int) -> StepParams:
        g = gamma(k)
        theta = 1.0 if k == 0 else gamma(k - 1) / g
        return StepParams(gamma=g, tau=g, alpha=1.0 / (k / 2.0 + 1.0), theta=theta)

    return ParamSchedule(regime="general", params=params)


def condat_vu_book_params(L: float, opnorm_A: float) -> ParamSchedule:
    """Constant-step Condat-Vu baseline: alpha = theta = 1.

    tau = 1/(L + 2*||A||_op) and gamma = (1 - L*tau)/(tau*||A||_op^2), which
    meets gamma*tau*||A||_op^2 <= 1 - L*tau. With no coupling the primal
    step falls back to 1/L and gamma is arbitrary.
    """
    if L < 0 or opnorm_A < 0:
        raise UsageError("constants must be non-negative")
    if opnorm_A > 0:
        tau = 1.0 / (L + 2.0 * opnorm_A)
        gamma = (1.0 - L * tau) / (tau * opnorm_A**2)
    else:
        if L == 0:
            raise UsageError("need L > 0 or ||A||_op > 0")
        tau = 1.0 / L
        gamma = 1.0
    p = StepParams(gamma=gamma, tau=tau, alpha=1.0, theta=1.0)
    return ParamSchedule(regime="cv", params=lambda k: p)


def compute_T0(L: float, mu_g: float, opnorm_A: float) -> int:
    """Warm-up length floor(sqrt(L/mu) + max(log(5L/(2||A||^2)), 0)/log(1+sqrt(mu/(4L)))).

    A vanishing operator norm would push the log term to infinity, so the
    squared norm is floored at 1e-12 (with a warning); the zero-coupling
    problem is better served by the convex-regime schedule anyway.
    """
    if L <= 0:
        raise UsageError("L must be positive")
    if mu_g <= 0:
        raise UsageError("strong convexity constant must be positive")
    a2 = opnorm_A**2
    if a2 < 1e-12:
        warnings.warn("operator norm is ~0; flooring it for the warm-up length")
        a2 = 1e-12
    log_term = max(math.log(5.0 * L / (2.0 * a2)), 0.0) / math.log(1.0 + math.sqrt(mu_g / (4.0 * L)))
    return int(math.floor(math.sqrt(L / mu_g) + log_term))


def _two_phase_schedule(L, mu, opnorm_A, regime, steady_mode):
    """Shared warm-up/steady construction for the strongly convex regimes.

    Returns the phase data in "primal orientation": the first step of each
    returned pair is the one tied to the strong convexity. The dual variant
    swaps the pair afterwards.
    """
    if L <= 0 or mu <= 0 or opnorm_A <= 0:
        raise UsageError("need L > 0, a positive strong convexity constant, and ||A||_op > 0")
    if steady_mode not in ("corrected", "literal"):
        raise UsageError(f"unknown steady_mode {steady_mode!r}")
    T0 = compute_T0(L, mu, opnorm_A)
    a2 = opnorm_A**2
    alpha0 = math.sqrt(mu / (4.0 * L))
    warm = StepParams(
        gamma=math.sqrt(mu * L) / (2.0 * a2),
        tau=1.0 / math.sqrt(mu * L),
        alpha=alpha0,
        theta=1.0 / (1.0 + alpha0),
    )
    if steady_mode == "corrected":
        # Growth offset 4*sqrt(L/mu); floored at 2 so alpha_j = 2/(j+m)
        # stays inside (0, 1] even when mu > 4L.
        m = max(4.0 * math.sqrt(L / mu), 2.0)
    else:
        # Alternate variant with the reciprocal offset 4*sqrt(mu/L). Kept
        # for the validator's --paper-literal sweep; it breaks the steady
        # coupling constraint (and alpha <= 1) once L >> mu.
        m = 4.0 * math.sqrt(mu / L)

    def steady_gamma(j: int) -> float:
        return mu * (j + m) / (8.0 * a2)

    def params(k: int) -> StepParams:
        if k < T0:
            return warm
        j = k - T0
        g = steady_gamma(j)
        theta = 1.0 if j == 0 else steady_gamma(j - 1) / g
        return StepParams(gamma=g, tau=1.0 / (2.0 * a2 * g), alpha=mu / (4.0 * a2 * g), theta=theta)

    return ParamSchedule(regime=regime, params=params, warmup_T0=T0)


def schedule_sc_primal(
    L: float, mu_g: float, opnorm_A: float, steady_mode: str = "corrected"
) -> ParamSchedule:
    """Two-phase schedule exploiting strong convexity of g.

    Warm-up (k < T0): constant gamma = sqrt(mu_g*L)/(2*||A||^2),
    tau = 1/sqrt(mu_g*L), alpha = sqrt(mu_g/(4L)), theta = 1/(1+alpha):
    linear decay with contraction theta. Steady (j = k - T0 >= 0): growing
    gamma_j = mu_g*(j + 4*sqrt(L/mu_g))/(8*||A||^2) with alpha, tau tied to
    it, giving O(1/T^2) decay.
    """
    return _two_phase_schedule(L, mu_g, opnorm_A, "sc-primal", steady_mode)


def schedule_sc_dual(
    L: float, mu_fstar: float, opnorm_A: float, steady_mode: str = "corrected"
) -> ParamSchedule:
    """Two-phase schedule exploiting strong convexity of f*.

    Mirror image of :func:`schedule_sc_primal` with the roles of gamma and
    tau interchanged and mu_fstar in place of mu_g: here the dual step
    grows and the primal step shrinks.
    """
    base = _two_phase_schedule(L, mu_fstar, opnorm_A, "sc-dual", steady_mode)

    def params(k: int) -> StepParams:
        p = base.at(k)
        return StepParams(gamma=p.tau, tau=p.gamma, alpha=p.alpha, theta=p.theta)

    return ParamSchedule(regime="sc-dual", params=params, warmup_T0=base.warmup_T0)


def schedule_sc_smooth(L: float, mu_g: float, mu_fstar: float, opnorm_A: float) -> ParamSchedule:
    """Constant linear-rate schedule for doubly strongly convex problems.

    With Lbar = ||A||_op^2/mu_fstar + L: gamma = sqrt(mu_g/(mu_fstar^2*Lbar)),
    tau = sqrt(1/(Lbar*mu_g)), alpha = sqrt(mu_g/Lbar), theta = 1/(1+alpha).
    The per-iteration contraction is theta.
    """
    if mu_g <= 0 or mu_fstar <= 0:
        raise UsageError("both strong convexity constants must be positive")
    if L < 0 or opnorm_A < 0:
        raise UsageError("constants must be non-negative")
    Lbar = opnorm_A**2 / mu_fstar + L
    if Lbar <= 0:
        raise UsageError("need L > 0 or ||A||_op > 0")
    alpha = math.sqrt(mu_g / Lbar)
    if alpha > 1.0:
        raise UsageError("mu_g exceeds the curvature bound Lbar; transfer the excess into h")
    p = StepParams(
        gamma=math.sqrt(mu_g / (mu_fstar**2 * Lbar)),
        tau=math.sqrt(1.0 / (Lbar * mu_g)),
        alpha=alpha,
        theta=1.0 / (1.0 + alpha),
    )
    return ParamSchedule(regime="sc-smooth", params=lambda k: p)


# ---------------------------------------------------------------------------
# validators


@dataclass(frozen=True)
class ConstraintFailure:
    k: int
    constraint: str
    violation: float


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a constraint sweep; empty failures means all pass."""

    checked_up_to: int
    constraints: tuple
    failures: tuple

    @property
    def ok(self) -> bool:
        return len(self.failures) == 0

    @property
    def first_failure(self) -> Optional[ConstraintFailure]:
        return min(self.failures, key=lambda f: f.k) if self.failures else None

    def failed_names(self):
        return sorted({f.constraint for f in self.failures})

    def summary(self) -> str:
        lines = []
        failed = {f.constraint: f for f in sorted(self.failures, key=lambda f: f.k, reverse=True)}
        for name in self.constraints:
            if name in failed:
                f = failed[name]
                lines.append(f"FAIL {name} (first at k={f.k}, violation {f.violation:.3e})")
            else:
                lines.append(f"pass {name}")
        return "\n".join(lines)


def _params_arrays(schedule: ParamSchedule, k_max: int):
    ps = [schedule.at(k) for k in range(k_max + 2)]
    return (
        np.array([p.gamma for p in ps]),
        np.array([p.tau for p in ps]),
        np.array([p.alpha for p in ps]),
        np.array([p.theta for p in ps]),
    )


def _collect(failures, ks, name, lhs, rhs):
    """Record indices where lhs > rhs beyond the slack tolerance."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    mag = np.maximum(
        1.0,
        np.maximum(
            np.where(np.isfinite(lhs), np.abs(lhs), 0.0),
            np.where(np.isfinite(rhs), np.abs(rhs), 0.0),
        ),
    )
    with np.errstate(invalid="ignore"):
        bad = ~(lhs <= rhs + SLACK * mag)  # catches NaN as a failure too
    for i in np.nonzero(bad)[0]:
        failures.append(ConstraintFailure(int(ks[i]), name, float(lhs[i] - rhs[i])))


def _basic_checks(failures, g, t, al, th, N):
    bad_alpha = np.nonzero(~((al[:N] > 0.0) & (al[:N] <= 1.0 + SLACK)))[0]
    for i in bad_alpha:
        failures.append(ConstraintFailure(int(i), "alpha-range", float(max(al[i] - 1.0, -al[i]))))
    bad_step = np.nonzero(~((g[:N] > 0.0) & (t[:N] > 0.0) & (th[:N] >= 0.0)))[0]
    for i in bad_step:
        failures.append(ConstraintFailure(int(i), "positive-steps", float(max(-g[i], -t[i], -th[i]))))


GENERAL_CONSTRAINTS = (
    "alpha-range",
    "positive-steps",
    "momentum-weight",  # gamma_{k+1}(1-alpha_{k+1})/alpha_{k+1} <= gamma_k/alpha_k
    "step-ratio",       # gamma_{k+1}/tau_{k+1} <= gamma_k/tau_k
    "coupling",         # L*alpha_k*tau_k + gamma_k*tau_k*||A||^2 <= 1
    "theta-ratio",      # theta_k = gamma_{k-1}/gamma_k
)


def validate_general(schedule: ParamSchedule, L: float, opnorm_A: float, k_max: int = 10_000) -> ValidationReport:
    """Sweep the convex-regime constraints for k = 0..k_max."""
    g, t, al, th = _params_arrays(schedule, k_max)
    N = k_max + 1
    failures = []
    _basic_checks(failures, g, t, al, th, N)
    ks = np.arange(N)
    with np.errstate(divide="ignore", invalid="ignore"):
        _collect(failures, ks, "momentum-weight", g[1 : N + 1] * (1.0 - al[1 : N + 1]) / al[1 : N + 1], g[:N] / al[:N])
        _collect(failures, ks, "step-ratio", g[1 : N + 1] / t[1 : N + 1], g[:N] / t[:N])
        _collect(failures, ks, "coupling", L * al[:N] * t[:N] + g[:N] * t[:N] * opnorm_A**2, np.ones(N))
        _collect(failures, ks[1:], "theta-ratio", np.abs(th[1:N] * g[1:N] - g[: N - 1]), SLACK * np.maximum(1.0, g[: N - 1]))
    return ValidationReport(k_max, GENERAL_CONSTRAINTS, tuple(failures))


SC_CONSTRAINTS = (
    "alpha-range",
    "positive-steps",
    "warmup-coupling",   # 1/theta <= (1 - L*alpha*tau)/(gamma*tau*theta^2*||A||^2)
    "warmup-momentum",   # 1/theta <= 1/(1-alpha)
    "warmup-strong",     # 1/theta <= 1 + mu*tau
    "steady-momentum",   # gamma_{k+1}(1-alpha_{k+1})/alpha_{k+1} <= gamma_k/alpha_k
    "steady-step-ratio", # gamma_{k+1}/tau_{k+1} <= gamma_k(1+mu*tau_k)/tau_k
    "steady-coupling",   # ||A||^2/2 + L*alpha_k/(2*gamma_k) <= 1/(2*tau_k*gamma_k)
    "theta-ratio",       # theta_k = gamma_{k-1}/gamma_k within the steady phase
)


def validate_sc(
    schedule: ParamSchedule, L: float, mu_g: float, opnorm_A: float, k_max: int = 10_000
) -> ValidationReport:
    """Sweep the two-phase strongly convex constraints for k = 0..k_max.

    Warm-up indices (k < warmup_T0) get the three warm-up conditions, with
    the coupling condition in its theta^2-weighted form; every index gets
    the two cross-index monotonicity conditions (which are exactly the
    warm-up-phase trivialities while parameters are constant, and cover the
    phase boundary automatically); steady indices additionally get the
    coupling condition. The theta = gamma-ratio identity is enforced inside
    the steady phase only; the switch index restarts the extrapolation, so
    its theta is unconstrained.
    """
    T0 = schedule.warmup_T0 or 0
    g, t, al, th = _params_arrays(schedule, k_max)
    N = k_max + 1
    a2 = opnorm_A**2
    failures = []
    _basic_checks(failures, g, t, al, th, N)
    ks = np.arange(N)
    nw = min(T0, N)  # number of warm-up indices inside the sweep
    with np.errstate(divide="ignore", invalid="ignore"):
        if nw > 0:
            gw, tw, alw, thw = g[:nw], t[:nw], al[:nw], th[:nw]
            denom = gw * tw * thw**2 * a2
            rhs = np.where(denom > 0, (1.0 - L * alw * tw) / np.where(denom > 0, denom, 1.0), np.inf)
            rhs = np.where(1.0 - L * alw * tw > 0, rhs, -np.inf)
            _collect(failures, ks[:nw], "warmup-coupling", 1.0 / thw, rhs)
            _collect(failures, ks[:nw], "warmup-momentum", 1.0 - alw, thw)
            _collect(failures, ks[:nw], "warmup-strong", 1.0 / thw, 1.0 + mu_g * tw)
        _collect(failures, ks, "steady-momentum", g[1 : N + 1] * (1.0 - al[1 : N + 1]) / al[1 : N + 1], g[:N] / al[:N])
        _collect(
            failures,
            ks,
            "steady-step-ratio",
            g[1 : N + 1] / t[1 : N + 1],
            g[:N] * (1.0 + mu_g * t[:N]) / t[:N],
        )
        if T0 <= k_max:
            s = slice(T0, N)
            _collect(
                failures,
                ks[s],
                "steady-coupling",
                a2 / 2.0 + L * al[s] / (2.0 * g[s]),
                1.0 / (2.0 * t[s] * g[s]),
            )
            if T0 + 1 <= k_max:
                s2 = slice(T0 + 1, N)
                _collect(
                    failures,
                    ks[s2],
                    "theta-ratio",
                    np.abs(th[s2] * g[s2] - g[T0 : N - 1]),
                    SLACK * np.maximum(1.0, g[T0 : N - 1]),
                )
    return ValidationReport(k_max, SC_CONSTRAINTS, tuple(failures))


def validate_sc_dual(
    schedule: ParamSchedule, L: float, mu_fstar: float, opnorm_A: float, k_max: int = 10_000
) -> ValidationReport:
    """Dual-regime sweep: the primal-regime conditions with gamma and tau
    interchanged and mu_fstar in place of mu_g."""

    def swapped(k: int) -> StepParams:
        p = schedule.at(k)
        return StepParams(gamma=p.tau, tau=p.gamma, alpha=p.alpha, theta=p.theta)

    view = ParamSchedule(regime=schedule.regime, params=swapped, warmup_T0=schedule.warmup_T0)
    return validate_sc(view, L, mu_fstar, opnorm_A, k_max)


SC_SMOOTH_CONSTRAINTS = (
    "alpha-range",
    "positive-steps",
    "momentum",      # 1/theta <= 1/(1-alpha)
    "dual-strong",   # 1/theta <= 1 + mu_fstar*gamma
    "primal-strong", # 1/theta <= 1 + mu_g*tau
    "coupling",      # 1/theta <= (1 - L*alpha*tau)/(gamma*tau*theta^2*||A||^2)
)


def validate_sc_smooth(
    params: StepParams, L: float, mu_g: float, mu_fstar: float, opnorm_A: float
) -> ValidationReport:
    """Check the four constant-parameter linear-rate conditions."""
    gamma, tau, alpha, theta = params
    failures = []
    one = np.ones(1)
    _basic_checks(failures, one * gamma, one * tau, one * alpha, one * theta, 1)
    ks = np.zeros(1, dtype=int)
    _collect(failures, ks, "momentum", np.array([1.0 - alpha]), np.array([theta]))
    _collect(failures, ks, "dual-strong", np.array([1.0 / theta]), np.array([1.0 + mu_fstar * gamma]))
    _collect(failures, ks, "primal-strong", np.array([1.0 / theta]), np.array([1.0 + mu_g * tau]))
    denom = gamma * tau * theta**2 * opnorm_A**2
    if 1.0 - L * alpha * tau <= 0:
        rhs = -math.inf
    elif denom == 0:
        rhs = math.inf
    else:
        rhs = (1.0 - L * alpha * tau) / denom
    _collect(failures, ks, "coupling", np.array([1.0 / theta]), np.array([rhs]))
    return ValidationReport(0, SC_SMOOTH_CONSTRAINTS, tuple(failures))


def validate_schedule(schedule: ParamSchedule, problem: SaddleProblem, k_max: int = 10_000) -> ValidationReport:
    """Dispatch to the regime-appropriate validator."""
    if schedule.regime in ("general", "cv"):
        return validate_general(schedule, problem.L, problem.opnorm_A, k_max)
    if schedule.regime == "sc-primal":
        return validate_sc(schedule, problem.L, problem.mu_g, problem.opnorm_A, k_max)
    if schedule.regime == "sc-dual":
        return validate_sc_dual(schedule, problem.L, problem.mu_fstar, problem.opnorm_A, k_max)
    if schedule.regime == "sc-smooth":
        return validate_sc_smooth(
            schedule.at(0), problem.L, problem.mu_g, problem.mu_fstar, problem.opnorm_A
        )
    raise UsageError(f"unknown regime {schedule.regime!r}")


# ---------------------------------------------------------------------------
# driver


def run(
    problem: SaddleProblem,
    schedule: ParamSchedule,
    init: Optional[SolverState] = None,
    T_max: int = 0,
    log_every: int = 1,
    reference_objective: Optional[float] = None,
    gap_box=None,
    callbacks=(),
):
    """Run T_max accelerated steps, logging a convergence record.

    The objective (and optional gaps) are recorded at the averaged primal
    iterate v_k, which is the sequence the convergence guarantees certify.
    Wall time is accumulated around the step call only, so diagnostics do
    not distort timing. Two-phase schedules restart the extrapolation
    anchor (x_prev := x) at the warm-up boundary. A NaN/Inf iterate raises
    DivergenceError carrying the partial record. Callbacks run after each
    step; a callback returning True stops the run early.
    """
    if T_max < 0:
        raise UsageError("T_max must be non-negative")
    if log_every < 1:
        raise UsageError("log_every must be >= 1")
    state = init_state(problem) if init is None else init
    record = metrics.ConvergenceRecord()
    step_seconds = 0.0

    def log_row(st: SolverState):
        with np.errstate(over="ignore", invalid="ignore"):
            obj = metrics.primal_objective(problem, st.v)
        if not math.isfinite(obj):
            # finite iterates can still overflow the quadratic term
            raise DivergenceError(
                f"objective became non-finite at step {st.k}", state=st, record=record
            )
        gap = None
        if reference_objective is not None:
            gap = metrics.gap_vs_reference(obj, reference_objective)
        pd = None
        if gap_box is not None:
            pd = metrics.pd_gap_box(problem, st.v, st.w, gap_box)
        record.append(
            k=st.k,
            wall_time_s=step_seconds,
            objective=obj,
            gap_ref=gap,
            pd_gap=pd,
            iterate_norm=float(np.linalg.norm(st.v)),
        )

    log_row(state)
    stop = False
    for k in range(T_max):
        if schedule.warmup_T0 is not None and k == schedule.warmup_T0 and k > 0:
            state = replace(state, x_prev=state.x)
        p = schedule.at(k)
        tic = perf_counter()
        try:
            state = acv_step(problem, state, p)
        except DivergenceError as err:
            raise DivergenceError(str(err), state=err.state, record=record) from None
        step_seconds += perf_counter() - tic
        for cb in callbacks:
            if cb(state):
                stop = True
        if state.k % log_every == 0 or state.k == T_max or stop:
            log_row(state)
        if stop:
            break
    return state, record
