"""Proximal-capable and smooth convex functions used by the solvers.

Two calling conventions exist side by side: plain elementwise prox formulas
(``soft_threshold``, ``prox_elastic_net_g``, ...) that tests can pit against
1-D minimization oracles, and :class:`ProxFunction` / :class:`SmoothFunction`
records that bundle a function with its prox or gradient plus the constants
(strong convexity, Lipschitz) that the step-size rules consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import UsageError
from .linops import NORM_SAFETY_FACTOR, LinearOperator, estimate_op_norm

# Indicator feasibility slack: value() treats points this close to the set
# as members, otherwise round-off would turn every diagnostic into +inf.
FEAS_TOL = 1e-12


@dataclass(frozen=True)
class ProxFunction:
    """Convex function queried through its scaled proximal map.

    ``prox(z, eta)`` returns argmin_x  (1/2)||x - z||^2 + eta * value(x).
    ``value`` may return +inf (indicators). ``conj_value``, when present,
    evaluates the convex conjugate of this function; a conjugate instance
    playing the role of f* uses it to report f(Ax) in diagnostics.
    """

    dim: int
    prox: Callable[[np.ndarray, float], np.ndarray]
    value: Callable[[np.ndarray], float]
    strong_convexity: float = 0.0
    conj_value: Optional[Callable[[np.ndarray], float]] = None


@dataclass(frozen=True)
class BoxPlusQuadratic(ProxFunction):
    """ell_inf-box indicator plus (quad_coeff/2)||.||^2, elementwise.

    radius = 0 collapses to the indicator of the origin, quad_coeff = 0 to a
    plain box indicator. The conjugate is the elementwise Huber-type penalty
    t -> radius*|t| - radius^2*quad_coeff/2 outside |t| <= radius*quad_coeff
    and t^2/(2*quad_coeff) inside, which the metrics module uses to evaluate
    the primal objective.
    """

    radius: float = 0.0
    quad_coeff: float = 0.0


@dataclass(frozen=True)
class SmoothFunction:
    """Convex function with value, gradient, and a Lipschitz gradient bound."""

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    strong_convexity: float = 0.0


# ---------------------------------------------------------------------------
# elementwise prox formulas


def soft_threshold(z: np.ndarray, lam: float) -> np.ndarray:
    """Elementwise shrinkage sgn(z) * max(|z| - lam, 0)."""
    if lam < 0:
        raise UsageError("threshold must be non-negative")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def prox_elastic_net_g(z: np.ndarray, eta: float, lam1: float, beta: float) -> np.ndarray:
    """Prox of lam1*beta*||x||_1 + lam1*(1-beta)/2*||x||^2.

    Shrink the ridge-scaled point: Soft(z/(1+c), eta*lam1*beta/(1+c)) with
    c = eta*lam1*(1-beta).
    """
    if eta <= 0:
        raise UsageError("eta must be positive")
    if lam1 < 0 or not (0.0 <= beta <= 1.0):
        raise UsageError("need lam1 >= 0 and beta in [0, 1]")
    c = eta * lam1 * (1.0 - beta)
    return soft_threshold(np.asarray(z, dtype=float) / (1.0 + c), eta * lam1 * beta / (1.0 + c))


def prox_huber_conjugate(z: np.ndarray, eta: float, lam2: float, lam3: float) -> np.ndarray:
    """Prox of the box indicator ||y||_inf <= lam2 plus ||y||^2/(2*lam2*lam3).

    Shrink toward the origin by the quadratic term, then clamp into the box:
    clamp(z / (1 + eta/(lam2*lam3)), +-lam2). The shrink-then-clamp order is
    exact here because both pieces are separable and the quadratic's
    unconstrained minimizer projects onto the interval.
    """
    if eta <= 0 or lam2 <= 0 or lam3 <= 0:
        raise UsageError("eta, lam2, lam3 must be positive")
    z = np.asarray(z, dtype=float)
    return np.clip(z / (1.0 + eta / (lam2 * lam3)), -lam2, lam2)


def prox_linf_ball(z: np.ndarray, eta: float, lam: float) -> np.ndarray:
    """Projection onto ||y||_inf <= lam; independent of eta."""
    if lam < 0:
        raise UsageError("radius must be non-negative")
    return np.clip(np.asarray(z, dtype=float), -lam, lam)


def prox_nonneg(z: np.ndarray, eta: float) -> np.ndarray:
    """Projection onto the non-negative orthant."""
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def prox_nonneg_plus_l2(z: np.ndarray, eta: float, mu: float) -> np.ndarray:
    """Prox of the non-negative indicator plus (mu/2)||x||^2."""
    if mu < 0:
        raise UsageError("mu must be non-negative")
    return np.maximum(np.asarray(z, dtype=float), 0.0) / (1.0 + eta * mu)


def huber_value(t: np.ndarray, lam3: float) -> np.ndarray:
    """Elementwise Huber penalty: (lam3/2) t^2 inside |t| <= 1/lam3, else |t| - 1/(2*lam3)."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    cut = 1.0 / lam3
    return np.where(a <= cut, 0.5 * lam3 * t * t, a - 0.5 * cut)


def prox_huber(z: np.ndarray, eta: float, lam2: float, lam3: float) -> np.ndarray:
    """Prox of the scaled Huber penalty lam2 * sum_i huber(z_i; lam3).

    Quadratic region shrinks multiplicatively, linear region shifts by
    eta*lam2. Used by tests as the partner of prox_huber_conjugate.
    """
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    quad = a <= eta * lam2 + 1.0 / lam3
    shrunk = z / (1.0 + eta * lam2 * lam3)
    shifted = np.sign(z) * (a - eta * lam2)
    return np.where(quad, shrunk, shifted)


def moreau_check(p: ProxFunction, p_conj: ProxFunction, z: np.ndarray, eta: float) -> float:
    """Residual of the Moreau identity for a claimed conjugate pair.

    Returns ||prox_{eta p}(z) + eta * prox_{p_conj / eta}(z / eta) - z||,
    which is zero exactly when p and p_conj are conjugates.
    """
    z = np.asarray(z, dtype=float)
    lhs = p.prox(z, eta) + eta * p_conj.prox(z / eta, 1.0 / eta)
    return float(np.linalg.norm(lhs - z))


# ---------------------------------------------------------------------------
# ProxFunction / SmoothFunction factories


def _box_quad_value(y, radius, quad_coeff):
    y = np.asarray(y, dtype=float)
    slack = FEAS_TOL * (1.0 + radius)
    if np.max(np.abs(y), initial=0.0) > radius + slack:
        return math.inf
    return 0.5 * quad_coeff * float(y @ y)


def _box_quad_conj_value(u, radius, quad_coeff):
    # Conjugate of box+quadratic: Huber-type (exactly radius*|u| when
    # quad_coeff = 0, and 0 when radius = 0).
    u = np.asarray(u, dtype=float)
    if radius == 0.0:
        return 0.0
    if quad_coeff == 0.0:
        return radius * float(np.sum(np.abs(u)))
    a = np.abs(u)
    cut = radius * quad_coeff
    vals = np.where(a <= cut, u * u / (2.0 * quad_coeff), radius * a - radius * radius * quad_coeff / 2.0)
    return float(np.sum(vals))


def box_plus_quadratic(dim: int, radius: float, quad_coeff: float = 0.0) -> BoxPlusQuadratic:
    """Box indicator of the given ell_inf radius plus an optional quadratic."""
    if radius < 0 or quad_coeff < 0:
        raise UsageError("radius and quad_coeff must be non-negative")

    def prox(z, eta):
        return np.clip(np.asarray(z, dtype=float) / (1.0 + eta * quad_coeff), -radius, radius)

    return BoxPlusQuadratic(
        dim=dim,
        prox=prox,
        value=lambda y: _box_quad_value(y, radius, quad_coeff),
        strong_convexity=quad_coeff,
        conj_value=lambda u: _box_quad_conj_value(u, radius, quad_coeff),
        radius=radius,
        quad_coeff=quad_coeff,
    )


def huber_conjugate(dim: int, lam2: float, lam3: float) -> BoxPlusQuadratic:
    """Conjugate of the smoothed ell_1 penalty lam2*J(.): box lam2 plus
    quadratic 1/(lam2*lam3), strongly convex with that constant."""
    if lam2 <= 0 or lam3 <= 0:
        raise UsageError("lam2 and lam3 must be positive")
    return box_plus_quadratic(dim, radius=lam2, quad_coeff=1.0 / (lam2 * lam3))


def linf_ball(dim: int, radius: float) -> BoxPlusQuadratic:
    """Indicator of ||y||_inf <= radius (conjugate of radius*||.||_1)."""
    return box_plus_quadratic(dim, radius=radius, quad_coeff=0.0)


def indicator_zero(dim: int) -> BoxPlusQuadratic:
    """Indicator of the origin; the conjugate of the zero function."""
    return box_plus_quadratic(dim, radius=0.0, quad_coeff=0.0)


def l1_norm(dim: int, lam: float) -> ProxFunction:
    """lam * ||x||_1 with soft-threshold prox."""
    if lam < 0:
        raise UsageError("lam must be non-negative")
    return ProxFunction(
        dim=dim,
        prox=lambda z, eta: soft_threshold(z, eta * lam),
        value=lambda x: lam * float(np.sum(np.abs(x))),
        strong_convexity=0.0,
        conj_value=lambda y: 0.0
        if np.max(np.abs(y), initial=0.0) <= lam + FEAS_TOL * (1.0 + lam)
        else math.inf,
    )


def elastic_net(dim: int, lam1: float, beta: float) -> ProxFunction:
    """lam1*beta*||x||_1 + lam1*(1-beta)/2*||x||^2; strongly convex with
    constant lam1*(1-beta)."""
    if lam1 < 0 or not (0.0 <= beta <= 1.0):
        raise UsageError("need lam1 >= 0 and beta in [0, 1]")

    def value(x):
        x = np.asarray(x, dtype=float)
        return lam1 * beta * float(np.sum(np.abs(x))) + 0.5 * lam1 * (1.0 - beta) * float(x @ x)

    return ProxFunction(
        dim=dim,
        prox=lambda z, eta: prox_elastic_net_g(z, eta, lam1, beta),
        value=value,
        strong_convexity=lam1 * (1.0 - beta),
    )


def scaled_huber(dim: int, lam2: float, lam3: float) -> ProxFunction:
    """lam2 * sum_i huber(x_i; lam3); test-side partner of huber_conjugate."""
    return ProxFunction(
        dim=dim,
        prox=lambda z, eta: prox_huber(z, eta, lam2, lam3),
        value=lambda x: lam2 * float(np.sum(huber_value(x, lam3))),
        strong_convexity=0.0,
    )


def nonneg(dim: int) -> ProxFunction:
    """Indicator of the non-negative orthant."""

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.0 if np.min(x, initial=0.0) >= -FEAS_TOL * (1.0 + np.max(np.abs(x), initial=0.0)) else math.inf

    return ProxFunction(dim=dim, prox=lambda z, eta: prox_nonneg(z, eta), value=value)


def nonneg_plus_l2(dim: int, mu: float) -> ProxFunction:
    """Non-negative indicator plus (mu/2)||x||^2, strongly convex with mu."""
    if mu < 0:
        raise UsageError("mu must be non-negative")
    base = nonneg(dim)

    def value(x):
        v = base.value(x)
        if math.isinf(v):
            return v
        x = np.asarray(x, dtype=float)
        return v + 0.5 * mu * float(x @ x)

    return ProxFunction(
        dim=dim,
        prox=lambda z, eta: prox_nonneg_plus_l2(z, eta, mu),
        value=value,
        strong_convexity=mu,
    )


def zero_function(dim: int) -> ProxFunction:
    """The zero function; its prox is the identity."""
    return ProxFunction(
        dim=dim,
        prox=lambda z, eta: np.asarray(z, dtype=float).copy(),
        value=lambda x: 0.0,
        conj_value=lambda y: 0.0
        if float(np.max(np.abs(y), initial=0.0)) <= FEAS_TOL
        else math.inf,
    )


def grad_least_squares(op: LinearOperator, b: np.ndarray) -> SmoothFunction:
    """h(x) = 1/2 ||W x - b||^2 as a SmoothFunction with L = ||W||_op^2.

    Uses the operator's norm_hint when present, otherwise estimates it and
    applies the safety factor.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (op.out_dim,):
        raise UsageError("b must match the operator's output dimension")
    if op.norm_hint is not None:
        sigma = op.norm_hint
    else:
        sigma = estimate_op_norm(op, tol=1e-9, max_iters=5000).value * NORM_SAFETY_FACTOR

    def value(x):
        r = op.matvec(np.asarray(x, dtype=float)) - b
        return 0.5 * float(r @ r)

    def grad(x):
        return op.rmatvec(op.matvec(np.asarray(x, dtype=float)) - b)

    return SmoothFunction(dim=op.in_dim, value=value, grad=grad, lipschitz_L=float(sigma) ** 2)


def zero_smooth(dim: int) -> SmoothFunction:
    """h = 0; lets the primal update become a pure prox step."""
    return SmoothFunction(
        dim=dim,
        value=lambda x: 0.0,
        grad=lambda x: np.zeros(dim),
        lipschitz_L=0.0,
    )
