"""Adjoint-capable linear operators and operator-norm estimation.

Every operator used by the solvers and problem builders goes through
:class:`LinearOperator`: a matrix-free pair of callables plus dimensions and
an optional cached norm bound. Builders cover dense matrices, pair
differences, 2-D forward differences, diagonal masks, scaling wrappers, and
the identity / zero operators needed by the algorithm reductions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import UsageError

# Multiplied onto every numerical norm estimate before it is trusted as an
# upper bound; the step-size rules need a true bound, not a point estimate.
NORM_SAFETY_FACTOR = 1.0 + 1e-3


@dataclass(frozen=True)
class LinearOperator:
    """Linear map A from R^in_dim to R^out_dim with an explicit adjoint.

    ``norm_hint``, when set, is an upper bound on the operator norm
    ``||A||_op`` (largest singular value).
    """

    in_dim: int
    out_dim: int
    matvec: Callable[[np.ndarray], np.ndarray]
    rmatvec: Callable[[np.ndarray], np.ndarray]
    norm_hint: Optional[float] = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Return A x."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise UsageError(
                f"operator expects input of length {self.in_dim}, got shape {x.shape}"
            )
        return self.matvec(x)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Return A^T y."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.out_dim,):
            raise UsageError(
                f"adjoint expects input of length {self.out_dim}, got shape {y.shape}"
            )
        return self.rmatvec(y)


@dataclass(frozen=True)
class NormEstimate:
    """Result of power iteration: the estimate and whether it converged."""

    value: float
    converged: bool
    iterations: int


def apply(op: LinearOperator, x: np.ndarray) -> np.ndarray:
    return op.apply(x)


def apply_adjoint(op: LinearOperator, y: np.ndarray) -> np.ndarray:
    return op.apply_adjoint(y)


def build_dense(matrix) -> LinearOperator:
    """Wrap a dense 2-D array as an operator."""
    m = np.array(matrix, dtype=float)
    if m.ndim != 2:
        raise UsageError("build_dense expects a 2-D array")
    out_dim, in_dim = m.shape
    return LinearOperator(
        in_dim=in_dim,
        out_dim=out_dim,
        matvec=lambda x: m @ x,
        rmatvec=lambda y: m.T @ y,
    )


def identity(dim: int) -> LinearOperator:
    return LinearOperator(dim, dim, lambda x: x.copy(), lambda y: y.copy(), norm_hint=1.0)


def build_zero(in_dim: int, out_dim: int) -> LinearOperator:
    """The zero map; used when the composite coupling term is absent."""
    return LinearOperator(
        in_dim,
        out_dim,
        lambda x: np.zeros(out_dim),
        lambda y: np.zeros(in_dim),
        norm_hint=0.0,
    )


def build_pair_difference(pairs, dim: int) -> LinearOperator:
    """Rows e_i - e_j for each 0-based column pair (i, j).

    Applied matrix-free: row r of the output is x[i_r] - x[j_r].
    """
    pairs = list(pairs)
    idx_i = np.array([p[0] for p in pairs], dtype=int)
    idx_j = np.array([p[1] for p in pairs], dtype=int)
    for i, j in pairs:
        if not (0 <= i < dim and 0 <= j < dim):
            raise UsageError(f"pair ({i},{j}) out of range for dim {dim}")
        if i == j:
            raise UsageError(f"pair ({i},{j}) must have distinct indices")

    def matvec(x):
        return x[idx_i] - x[idx_j]

    def rmatvec(y):
        out = np.zeros(dim)
        np.add.at(out, idx_i, y)
        np.subtract.at(out, idx_j, y)
        return out

    return LinearOperator(dim, len(pairs), matvec, rmatvec)


def build_forward_difference_2d(height: int, width: int) -> LinearOperator:
    """Forward differences of a row-major (height x width) image.

    Output stacks all horizontal differences, then all vertical ones:
    height*(width-1) + (height-1)*width rows. ||D||_op^2 <= 8.
    """
    if height < 1 or width < 1:
        raise UsageError("image dimensions must be positive")
    n_h = height * (width - 1)
    n_v = (height - 1) * width
    in_dim = height * width

    def matvec(x):
        img = x.reshape(height, width)
        dh = img[:, 1:] - img[:, :-1]
        dv = img[1:, :] - img[:-1, :]
        return np.concatenate([dh.ravel(), dv.ravel()])

    def rmatvec(y):
        dh = y[:n_h].reshape(height, width - 1)
        dv = y[n_h:].reshape(height - 1, width)
        out = np.zeros((height, width))
        out[:, 1:] += dh
        out[:, :-1] -= dh
        out[1:, :] += dv
        out[:-1, :] -= dv
        return out.ravel()

    return LinearOperator(in_dim, n_h + n_v, matvec, rmatvec)


def build_mask(keep) -> LinearOperator:
    """Square diagonal 0/1 operator keeping the flagged entries."""
    keep = np.asarray(keep, dtype=bool)
    diag = keep.astype(float)
    dim = keep.size
    hint = 1.0 if keep.any() else 0.0
    return LinearOperator(dim, dim, lambda x: diag * x, lambda y: diag * y, norm_hint=hint)


def build_scaled(op: LinearOperator, c: float) -> LinearOperator:
    """The operator x -> c * (op x); norm_hint scales by |c|."""
    hint = None if op.norm_hint is None else abs(c) * op.norm_hint
    return LinearOperator(
        op.in_dim,
        op.out_dim,
        lambda x: c * op.matvec(x),
        lambda y: c * op.rmatvec(y),
        norm_hint=hint,
    )


def estimate_op_norm(
    op: LinearOperator,
    tol: float = 1e-6,
    max_iters: int = 1000,
    seed: int = 0,
) -> NormEstimate:
    """Estimate ||A||_op by power iteration on A^T A.

    Stops when the relative change of the Rayleigh quotient drops below
    ``tol``. A non-converged run returns the best estimate with
    ``converged=False``. The caller must apply :data:`NORM_SAFETY_FACTOR`
    before using the value as an upper bound (see :func:`attach_norm_hint`).
    """
    if tol <= 0:
        raise UsageError("tol must be positive")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(op.in_dim)
    nz = np.linalg.norm(z)
    if nz == 0:
        return NormEstimate(0.0, True, 0)
    z = z / nz
    rayleigh = 0.0
    for it in range(1, max_iters + 1):
        q = op.matvec(z)
        new_rayleigh = float(q @ q)  # z is unit, so this is z^T A^T A z
        if new_rayleigh == 0.0:
            return NormEstimate(0.0, True, it)
        s = op.rmatvec(q)
        ns = np.linalg.norm(s)
        if ns == 0:
            return NormEstimate(np.sqrt(new_rayleigh), True, it)
        z = s / ns
        if it > 1 and abs(new_rayleigh - rayleigh) <= tol * new_rayleigh:
            return NormEstimate(float(np.sqrt(new_rayleigh)), True, it)
        rayleigh = new_rayleigh
    return NormEstimate(float(np.sqrt(rayleigh)), False, max_iters)


def attach_norm_hint(
    op: LinearOperator,
    tol: float = 1e-9,
    max_iters: int = 5000,
    seed: int = 0,
) -> LinearOperator:
    """Return a copy of ``op`` with norm_hint = safety factor * estimate.

    Exact hints already present are kept untouched.
    """
    if op.norm_hint is not None:
        return op
    est = estimate_op_norm(op, tol=tol, max_iters=max_iters, seed=seed)
    return replace(op, norm_hint=est.value * NORM_SAFETY_FACTOR)


def to_dense(op: LinearOperator) -> np.ndarray:
    """Materialize the operator column by column (desk-scale diagnostics)."""
    cols = np.zeros((op.out_dim, op.in_dim))
    e = np.zeros(op.in_dim)
    for i in range(op.in_dim):
        e[i] = 1.0
        cols[:, i] = op.matvec(e)
        e[i] = 0.0
    return cols
