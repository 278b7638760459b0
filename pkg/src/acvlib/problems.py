"""Benchmark problem builders: fused elastic net and imaging reconstruction.

Both families assemble a SaddleProblem for min f(Ax) + g(x) + h(x):

  fused elastic net:  h = 1/2||Wx - b||^2, g = elastic net,
                      A = pairwise differences over correlated feature pairs,
                      f = lam2 * (l1 or its Huber smoothing)
  imaging:            h = 1/2||Mx - b||^2 with M a mask or blur,
                      g = nonnegativity (optionally + l2), A = D/rho1,
                      f = indicator-conjugate giving lam1*||Dx||_1

The dual rescaling factor rho1 divides the difference operator and dilates
the dual ball radius by the same factor, leaving the primal problem
unchanged while shrinking the coupling norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .functions import (
    elastic_net,
    grad_least_squares,
    huber_conjugate,
    linf_ball,
    nonneg,
    nonneg_plus_l2,
)
from .linops import (
    LinearOperator,
    attach_norm_hint,
    build_dense,
    build_forward_difference_2d,
    build_mask,
    build_pair_difference,
    build_scaled,
)
from .solver import SaddleProblem, make_saddle_problem


@dataclass(frozen=True)
class FusedElasticNetSpec:
    """Regression data plus the regularization constants.

    smoothed=True replaces the l1 fusion penalty by its Huber smoothing
    with parameter lambda3, which makes the conjugate strongly convex with
    constant 1/(lambda2*lambda3). smoothed=False never touches lambda3.
    """

    W: np.ndarray
    b: np.ndarray
    lambda1: float
    lambda2: float
    lambda3: float = 1e3
    beta: float = 0.5
    smoothed: bool = False
    pair_fraction: float = 0.10

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
            raise UsageError("W must be n x d with b of length n")
        if min(self.lambda1, self.lambda2) < 0:
            raise UsageError("lambda1 and lambda2 must be non-negative")
        if not (0.0 <= self.beta <= 1.0):
            raise UsageError("beta must lie in [0, 1]")
        if self.smoothed and self.lambda2 > 0 and self.lambda3 <= 0:
            raise UsageError("smoothing needs lambda3 > 0")
        if not (0.0 < self.pair_fraction <= 1.0):
            raise UsageError("pair_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class ImagingSpec:
    """Flattened observed image plus forward-model and penalty choices.

    forward is "mask" (random inpainting mask keeping keep_fraction of the
    pixels) or "blur" (averaging stencil whose half-width grows from 1 at
    the image center to blur_half_width at the corners). mu_g > 0 adds an
    l2 term to the nonnegativity constraint.
    """

    height: int
    width: int
    observed: np.ndarray
    forward: str = "mask"
    keep_fraction: float = 0.25
    blur_half_width: int = 2
    lambda1: float = 0.1
    mu_g: float = 0.0
    rho1: float = 1.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise UsageError("image dimensions must be positive")
        obs = np.asarray(self.observed, dtype=float)
        if obs.shape != (self.height * self.width,):
            raise UsageError("observed must be a flat vector of length height*width")
        if self.forward not in ("mask", "blur"):
            raise UsageError(f"unknown forward model {self.forward!r}")
        if not (0.0 < self.keep_fraction <= 1.0):
            raise UsageError("keep_fraction must lie in (0, 1]")
        if self.blur_half_width < 1:
            raise UsageError("blur_half_width must be >= 1")
        if self.lambda1 < 0 or self.mu_g < 0:
            raise UsageError("lambda1 and mu_g must be non-negative")
        if self.rho1 <= 0:
            raise UsageError("rho1 must be positive")


def build_pair_index(W, fraction):
    """Unordered column pairs ranked by |Pearson correlation|.

    Returns the ceil(fraction * d(d-1)/2) top pairs, ties broken by
    lexicographic (i, j). Constant columns get correlation 0, which keeps
    the returned count exact. The ranking is invariant under positive
    per-column rescaling, so it does not matter whether W was normalized
    first.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] < 2:
        raise UsageError("need a matrix with at least two columns")
    if not (0.0 < fraction <= 1.0):
        raise UsageError("fraction must lie in (0, 1]")
    d = W.shape[1]
    centered = W - W.mean(axis=0)
    norms = np.linalg.norm(centered, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    unit = centered / safe
    corr = unit.T @ unit
    corr[norms == 0, :] = 0.0
    corr[:, norms == 0] = 0.0
    ii, jj = np.triu_indices(d, k=1)
    scores = np.abs(corr[ii, jj])
    # triu_indices is lexicographic, so a stable sort keeps the tie rule
    order = np.argsort(-scores, kind="stable")
    keep = math.ceil(fraction * d * (d - 1) / 2)
    return [(int(ii[t]), int(jj[t])) for t in order[:keep]]


def build_fused_elastic_net(spec: FusedElasticNetSpec) -> SaddleProblem:
    """Assemble 1/2||Wx-b||^2 + lam1*beta*||x||_1 + lam1*(1-beta)/2*||x||^2
    + lam2*J(Fx) with F differencing the most correlated feature pairs."""
    W = np.asarray(spec.W, dtype=float)
    b = np.asarray(spec.b, dtype=float)
    d = W.shape[1]
    pairs = build_pair_index(W, spec.pair_fraction)
    A = attach_norm_hint(build_pair_difference(pairs, d))
    h = grad_least_squares(attach_norm_hint(build_dense(W)), b)
    g = elastic_net(d, spec.lambda1, spec.beta)
    m = len(pairs)
    if spec.lambda2 == 0:
        f_conj = linf_ball(m, 0.0)  # f vanishes; the coupling is inert
    elif spec.smoothed:
        f_conj = huber_conjugate(m, spec.lambda2, spec.lambda3)
    else:
        f_conj = linf_ball(m, spec.lambda2)
    return make_saddle_problem(f_conj, g, h, A)


def _reflect(i, n):
    while i < 0 or i >= n:
        i = -i - 1 if i < 0 else 2 * n - 1 - i
    return i


def build_blur(height: int, width: int, half_width: int) -> LinearOperator:
    """Dense averaging operator with a radially growing box stencil.

    Each output pixel averages a (2w+1) x (2w+1) window with reflective
    boundary handling, where w grows linearly from 1 at the image center
    to half_width at the corners, emulating an out-of-focus blur. Every
    row is non-negative and sums to 1.
    """
    if half_width < 1:
        raise UsageError("half_width must be >= 1")
    n = height * width
    mat = np.zeros((n, n))
    cr, cc = (height - 1) / 2.0, (width - 1) / 2.0
    max_rad = max(math.hypot(cr, cc), 1e-12)
    for r in range(height):
        for c in range(width):
            dist = math.hypot(r - cr, c - cc) / max_rad
            w = 1 + int(round((half_width - 1) * dist))
            weight = 1.0 / (2 * w + 1) ** 2
            row = r * width + c
            for dr in range(-w, w + 1):
                rr = _reflect(r + dr, height)
                for dc in range(-w, w + 1):
                    mat[row, rr * width + _reflect(c + dc, width)] += weight
    return build_dense(mat)


def mask_pattern(n_pixels: int, keep_fraction: float, seed: int) -> np.ndarray:
    """Boolean keep mask with exactly round(keep_fraction * n) True entries."""
    n_keep = int(round(keep_fraction * n_pixels))
    keep = np.zeros(n_pixels, dtype=bool)
    perm = np.random.default_rng(seed).permutation(n_pixels)
    keep[perm[:n_keep]] = True
    return keep


def imaging_forward(spec: ImagingSpec, seed: int = 0) -> LinearOperator:
    """The forward model M of an imaging spec (mask or blur)."""
    n = spec.height * spec.width
    if spec.forward == "mask":
        return build_mask(mask_pattern(n, spec.keep_fraction, seed))
    return attach_norm_hint(build_blur(spec.height, spec.width, spec.blur_half_width))


def build_imaging(spec: ImagingSpec, seed: int = 0) -> SaddleProblem:
    """Assemble 1/2||Mx-b||^2 + lam1*||Dx||_1 + iota_{x>=0} (+ mu_g/2||x||^2).

    The coupling uses A = D/rho1 with the dual ball radius dilated to
    lam1*rho1, which leaves the primal objective independent of rho1 while
    dividing ||A||_op by it.
    """
    n = spec.height * spec.width
    M = imaging_forward(spec, seed)
    h = grad_least_squares(M, np.asarray(spec.observed, dtype=float))
    g = nonneg(n) if spec.mu_g == 0 else nonneg_plus_l2(n, spec.mu_g)
    D = attach_norm_hint(build_forward_difference_2d(spec.height, spec.width))
    A = build_scaled(D, 1.0 / spec.rho1)
    f_conj = linf_ball(A.out_dim, spec.lambda1 * spec.rho1)
    return make_saddle_problem(f_conj, g, h, A)


def synthetic_regression(n_samples: int, n_features: int, density: float = 0.2,
                         noise_std: float = 0.1, seed: int = 0):
    """Seeded Gaussian design, sparse ground truth, noisy labels.

    Returns (W, b, x_true). Groups of adjacent columns share a latent
    factor so that strongly correlated pairs exist for the fusion penalty
    to act on.
    """
    if n_samples < 1 or n_features < 1:
        raise UsageError("need positive sizes")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n_samples, n_features))
    # correlate columns in blocks of 3 via a shared factor
    for start in range(0, n_features - 1, 3):
        block = slice(start, min(start + 3, n_features))
        factor = rng.standard_normal(n_samples)[:, None]
        W[:, block] = 0.7 * factor + 0.3 * W[:, block]
    x_true = np.zeros(n_features)
    n_active = max(1, int(round(density * n_features)))
    support = rng.choice(n_features, size=n_active, replace=False)
    x_true[support] = rng.standard_normal(n_active)
    b = W @ x_true + noise_std * rng.standard_normal(n_samples)
    return W, b, x_true


def synthetic_image(height: int, width: int, seed: int = 0, n_blocks: int = 6) -> np.ndarray:
    """Flat piecewise-constant non-negative test image with values in [0, 1]."""
    rng = np.random.default_rng(seed)
    img = np.full((height, width), 0.1)
    for _ in range(n_blocks):
        r0 = rng.integers(0, height)
        c0 = rng.integers(0, width)
        r1 = min(height, r0 + int(rng.integers(1, max(2, height // 2))))
        c1 = min(width, c0 + int(rng.integers(1, max(2, width // 2))))
        img[r0:r1, c0:c1] = rng.uniform(0.2, 1.0)
    return img.reshape(-1)
