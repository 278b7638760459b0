import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from acvlib.errors import UsageError
from acvlib.functions import (
    box_plus_quadratic,
    elastic_net,
    grad_least_squares,
    huber_conjugate,
    huber_value,
    indicator_zero,
    l1_norm,
    linf_ball,
    moreau_check,
    nonneg,
    nonneg_plus_l2,
    prox_elastic_net_g,
    prox_huber,
    prox_huber_conjugate,
    prox_linf_ball,
    prox_nonneg_plus_l2,
    scaled_huber,
    soft_threshold,
    zero_function,
)
from acvlib.linops import build_dense


def prox_oracle(penalty, z, eta, bounds=None):
    """1-D numerical prox: argmin 0.5*(x-z)^2 + eta*penalty(x)."""

    def obj(x):
        return 0.5 * (x - z) ** 2 + eta * penalty(x)

    if bounds is not None:
        res = minimize_scalar(obj, bounds=bounds, method="bounded",
                              options={"xatol": 1e-12})
    else:
        res = minimize_scalar(obj, bracket=(z - 5.0, z, z + 5.0),
                              options={"xtol": 1e-12})
    return res.x


POINTS = np.array([-3.2, -1.0, -0.31, -1e-3, 0.0, 2e-3, 0.45, 1.0, 2.7])


def test_soft_threshold_against_oracle():
    lam = 0.4
    for z in POINTS:
        x = prox_oracle(lambda t: lam * abs(t), z, 1.0)
        assert abs(soft_threshold(np.array([z]), lam)[0] - x) <= 1e-6


def test_soft_threshold_known_values():
    assert np.allclose(soft_threshold(np.array([2.0, -2.0, 0.3]), 0.5), [1.5, -1.5, 0.0])
    with pytest.raises(UsageError):
        soft_threshold(np.ones(2), -0.1)


def test_prox_elastic_net_against_oracle():
    lam1, beta, eta = 0.3, 0.6, 0.7

    def pen(t):
        return lam1 * beta * abs(t) + 0.5 * lam1 * (1 - beta) * t * t

    for z in POINTS:
        x = prox_oracle(pen, z, eta)
        got = prox_elastic_net_g(np.array([z]), eta, lam1, beta)[0]
        assert abs(got - x) <= 1e-6


def test_prox_huber_conjugate_against_oracle():
    # box indicator + quadratic: the clamp of the shrunk point
    lam2, lam3, eta = 0.25, 50.0, 1.3
    qc = 1.0 / (lam2 * lam3)

    def pen(t):
        return 0.5 * qc * t * t  # box handled via bounds

    for z in POINTS:
        x = prox_oracle(pen, z, eta, bounds=(-lam2, lam2))
        got = prox_huber_conjugate(np.array([z]), eta, lam2, lam3)[0]
        assert abs(got - x) <= 1e-6


def test_prox_huber_against_oracle():
    lam2, lam3, eta = 0.8, 5.0, 0.9

    def pen(t):
        return lam2 * float(huber_value(np.array([t]), lam3)[0])

    for z in POINTS:
        x = prox_oracle(pen, z, eta)
        got = prox_huber(np.array([z]), eta, lam2, lam3)[0]
        assert abs(got - x) <= 1e-6


def test_prox_nonneg_plus_l2_against_oracle():
    mu, eta = 2.0, 0.6

    def pen(t):
        return 0.5 * mu * t * t

    for z in POINTS:
        x = prox_oracle(pen, z, eta, bounds=(0.0, 10.0))
        got = prox_nonneg_plus_l2(np.array([z]), eta, mu)[0]
        assert abs(got - x) <= 1e-6


def test_prox_linf_ball_is_projection():
    z = np.array([-2.0, 0.1, 5.0])
    assert np.allclose(prox_linf_ball(z, 3.7, 0.5), [-0.5, 0.1, 0.5])


def test_huber_value_matches_infimal_convolution():
    # huber(t) = min_u |t - u| + (lam3/2) u^2
    lam3 = 4.0
    for t in POINTS:
        res = minimize_scalar(lambda u: abs(t - u) + 0.5 * lam3 * u * u,
                              bracket=(-5.0, 0.0, 5.0), options={"xtol": 1e-12})
        direct = t - res.x if t >= res.x else res.x - t
        assert abs(huber_value(np.array([t]), lam3)[0] - (direct + 0.5 * lam3 * res.x**2)) <= 1e-8


def test_huber_quadratic_region():
    lam3 = 1e3
    t = np.array([1e-4, -5e-4])
    assert np.allclose(huber_value(t, lam3), 0.5 * lam3 * t**2)


def test_box_quad_conjugate_value_against_numeric_sup():
    r, qc = 0.6, 2.5
    f = box_plus_quadratic(1, r, qc)

    def inner(u, y):
        return u * y - 0.5 * qc * y * y

    for u in POINTS:
        res = minimize_scalar(lambda y: -inner(u, y),
                              bounds=(-r, r), method="bounded",
                              options={"xatol": 1e-12})
        # the bounded search is sloppy at the interval ends, so keep the
        # corners as explicit candidates
        sup = max(-res.fun, inner(u, -r), inner(u, r))
        assert abs(f.conj_value(np.array([u])) - sup) <= 1e-9


def test_conjugate_value_degenerate_cases():
    assert indicator_zero(3).conj_value(np.array([1.0, -2.0, 5.0])) == 0.0
    ball = linf_ball(2, 0.3)
    assert ball.conj_value(np.array([2.0, -1.0])) == pytest.approx(0.3 * 3.0)


def test_moreau_identity_pairs():
    rng = np.random.default_rng(0)
    pairs = [
        (l1_norm(4, 0.7), linf_ball(4, 0.7)),
        (scaled_huber(4, 0.4, 8.0), huber_conjugate(4, 0.4, 8.0)),
        (zero_function(4), indicator_zero(4)),
    ]
    for p, p_conj in pairs:
        for _ in range(50):
            z = 3.0 * rng.standard_normal(4)
            eta = float(10.0 ** rng.uniform(-2, 2))
            assert moreau_check(p, p_conj, z, eta) <= 1e-10
            # identity is symmetric in the pair
            assert moreau_check(p_conj, p, z, eta) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 20.0))
def test_prox_nonexpansive(seed, eta):
    rng = np.random.default_rng(seed)
    z1 = 5.0 * rng.standard_normal(6)
    z2 = 5.0 * rng.standard_normal(6)
    fns = [
        l1_norm(6, 0.5),
        elastic_net(6, 0.4, 0.3),
        huber_conjugate(6, 0.7, 12.0),
        nonneg(6),
        nonneg_plus_l2(6, 1.3),
        linf_ball(6, 0.2),
    ]
    for fn in fns:
        d = np.linalg.norm(fn.prox(z1, eta) - fn.prox(z2, eta))
        assert d <= np.linalg.norm(z1 - z2) * (1.0 + 1e-12)


def test_strong_convexity_constants():
    assert elastic_net(3, 0.1, 0.5).strong_convexity == pytest.approx(0.05)
    assert elastic_net(3, 0.1, 1.0).strong_convexity == 0.0
    assert huber_conjugate(3, 0.1, 1e3).strong_convexity == pytest.approx(0.01)
    assert nonneg_plus_l2(3, 0.7).strong_convexity == pytest.approx(0.7)
    assert linf_ball(3, 0.4).strong_convexity == 0.0


def test_values_and_feasibility():
    ball = linf_ball(2, 0.5)
    assert ball.value(np.array([0.5, -0.5])) == 0.0
    assert math.isinf(ball.value(np.array([0.6, 0.0])))
    g = nonneg(2)
    assert g.value(np.array([0.0, 1.0])) == 0.0
    assert math.isinf(g.value(np.array([-1e-3, 1.0])))
    en = elastic_net(2, 2.0, 0.25)
    x = np.array([1.0, -2.0])
    assert en.value(x) == pytest.approx(2.0 * 0.25 * 3.0 + 0.5 * 2.0 * 0.75 * 5.0)


def test_grad_least_squares_finite_difference():
    rng = np.random.default_rng(5)
    W = rng.standard_normal((8, 5))
    b = rng.standard_normal(8)
    h = grad_least_squares(build_dense(W), b)
    x = rng.standard_normal(5)
    grad = h.grad(x)
    eps = 1e-6
    for i in range(5):
        e = np.zeros(5)
        e[i] = eps
        fd = (h.value(x + e) - h.value(x - e)) / (2 * eps)
        assert abs(fd - grad[i]) <= 1e-5 * (1.0 + abs(grad[i]))
    sigma = np.linalg.svd(W, compute_uv=False)[0]
    assert h.lipschitz_L >= sigma**2
    assert h.lipschitz_L <= sigma**2 * 1.01


def test_prox_argument_validation():
    with pytest.raises(UsageError):
        prox_huber_conjugate(np.ones(2), 1.0, -0.1, 1.0)
    with pytest.raises(UsageError):
        prox_elastic_net_g(np.ones(2), -1.0, 0.1, 0.5)
    with pytest.raises(UsageError):
        box_plus_quadratic(2, -1.0)
