import math

import numpy as np
import pytest

from acvlib.errors import UsageError
from acvlib.functions import (
    elastic_net,
    grad_least_squares,
    huber_conjugate,
    linf_ball,
    nonneg,
    zero_function,
    zero_smooth,
)
from acvlib.linops import attach_norm_hint, build_dense
from acvlib.metrics import (
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
from acvlib.solver import make_saddle_problem, run, schedule_sc_smooth


def bilinear_problem():
    # L(x, y) = x*y on [-1, 1]^2 once the ball radii restrict the domain;
    # the oversized dual box makes f* vanish on the region of interest
    return make_saddle_problem(
        linf_ball(1, 100.0),
        zero_function(1),
        zero_smooth(1),
        attach_norm_hint(build_dense(np.array([[1.0]]))),
    )


def small_smooth_problem(seed=0):
    rng = np.random.default_rng(seed)
    n, d, m = 30, 12, 8
    W = rng.standard_normal((n, d)) / np.sqrt(n)
    b = rng.standard_normal(n)
    C = rng.standard_normal((m, d)) / np.sqrt(m)
    return make_saddle_problem(
        huber_conjugate(m, 0.2, 1e3),
        elastic_net(d, 0.3, 0.5),
        grad_least_squares(attach_norm_hint(build_dense(W)), b),
        attach_norm_hint(build_dense(C)),
    )


def test_bilinear_toy_gap_is_two():
    problem = bilinear_problem()
    box = GapBox(np.zeros(1), 1.0, np.zeros(1), 1.0)
    gap = pd_gap_box(problem, np.array([1.0]), np.array([1.0]), box)
    assert gap == pytest.approx(2.0, abs=1e-6)
    # at the saddle point (0, 0) both inner problems are flat
    assert pd_gap_box(problem, np.zeros(1), np.zeros(1), box) == pytest.approx(0.0, abs=1e-6)


def test_gap_nonnegative_for_in_box_queries():
    problem = small_smooth_problem()
    rng = np.random.default_rng(7)
    box = GapBox(np.zeros(12), 2.0, np.zeros(8), 0.15)
    for _ in range(10):
        x = rng.uniform(-1.0, 1.0, 12)
        x *= min(1.0, 2.0 / np.linalg.norm(x))
        y = rng.uniform(-0.1, 0.1, 8)
        y *= min(1.0, 0.15 / np.linalg.norm(y))
        gap = pd_gap_box(problem, x, y, box)
        assert gap >= -1e-9


def test_gap_monotone_in_radii():
    problem = small_smooth_problem()
    x = np.full(12, 0.1)
    y = np.full(8, 0.05)
    gaps = []
    for r in (0.5, 1.0, 2.0, 4.0):
        box = GapBox(np.zeros(12), r, np.zeros(8), r * 0.1)
        gaps.append(pd_gap_box(problem, x, y, box))
    assert all(g2 >= g1 - 1e-9 for g1, g2 in zip(gaps, gaps[1:]))


def test_gap_small_at_converged_iterate():
    problem = small_smooth_problem()
    sched = schedule_sc_smooth(problem.L, problem.mu_g, problem.mu_fstar, problem.opnorm_A)
    state, _ = run(problem, sched, T_max=2000, log_every=2000)
    box = default_gap_box(state.v, state.w)
    gap = pd_gap_box(problem, state.v, state.w, box)
    assert -1e-9 <= gap <= 1e-6


def test_gap_infinite_outside_dual_domain():
    problem = small_smooth_problem()
    y_bad = np.full(8, 5.0)  # outside the radius-0.2 ball that supports f*
    box = GapBox(np.zeros(12), 1.0, np.zeros(8), 1.0)
    assert pd_gap_box(problem, np.zeros(12), y_bad, box) == math.inf


def test_lagrangian_hand_value():
    W = np.array([[1.0, 0.0], [0.0, 2.0]])
    b = np.array([1.0, -1.0])
    C = np.array([[1.0, -1.0]])
    problem = make_saddle_problem(
        linf_ball(1, 0.5),
        elastic_net(2, 0.3, 0.5),
        grad_least_squares(attach_norm_hint(build_dense(W)), b),
        attach_norm_hint(build_dense(C)),
    )
    x = np.array([0.5, -0.25])
    y = np.array([0.4])
    lam1, beta = 0.3, 0.5
    g_val = lam1 * beta * np.abs(x).sum() + 0.5 * lam1 * (1 - beta) * (x**2).sum()
    h_val = 0.5 * np.sum((W @ x - b) ** 2)
    expected = (C @ x) @ y + g_val + h_val  # f* = 0 inside its ball
    assert lagrangian(problem, x, y) == pytest.approx(float(expected), rel=1e-12)


def test_lagrangian_infinity_conventions():
    problem = make_saddle_problem(
        linf_ball(1, 0.5),
        nonneg(2),
        zero_smooth(2),
        attach_norm_hint(build_dense(np.array([[1.0, 1.0]]))),
    )
    inside = np.array([0.2])
    outside = np.array([0.9])
    assert lagrangian(problem, np.array([1.0, 2.0]), inside) > 0
    assert lagrangian(problem, np.array([-1.0, 2.0]), inside) == math.inf
    assert lagrangian(problem, np.array([1.0, 2.0]), outside) == -math.inf
    # primal infeasibility wins when both sides are out of domain
    assert lagrangian(problem, np.array([-1.0, 2.0]), outside) == math.inf


def test_primal_objective_requires_conjugate_value():
    problem = small_smooth_problem()
    x = np.zeros(12)
    direct = problem.f_conj.conj_value(problem.A.matvec(x)) + problem.g.value(x) + problem.h.value(x)
    assert primal_objective(problem, x) == pytest.approx(float(direct))


def test_record_append_validation():
    rec = ConvergenceRecord()
    rec.append(k=0, wall_time_s=0.0, objective=1.0, gap_ref=None, pd_gap=None, iterate_norm=0.0)
    rec.append(k=5, wall_time_s=0.1, objective=0.5, gap_ref=0.5, pd_gap=None, iterate_norm=1.0)
    assert len(rec) == 2
    with pytest.raises(UsageError):
        rec.append(k=5, wall_time_s=0.2, objective=0.4, gap_ref=None, pd_gap=None, iterate_norm=1.0)
    with pytest.raises(UsageError):
        rec.append(k=6, wall_time_s=0.2, objective=math.nan, gap_ref=None, pd_gap=None, iterate_norm=1.0)
    with pytest.raises(UsageError):
        rec.append(k=7, wall_time_s=0.2, objective=0.4, gap_ref=math.inf, pd_gap=None, iterate_norm=1.0)


def test_gap_vs_reference_clamps_and_warns():
    assert gap_vs_reference(2.0, 1.0) == pytest.approx(1.0)
    assert gap_vs_reference(1.0 - 1e-14, 1.0) == 0.0
    with pytest.warns(UserWarning):
        assert gap_vs_reference(0.5, 1.0) == 0.0


def make_record(ks, gaps):
    rec = ConvergenceRecord()
    for k, g in zip(ks, gaps):
        rec.append(k=k, wall_time_s=0.0, objective=g, gap_ref=g, pd_gap=None, iterate_norm=1.0)
    return rec


def test_fit_rate_slope_recovers_power_law():
    ks = list(range(1, 201))
    rec = make_record(ks, [3.0 / k**2 for k in ks])
    assert fit_rate_slope(rec, 10, 200) == pytest.approx(-2.0, abs=1e-12)
    rec1 = make_record(ks, [0.7 / k for k in ks])
    assert fit_rate_slope(rec1, 10, 200) == pytest.approx(-1.0, abs=1e-12)


def test_fit_linear_rate_recovers_contraction():
    ks = list(range(0, 120))
    rec = make_record(ks, [2.0 * 0.9**k for k in ks])
    assert fit_linear_rate(rec, 10, 110) == pytest.approx(0.9, rel=1e-12)


def test_fit_uses_best_so_far_envelope():
    # a noisy bump must not poison the slope: the envelope is monotone
    ks = list(range(1, 51))
    gaps = [1.0 / k for k in ks]
    gaps[20] = 5.0  # transient spike
    rec = make_record(ks, gaps)
    slope = fit_rate_slope(rec, 1, 50)
    assert slope == pytest.approx(-1.0, abs=0.05)


def test_fit_window_errors():
    ks = list(range(1, 30))
    rec = make_record(ks, [1.0 / k for k in ks])
    with pytest.raises(UsageError):
        fit_rate_slope(rec, 20, 20)
    with pytest.raises(UsageError):
        fit_rate_slope(rec, 29, 40)  # single recorded point in window
    rec_none = ConvergenceRecord()
    rec_none.append(k=0, wall_time_s=0.0, objective=1.0, gap_ref=None, pd_gap=None, iterate_norm=0.0)
    rec_none.append(k=1, wall_time_s=0.0, objective=1.0, gap_ref=None, pd_gap=None, iterate_norm=0.0)
    with pytest.raises(UsageError):
        fit_rate_slope(rec_none, 0, 1)
    rec_zero = make_record([1, 2, 3], [1.0, 0.0, 1.0])
    with pytest.raises(UsageError):
        fit_rate_slope(rec_zero, 1, 3)


def test_gap_box_validation():
    with pytest.raises(UsageError):
        GapBox(np.zeros(2), 0.0, np.zeros(2), 1.0)
    box = default_gap_box(np.ones(3), np.zeros(2), x0=np.zeros(3))
    assert box.primal_radius == pytest.approx(2.0 * math.sqrt(3.0))
    assert box.dual_radius == 1.0
