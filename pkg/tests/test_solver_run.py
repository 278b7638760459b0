from dataclasses import replace

import numpy as np
import pytest

from acvlib.errors import DivergenceError, UsageError
from acvlib.functions import elastic_net, grad_least_squares, l1_norm, linf_ball
from acvlib.linops import attach_norm_hint, build_dense, build_zero
from acvlib.solver import (
    ParamSchedule,
    StepParams,
    acv_step,
    condat_vu_book_params,
    init_state,
    make_saddle_problem,
    run,
    schedule_general,
    schedule_sc_primal,
)


def make_lasso_saddle(n=60, d=20, m=30, seed=3, lam_g=0.15, ball=0.3):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n, d)) / np.sqrt(n)
    b = rng.standard_normal(n)
    C = rng.standard_normal((m, d)) / np.sqrt(m)
    problem = make_saddle_problem(
        linf_ball(m, ball),
        l1_norm(d, lam_g),
        grad_least_squares(attach_norm_hint(build_dense(W)), b),
        attach_norm_hint(build_dense(C)),
    )
    return problem, W, b, C


def test_matches_classical_condat_vu_oracle():
    # with alpha = theta = 1 and constant steps the iteration must reproduce
    # the classical primal-dual sequence exactly
    problem, W, b, C = make_lasso_saddle()
    lam_g, ball = 0.15, 0.3
    p = condat_vu_book_params(problem.L, problem.opnorm_A).at(0)

    x = np.zeros(20)
    y = np.zeros(30)
    x_bar = x.copy()
    oracle_xs = []
    for _ in range(100):
        y = np.clip(y + p.gamma * (C @ x_bar), -ball, ball)
        z = x - p.tau * (W.T @ (W @ x - b)) - p.tau * (C.T @ y)
        x_new = np.sign(z) * np.maximum(np.abs(z) - p.tau * lam_g, 0.0)
        x_bar = 2.0 * x_new - x
        x = x_new
        oracle_xs.append(x.copy())

    state = init_state(problem)
    for k in range(100):
        state = acv_step(problem, state, p)
        np.testing.assert_allclose(state.x, oracle_xs[k], atol=1e-10)
    np.testing.assert_allclose(state.y, y, atol=1e-10)


def test_zero_coupling_matches_accelerated_proximal_gradient():
    rng = np.random.default_rng(11)
    n, d = 40, 15
    W = rng.standard_normal((n, d)) / np.sqrt(n)
    b = rng.standard_normal(n)
    h = grad_least_squares(attach_norm_hint(build_dense(W)), b)
    g = elastic_net(d, 0.2, 0.5)
    problem = make_saddle_problem(linf_ball(1, 0.0), g, h, build_zero(d, 1))
    sched = schedule_general(problem.L, 0.0)
    L = problem.L

    def prox_g(z, eta):
        lam1, beta = 0.2, 0.5
        shrunk = np.sign(z) * np.maximum(np.abs(z) - eta * lam1 * beta, 0.0)
        return shrunk / (1.0 + eta * lam1 * (1.0 - beta))

    x = np.zeros(d)
    v = x.copy()
    oracle_xs = []
    for k in range(50):
        alpha = 2.0 / (k + 2.0)
        tau = (k + 1.0) / (4.0 * L)
        u = alpha * x + (1.0 - alpha) * v
        grad = W.T @ (W @ u - b)
        x = prox_g(x - tau * grad, tau)
        v = alpha * x + (1.0 - alpha) * v
        oracle_xs.append(x.copy())

    state = init_state(problem)
    for k in range(50):
        state = acv_step(problem, state, sched.at(k))
        np.testing.assert_allclose(state.x, oracle_xs[k], atol=1e-10)
    assert np.all(state.y == 0.0)


def test_dual_average_recursion():
    problem, _, _, _ = make_lasso_saddle(seed=9)
    sched = schedule_general(problem.L, problem.opnorm_A)
    state = init_state(problem)
    w = state.y.copy()
    for k in range(30):
        p = sched.at(k)
        state = acv_step(problem, state, p)
        w = p.alpha * state.y + (1.0 - p.alpha) * w
        np.testing.assert_allclose(state.w, w, atol=1e-12)


def test_run_log_row_schedule():
    problem, _, _, _ = make_lasso_saddle()
    sched = condat_vu_book_params(problem.L, problem.opnorm_A)
    _, record = run(problem, sched, T_max=100, log_every=1)
    assert record.ks == list(range(101))
    _, sparse = run(problem, sched, T_max=100, log_every=7)
    assert sparse.ks == list(range(0, 99, 7)) + [100]
    assert all(np.isfinite(o) for o in sparse.objectives)
    assert record.gap_refs == [None] * 101


def test_run_records_reference_gap():
    problem, _, _, _ = make_lasso_saddle()
    sched = condat_vu_book_params(problem.L, problem.opnorm_A)
    _, long_rec = run(problem, sched, T_max=3000, log_every=3000)
    ref = min(long_rec.objectives)
    _, record = run(problem, sched, T_max=200, log_every=10, reference_objective=ref)
    gaps = [g for g in record.gap_refs if g is not None]
    assert len(gaps) == len(record.ks)
    assert all(g >= 0.0 for g in gaps)
    assert gaps[-1] < gaps[0]


def test_run_raises_divergence_with_partial_record():
    problem, _, _, _ = make_lasso_saddle()
    huge = StepParams(gamma=50.0, tau=50.0, alpha=1.0, theta=1.0)
    sched = ParamSchedule(regime="cv", params=lambda k: huge)
    with pytest.raises(DivergenceError) as excinfo:
        run(problem, sched, T_max=500, log_every=1)
    err = excinfo.value
    assert err.record is not None and len(err.record) >= 1
    assert err.record.ks[0] == 0


def test_warmup_boundary_resets_extrapolation_anchor():
    problem, _, _, _ = make_lasso_saddle(seed=5)
    mu = problem.mu_g
    assert mu == 0.0  # l1 is not strongly convex; fake the regime via elastic net
    rng = np.random.default_rng(5)
    W = rng.standard_normal((60, 20)) / np.sqrt(60.0)
    b = rng.standard_normal(60)
    C = rng.standard_normal((30, 20)) / np.sqrt(30.0)
    problem = make_saddle_problem(
        linf_ball(30, 0.3),
        elastic_net(20, 0.2, 0.5),
        grad_least_squares(attach_norm_hint(build_dense(W)), b),
        attach_norm_hint(build_dense(C)),
    )
    sched = schedule_sc_primal(problem.L, problem.mu_g, problem.opnorm_A)
    T0 = sched.warmup_T0
    T = T0 + 5
    final, _ = run(problem, sched, T_max=T, log_every=T)

    state = init_state(problem)
    for k in range(T):
        if k == T0:
            state = replace(state, x_prev=state.x)
        state = acv_step(problem, state, sched.at(k))
    np.testing.assert_allclose(final.x, state.x, atol=1e-12)
    np.testing.assert_allclose(final.v, state.v, atol=1e-12)

    # skipping the reset changes the trajectory
    state2 = init_state(problem)
    for k in range(T):
        state2 = acv_step(problem, state2, sched.at(k))
    assert not np.allclose(final.x, state2.x, atol=1e-12)


def test_callback_stops_early():
    problem, _, _, _ = make_lasso_saddle()
    sched = condat_vu_book_params(problem.L, problem.opnorm_A)
    seen = []

    def stop_at_5(state):
        seen.append(state.k)
        return state.k >= 5

    final, record = run(problem, sched, T_max=100, log_every=50, callbacks=(stop_at_5,))
    assert final.k == 5
    assert seen == [1, 2, 3, 4, 5]
    assert record.ks[-1] == 5  # stop forces a final log row


def test_run_argument_validation():
    problem, _, _, _ = make_lasso_saddle()
    sched = condat_vu_book_params(problem.L, problem.opnorm_A)
    with pytest.raises(UsageError):
        run(problem, sched, T_max=-1)
    with pytest.raises(UsageError):
        run(problem, sched, T_max=10, log_every=0)


def test_acv_step_rejects_bad_params():
    problem, _, _, _ = make_lasso_saddle()
    state = init_state(problem)
    with pytest.raises(UsageError):
        acv_step(problem, state, StepParams(0.0, 0.1, 1.0, 1.0))
    with pytest.raises(UsageError):
        acv_step(problem, state, StepParams(0.1, 0.1, 1.5, 1.0))


def test_objective_decreases_on_benchmark_run():
    problem, _, _, _ = make_lasso_saddle()
    sched = schedule_general(problem.L, problem.opnorm_A)
    _, record = run(problem, sched, T_max=400, log_every=1)
    objs = np.array(record.objectives)
    assert objs[-1] < objs[0]
    assert np.min(objs[-50:]) <= np.min(objs[:50]) + 1e-12
