"""Benchmark command line: solve, compare, tune-cv, validate.

Exit codes are a stable contract: 0 success, 1 divergence, 2 schedule
validation failure, 3 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from . import io as runio
from . import metrics
from .errors import DivergenceError, ScheduleValidationError, UsageError
from .functions import BoxPlusQuadratic, linf_ball
from .linops import build_zero
from .problems import (
    FusedElasticNetSpec,
    ImagingSpec,
    build_fused_elastic_net,
    build_imaging,
    imaging_forward,
    synthetic_image,
    synthetic_regression,
)
from .solver import (
    ParamSchedule,
    SaddleProblem,
    StepParams,
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


# ---------------------------------------------------------------------------
# problem construction


def build_problem(cfg: runio.RunConfig):
    """RunConfig -> (SaddleProblem, data fingerprint hex string)."""
    hasher = hashlib.sha256()
    if cfg.problem == "fused-elastic-net":
        if cfg.dataset == "synthetic":
            W, b, _ = synthetic_regression(
                cfg.n_samples, cfg.n_features, cfg.density, cfg.noise_std, cfg.seed
            )
            ds = runio.Dataset(features=W, labels=b, source=f"synthetic(seed={cfg.seed})")
        else:
            ds = runio.read_libsvm(cfg.dataset)
        ds = runio.rescale_columns(ds)
        spec = FusedElasticNetSpec(
            W=ds.features,
            b=ds.labels,
            lambda1=cfg.lambda1,
            lambda2=cfg.lambda2,
            lambda3=cfg.lambda3,
            beta=cfg.beta,
            smoothed=cfg.smoothed,
            pair_fraction=cfg.pair_fraction,
        )
        problem = build_fused_elastic_net(spec)
        for part in (
            b"fen",
            repr((cfg.lambda1, cfg.lambda2, cfg.lambda3, cfg.beta, cfg.smoothed, cfg.pair_fraction)).encode(),
            np.ascontiguousarray(ds.features).tobytes(),
            np.ascontiguousarray(ds.labels).tobytes(),
        ):
            hasher.update(part)
    else:
        n = cfg.height * cfg.width
        geom = ImagingSpec(
            height=cfg.height,
            width=cfg.width,
            observed=np.zeros(n),
            forward=cfg.forward,
            keep_fraction=cfg.keep_fraction,
            blur_half_width=cfg.blur_half_width,
            lambda1=cfg.lambda1,
            mu_g=cfg.mu_g,
            rho1=cfg.rho1,
        )
        M = imaging_forward(geom, cfg.seed)
        x_true = synthetic_image(cfg.height, cfg.width, cfg.seed)
        noise = np.random.default_rng(cfg.seed + 1).standard_normal(n)
        spec = replace(geom, observed=M.apply(x_true) + cfg.image_noise_std * noise)
        problem = build_imaging(spec, cfg.seed)
        for part in (
            b"imaging",
            repr(
                (
                    cfg.height,
                    cfg.width,
                    cfg.forward,
                    cfg.keep_fraction,
                    cfg.blur_half_width,
                    cfg.lambda1,
                    cfg.mu_g,
                    cfg.rho1,
                    cfg.seed,
                )
            ).encode(),
            np.ascontiguousarray(spec.observed).tobytes(),
        ):
            hasher.update(part)
    return problem, hasher.hexdigest()


def coupling_inert(problem: SaddleProblem) -> bool:
    """True when f(Ax) contributes nothing for any x."""
    if problem.opnorm_A == 0:
        return True
    return isinstance(problem.f_conj, BoxPlusQuadratic) and problem.f_conj.radius == 0


def reduce_to_composite(problem: SaddleProblem) -> SaddleProblem:
    """Zero out the coupling so accelerated proximal gradient applies."""
    d = problem.A.in_dim
    return make_saddle_problem(linf_ball(1, 0.0), problem.g, problem.h, build_zero(d, 1))


def make_schedule(problem: SaddleProblem, algorithm: str, steady_mode: str = "corrected") -> ParamSchedule:
    """Schedule for every fixed-parameter algorithm (not cv-tuned)."""
    if algorithm == "acv-general":
        return schedule_general(problem.L, problem.opnorm_A)
    if algorithm == "acv-sc":
        if problem.mu_g <= 0:
            raise ScheduleValidationError("acv-sc needs mu_g > 0; this problem has mu_g = 0")
        return schedule_sc_primal(problem.L, problem.mu_g, problem.opnorm_A, steady_mode)
    if algorithm == "acv-sc-dual":
        if problem.mu_fstar <= 0:
            raise ScheduleValidationError("acv-sc-dual needs mu_fstar > 0; this problem has mu_fstar = 0")
        return schedule_sc_dual(problem.L, problem.mu_fstar, problem.opnorm_A, steady_mode)
    if algorithm == "acv-sc-smooth":
        if problem.mu_g <= 0:
            raise ScheduleValidationError("acv-sc-smooth needs mu_g > 0; this problem has mu_g = 0")
        if problem.mu_fstar <= 0:
            raise ScheduleValidationError("acv-sc-smooth needs mu_fstar > 0; this problem has mu_fstar = 0")
        return schedule_sc_smooth(problem.L, problem.mu_g, problem.mu_fstar, problem.opnorm_A)
    if algorithm == "cv-book":
        return condat_vu_book_params(problem.L, problem.opnorm_A)
    if algorithm == "pdhg":
        if problem.L != 0:
            raise UsageError("pdhg applies only to problems with no smooth term (L = 0)")
        return condat_vu_book_params(0.0, problem.opnorm_A)
    if algorithm == "apgd":
        if not coupling_inert(problem):
            raise UsageError("apgd applies only when the coupling term is inert (||A|| = 0 or f = 0)")
        reduced = reduce_to_composite(problem)
        return schedule_general(reduced.L, 0.0)
    raise UsageError(f"no fixed schedule for algorithm {algorithm!r}")


def reference_algorithm(problem: SaddleProblem) -> str:
    """Strongest regime the problem's constants support."""
    if problem.mu_g > 0 and problem.mu_fstar > 0:
        Lbar = problem.opnorm_A**2 / problem.mu_fstar + problem.L
        if problem.mu_g <= Lbar:
            return "acv-sc-smooth"
    if problem.mu_g > 0 and problem.opnorm_A > 0:
        return "acv-sc"
    if problem.mu_fstar > 0 and problem.opnorm_A > 0:
        return "acv-sc-dual"
    return "acv-general"


@dataclass(frozen=True)
class Reference:
    x: np.ndarray
    y: np.ndarray
    objective: float


def compute_reference(problem: SaddleProblem, fingerprint: str, cfg: runio.RunConfig, output_dir) -> Reference:
    """Long run of the strongest applicable algorithm, cached on disk."""
    ref_alg = reference_algorithm(problem)
    ref_iters = cfg.reference_iters_multiplier * max(cfg.max_iters, 1)
    cache_dir = os.path.join(output_dir, "refcache")
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, f"{fingerprint[:20]}-{ref_alg}-{ref_iters}.npz")
    if os.path.exists(path):
        with np.load(path) as data:
            return Reference(x=data["x"], y=data["y"], objective=float(data["objective"]))
    schedule = make_schedule(problem, ref_alg)
    state, _ = run(problem, schedule, T_max=ref_iters, log_every=max(ref_iters, 1))
    obj_last = metrics.primal_objective(problem, state.x)
    obj_avg = metrics.primal_objective(problem, state.v)
    if obj_last <= obj_avg:
        ref = Reference(x=state.x, y=state.y, objective=obj_last)
    else:
        ref = Reference(x=state.v, y=state.w, objective=obj_avg)
    np.savez(path, x=ref.x, y=ref.y, objective=ref.objective)
    return ref


# ---------------------------------------------------------------------------
# running and summarizing


def make_init(problem: SaddleProblem, cfg: runio.RunConfig):
    if cfg.x0_fill == 0.0 and cfg.y0_fill == 0.0:
        return None
    return init_state(
        problem,
        x0=np.full(problem.A.in_dim, cfg.x0_fill),
        y0=np.full(problem.A.out_dim, cfg.y0_fill),
    )


def run_algorithm(problem, algorithm, cfg, reference, gap_box, steady_mode="corrected",
                  validate=True):
    """Run one fixed-schedule algorithm; returns (record, schedule label info)."""
    run_problem = problem
    if algorithm == "apgd":
        run_problem = reduce_to_composite(problem)
        if gap_box is not None:
            gap_box = metrics.GapBox(
                gap_box.primal_center, gap_box.primal_radius, np.zeros(1), gap_box.dual_radius
            )
    schedule = make_schedule(problem, algorithm, steady_mode)
    if validate:
        report = validate_schedule(schedule, run_problem, k_max=min(max(cfg.max_iters, 1), 100_000))
        if not report.ok:
            f = report.first_failure
            raise ScheduleValidationError(
                f"{algorithm}: constraint {f.constraint!r} fails first at k={f.k} "
                f"(violation {f.violation:.3e})",
                report=report,
            )
    _, record = run(
        run_problem,
        schedule,
        init=make_init(run_problem, cfg),
        T_max=cfg.max_iters,
        log_every=cfg.resolved_log_every(),
        reference_objective=reference.objective if reference is not None else None,
        gap_box=gap_box,
    )
    return record


def constant_cv_schedule(gamma: float, tau: float) -> ParamSchedule:
    p = StepParams(gamma=gamma, tau=tau, alpha=1.0, theta=1.0)
    return ParamSchedule(regime="cv", params=lambda k: p)


@dataclass(frozen=True)
class TuneResult:
    label: str
    gamma: float
    tau: float
    final_gap: float
    record: metrics.ConvergenceRecord
    n_diverged: int
    n_total: int


def tune_cv(problem, cfg, grid_mode, jmax, reference) -> TuneResult:
    """Grid-search constant-step Condat-Vu against the shared reference.

    primal mode: tau = i * 10^-j * tau_acc for i in 1..10, j in 0..jmax,
    where tau_acc is the accelerated schedule's primal step at the run
    horizon; gamma from the book identity when feasible, else 1/(tau*a^2).
    dual mode: book tau with gamma scaled by 10^j, j in -5..5.
    Smallest final best-so-far gap wins; ties go to the larger step.
    """
    L, a = problem.L, problem.opnorm_A
    if a == 0:
        raise UsageError("tuning the coupling steps needs ||A||_op > 0")
    candidates = []
    if grid_mode == "primal":
        acc = make_schedule(problem, reference_algorithm(problem))
        tau_acc = acc.at(cfg.max_iters).tau
        for j in range(0, jmax + 1):
            for i in range(1, 11):
                tau = i * 10.0 ** (-j) * tau_acc
                if 1.0 - L * tau > 0:
                    gamma = (1.0 - L * tau) / (tau * a**2)
                else:
                    gamma = 1.0 / (tau * a**2)
                candidates.append((f"i={i} j={j}", gamma, tau, tau))
    else:
        base = condat_vu_book_params(L, a).at(0)
        for j in range(-5, 6):
            candidates.append((f"j={j}", base.gamma * 10.0**j, base.tau, base.gamma * 10.0**j))
    best = None
    n_diverged = 0
    for label, gamma, tau, step_key in candidates:
        schedule = constant_cv_schedule(gamma, tau)
        try:
            _, record = run(
                problem,
                schedule,
                init=make_init(problem, cfg),
                T_max=cfg.max_iters,
                log_every=cfg.resolved_log_every(),
                reference_objective=reference.objective,
            )
        except DivergenceError:
            n_diverged += 1
            continue
        final_gap = min(record.gap_refs)
        if best is None or (final_gap, -step_key) < (best[0], -best[1]):
            best = (final_gap, step_key, label, gamma, tau, record)
    if best is None:
        raise DivergenceError("every grid candidate diverged")
    final_gap, _, label, gamma, tau, record = best
    return TuneResult(
        label=label,
        gamma=gamma,
        tau=tau,
        final_gap=final_gap,
        record=record,
        n_diverged=n_diverged,
        n_total=len(candidates),
    )


def finalize_record(record: metrics.ConvergenceRecord, cfg) -> float:
    """Returns the measured wall time; zeroes the stored column when the
    config asks for byte-reproducible CSV output."""
    measured = record.wall_times[-1] if len(record) else 0.0
    if cfg.deterministic_timing:
        record.wall_times = [0.0] * len(record)
    return measured


@dataclass
class SummaryRow:
    algorithm: str
    final_gap: Optional[float]
    iters_to_threshold: Optional[int]
    rate_slope: Optional[float]
    contraction: Optional[float]
    wall_time_s: float
    note: str = ""


def summarize(algorithm, record, cfg, wall_time) -> SummaryRow:
    gaps = record.gap_refs
    final_gap = None
    iters_to = None
    if gaps and all(gv is not None for gv in gaps):
        env = np.minimum.accumulate(np.array(gaps, dtype=float))
        final_gap = float(env[-1])
        hit = np.nonzero(env <= cfg.gap_threshold)[0]
        if hit.size:
            iters_to = int(record.ks[hit[0]])
    T = record.ks[-1] if len(record) else 0
    slope = None
    contraction = None
    try:
        slope = metrics.fit_rate_slope(record, max(1, T // 10), T)
    except UsageError:
        pass
    try:
        contraction = metrics.fit_linear_rate(record, max(0, T - max(100, T // 10)), T)
    except UsageError:
        pass
    return SummaryRow(algorithm, final_gap, iters_to, slope, contraction, wall_time)


def render_summary(rows: List[SummaryRow], cfg) -> str:
    header = (
        f"{'algorithm':<14} {'final gap':>12} {'to ' + format(cfg.gap_threshold, '.0e'):>12} "
        f"{'loglog slope':>12} {'contraction':>12} {'wall s':>9}  note"
    )
    out = [header, "-" * len(header)]
    for r in rows:
        out.append(
            f"{r.algorithm:<14} "
            f"{('%.3e' % r.final_gap) if r.final_gap is not None else 'n/a':>12} "
            f"{r.iters_to_threshold if r.iters_to_threshold is not None else 'not reached':>12} "
            f"{('%.2f' % r.rate_slope) if r.rate_slope is not None else 'n/a':>12} "
            f"{('%.4f' % r.contraction) if r.contraction is not None else 'n/a':>12} "
            f"{r.wall_time_s:>9.3f}  {r.note}"
        )
    return "\n".join(out)


# ---------------------------------------------------------------------------
# subcommands


def _prepare(cfg, output_dir, want_reference=True):
    problem, fingerprint = build_problem(cfg)
    reference = compute_reference(problem, fingerprint, cfg, output_dir) if want_reference else None
    gap_box = None
    if cfg.pd_gap and reference is not None:
        gap_box = metrics.default_gap_box(reference.x, reference.y)
    return problem, reference, gap_box


def cmd_solve(cfg: runio.RunConfig, output_dir: str) -> int:
    problem, reference, gap_box = _prepare(cfg, output_dir)
    if cfg.algorithm == "cv-tuned":
        result = tune_cv(problem, cfg, cfg.tune_grid, cfg.tune_jmax, reference)
        record = result.record
        print(f"cv-tuned winner {result.label}: gamma={result.gamma:.6g} tau={result.tau:.6g}")
    else:
        try:
            record = run_algorithm(problem, cfg.algorithm, cfg, reference, gap_box)
        except DivergenceError as err:
            if err.record is not None and len(err.record):
                finalize_record(err.record, cfg)
                path = os.path.join(output_dir, f"{cfg.algorithm}.csv")
                runio.write_convergence_csv(err.record, path)
                print(f"partial trace written to {path}", file=sys.stderr)
            raise
    wall = finalize_record(record, cfg)
    path = os.path.join(output_dir, f"{cfg.algorithm}.csv")
    runio.write_convergence_csv(record, path)
    row = summarize(cfg.algorithm, record, cfg, wall)
    print(render_summary([row], cfg))
    print(f"trace: {path}")
    return 0


def cmd_compare(cfg: runio.RunConfig, algos: List[str], output_dir: str) -> int:
    if not algos:
        raise UsageError("empty algorithm list")
    for alg in algos:
        if alg not in runio.ALGORITHMS:
            raise UsageError(f"unknown algorithm {alg!r}; choose from {runio.ALGORITHMS}")
    problem, reference, gap_box = _prepare(cfg, output_dir)
    rows = []
    failure_codes = []
    for alg in algos:
        try:
            if alg == "cv-tuned":
                result = tune_cv(problem, cfg, cfg.tune_grid, cfg.tune_jmax, reference)
                record = result.record
                note = f"winner {result.label}"
            else:
                record = run_algorithm(problem, alg, cfg, reference, gap_box)
                note = ""
        except DivergenceError as err:
            print(f"{alg}: diverged ({err})", file=sys.stderr)
            rows.append(SummaryRow(alg, None, None, None, None, 0.0, note="diverged"))
            failure_codes.append(1)
            continue
        except ScheduleValidationError as err:
            print(f"{alg}: schedule validation failed ({err})", file=sys.stderr)
            rows.append(SummaryRow(alg, None, None, None, None, 0.0, note="invalid schedule"))
            failure_codes.append(2)
            continue
        except UsageError as err:
            print(f"{alg}: not applicable ({err})", file=sys.stderr)
            rows.append(SummaryRow(alg, None, None, None, None, 0.0, note="not applicable"))
            failure_codes.append(3)
            continue
        wall = finalize_record(record, cfg)
        runio.write_convergence_csv(record, os.path.join(output_dir, f"{alg}.csv"))
        row = summarize(alg, record, cfg, wall)
        row.note = note
        rows.append(row)
    print(render_summary(rows, cfg))
    return failure_codes[0] if failure_codes else 0


def cmd_tune_cv(cfg: runio.RunConfig, grid_spec: str, output_dir: str) -> int:
    mode, jmax = parse_grid_spec(grid_spec, cfg)
    problem, reference, _ = _prepare(cfg, output_dir)
    result = tune_cv(problem, cfg, mode, jmax, reference)
    wall = finalize_record(result.record, cfg)
    path = os.path.join(output_dir, "cv-tuned.csv")
    runio.write_convergence_csv(result.record, path)
    print(
        f"selected {result.label}: gamma={result.gamma:.6g} tau={result.tau:.6g} "
        f"final gap {result.final_gap:.3e} "
        f"({result.n_total - result.n_diverged}/{result.n_total} candidates converged)"
    )
    row = summarize("cv-tuned", result.record, cfg, wall)
    print(render_summary([row], cfg))
    print(f"trace: {path}")
    return 0


def cmd_validate(cfg: runio.RunConfig, horizon: int, paper_literal: bool) -> int:
    if cfg.algorithm == "cv-tuned":
        raise UsageError("cv-tuned has no fixed schedule to validate")
    if horizon < 0:
        raise UsageError("horizon must be >= 0")
    problem, _ = build_problem(cfg)
    steady_mode = "literal" if paper_literal else "corrected"
    run_problem = reduce_to_composite(problem) if cfg.algorithm == "apgd" else problem
    schedule = make_schedule(problem, cfg.algorithm, steady_mode)
    report = validate_schedule(schedule, run_problem, k_max=horizon)
    variant = " (literal steady offset)" if paper_literal else ""
    print(f"schedule {cfg.algorithm}{variant} on {cfg.problem}, constraints for k <= {horizon}:")
    print(report.summary())
    return 0 if report.ok else 2


def parse_grid_spec(spec: Optional[str], cfg: runio.RunConfig):
    """Grid spec grammar: 'primal', 'dual', or 'primal:jmax=N'."""
    if spec is None:
        return cfg.tune_grid, cfg.tune_jmax
    head, _, rest = spec.partition(":")
    if head not in ("primal", "dual"):
        raise UsageError(f"unknown grid {spec!r}; use primal[:jmax=N] or dual")
    jmax = cfg.tune_jmax
    if rest:
        key, sep, val = rest.partition("=")
        if head != "primal" or key != "jmax" or not sep:
            raise UsageError(f"unknown grid option {rest!r}")
        try:
            jmax = int(val)
        except ValueError:
            raise UsageError(f"bad jmax {val!r}") from None
        if jmax < 0:
            raise UsageError("jmax must be >= 0")
    return head, jmax


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="acv", description="Accelerated primal-dual solver benchmarks")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run one algorithm and write its trace")
    sp.add_argument("--config", required=True)
    sp.add_argument("--output", default=None, help="output directory (default: config output_path)")

    cp = sub.add_parser("compare", help="run several algorithms against a shared reference")
    cp.add_argument("--config", required=True)
    cp.add_argument("--algos", required=True, help="comma-separated algorithm list")
    cp.add_argument("--output", default=None)

    tp = sub.add_parser("tune-cv", help="grid-search constant-step Condat-Vu")
    tp.add_argument("--config", required=True)
    tp.add_argument("--grid", default=None, help="primal[:jmax=N] or dual")
    tp.add_argument("--output", default=None)

    vp = sub.add_parser("validate", help="sweep the schedule constraint checks")
    vp.add_argument("--config", required=True)
    vp.add_argument("--horizon", type=int, default=10_000)
    vp.add_argument("--paper-literal", action="store_true",
                    help="use the uncorrected steady-phase growth offset")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = runio.read_config(args.config)
        if args.command == "validate":
            return cmd_validate(cfg, args.horizon, args.paper_literal)
        output_dir = args.output if args.output else cfg.output_path
        os.makedirs(output_dir, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(cfg, output_dir)
        if args.command == "compare":
            algos = [a.strip() for a in args.algos.split(",") if a.strip()]
            return cmd_compare(cfg, algos, output_dir)
        return cmd_tune_cv(cfg, args.grid, output_dir)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except ScheduleValidationError as err:
        print(f"schedule validation failed: {err}", file=sys.stderr)
        report = getattr(err, "report", None)
        if report is not None:
            print(report.summary(), file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
