"""
Invariant suite behind the ``verify`` verb.

Each named check collects its assertions in a SoftAssertions instance and
reports one passed/failed/error row to a ReportManager. The suites cover
exact classification, the reduction, the two charts and their invariants,
exponent recovery, the bounce and the printed-versus-derived coefficient
ledger.
"""

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence

import numpy as np

from bigbang.blowup import (SQRT2, compare_terms, g_terms, g_tilde_terms, printed_g_terms, printed_g_tilde_terms,
                            regularized_field, to_regularized)
from bigbang.bounce import (SignRule, approach_branch, asymptotic_form, closed_form_zero_energy,
                            extend_through_singularity, initial_state, near_singularity_fit, real_pow_rational)
from bigbang.cosmo import (CosmologyParams, PhysState, compare_printed_coefficients, full_accel, hamiltonian,
                           physical_energy, potential_value, pure_power_model, reduce, reduced_accel)
from bigbang.exceptions import ImaginaryBranchError, NoExtensionError
from bigbang.flow import (IntegratorOptions, TrajectoryStatus, handoff_state, hamiltonian_drift,
                          integrate_physical, integrate_regularized, manifold_residuals, sup_relative_gap)
from bigbang.ratnum import RegularityKind, classify, enumerate_script_p, format_rational, w_from_pq
from utils.logger import get_logger
from utils.report_manager import ReportManager
from utils.soft_assertions import SoftAssertions


logger = get_logger(__name__)

RANDOM_SEED = 1729
TEST_W = (Fraction(1, 2), Fraction(1), Fraction(2), Fraction(7, 3))
CHART_EVENTS = (0.5, 0.2, 0.1, 0.05, 0.02)
ORACLE_STOP_A = 0.05
TEST_CURVATURE = 0.25
MAX_REPORTED_FAILURES = 20
RANDOM_NUM_MAX = 200
RANDOM_DEN_MAX = 30


@dataclass(frozen=True)
class VerifyContext:
    """Inputs shared by every check."""
    params: CosmologyParams
    opts: IntegratorOptions
    tight: IntegratorOptions
    seed: int = RANDOM_SEED

    def params_for(self, w: Fraction, curved: bool = False) -> CosmologyParams:
        if curved:
            return self.params.with_overrides(w=w, curvature=TEST_CURVATURE)
        return self.params.with_overrides(w=w)


@dataclass(frozen=True)
class VerifyCheck:
    suite: str
    name: str
    func: Callable[[SoftAssertions, VerifyContext], Optional[str]]


def check_admissible_pairs(soft: SoftAssertions, ctx: VerifyContext) -> str:
    pairs = enumerate_script_p(99)
    for p, q in pairs:
        w = w_from_pq(p, q)
        cls = classify(w)
        if w > 1:
            soft.assert_true(cls.kind is RegularityKind.BRANCH and cls.gamma == Fraction(p, q),
                             f"w={format_rational(w)} from ({p},{q}) classified {cls.kind.value} "
                             f"gamma={format_rational(cls.gamma)}")
        else:
            soft.assert_true(cls.kind is RegularityKind.ALWAYS,
                             f"w={format_rational(w)} <= 1 classified {cls.kind.value}")
    return f"{len(pairs)} admissible pairs with q <= 99"


def check_random_rationals(soft: SoftAssertions, ctx: VerifyContext) -> str:
    rng = np.random.default_rng(ctx.seed)
    # gamma = 2 den / (3 (num + den)) has denominator below this bound
    branch_ws = {w_from_pq(p, q) for p, q in enumerate_script_p(3 * (RANDOM_NUM_MAX + RANDOM_DEN_MAX))}
    checked = 0
    branch = 0
    while checked < 100:
        w = Fraction(int(rng.integers(2, RANDOM_NUM_MAX)), int(rng.integers(1, RANDOM_DEN_MAX)))
        if w <= 1:
            continue
        cls = classify(w)
        expected = w in branch_ws
        soft.assert_equal(cls.kind is RegularityKind.BRANCH, expected,
                          f"w={format_rational(w)}: classify says {cls.kind.value}, enumeration says "
                          f"{'branch' if expected else 'not branch'}")
        branch += int(expected)
        checked += 1
    return f"{checked} random rationals, {branch} branch regularizable"


def check_reduction_equivalence(soft: SoftAssertions, ctx: VerifyContext) -> str:
    rng = np.random.default_rng(ctx.seed)
    grid = np.geomspace(1e-3, 1.0, 100)
    samplers = {
        "w<1": lambda: Fraction(int(rng.integers(-3, 10)), 10),
        "w=1": lambda: Fraction(1),
        "w>1": lambda: Fraction(int(rng.integers(11, 40)), 10),
    }
    count = 0
    for regime, sample_w in samplers.items():
        for _ in range(20):
            params = CosmologyParams(
                sigma=float(rng.uniform(0.1, 10.0)),
                curvature=float(rng.uniform(-1.0, 0.0)),
                newton_g=float(rng.uniform(0.01, 1.0)),
                rho_m=float(rng.uniform(0.1, 10.0)),
                rho_rad=float(rng.uniform(0.1, 10.0)),
                rho_w=float(rng.uniform(0.1, 10.0)),
                w=sample_w(),
            )
            model = reduce(params)
            lam_sq = model.time_scale ** 2
            for a in grid:
                expected = lam_sq * full_accel(float(a), params)
                soft.assert_close(reduced_accel(model, float(a)), expected, rel_tol=1e-12,
                                  message=f"{regime} w={format_rational(params.w)} a={a:.6g}: accelerations differ")
            # constraint-satisfying states sit on the physical energy level
            state = initial_state(params, model, 0.5)
            scale = max(1.0, potential_value(model, 0.5))
            soft.assert_close(hamiltonian(model, state.a, state.p_mom), physical_energy(params, model),
                              abs_tol=1e-12 * scale,
                              message=f"{regime} w={format_rational(params.w)}: constraint state off level h")
            count += 1
    return f"{count} parameter sets x {len(grid)} points"


def _zero_energy_run(w: Fraction, opts: IntegratorOptions):
    model = pure_power_model(w)
    init = PhysState(a=1.0, p_mom=-math.sqrt(2.0 * potential_value(model, 1.0)))
    return model, integrate_physical(model, init, opts.with_(stop_a_min=ORACLE_STOP_A))


def check_zero_energy_oracle(soft: SoftAssertions, ctx: VerifyContext) -> str:
    worst = 0.0
    for w in TEST_W:
        model, traj = _zero_energy_run(w, ctx.tight)
        exps = model.exps
        speed = math.sqrt(2.0) * (exps.beta_f + 1.0)
        delta0 = 1.0 / speed
        event_time = delta0 - ORACLE_STOP_A ** float(1 / exps.gamma) / speed
        soft.assert_equal(traj.status, TrajectoryStatus.STOP_EVENT, f"w={format_rational(w)}: run did not stop at a")
        soft.assert_close(float(traj.tau[-1]), event_time, rel_tol=1e-8,
                          message=f"w={format_rational(w)}: event time differs from the closed form")
        # compare only where the time-to-a map is well conditioned
        conditioned = exps.gamma_f * traj.a ** (-1.0 / exps.gamma_f) <= 1e4
        for tau, a in zip(traj.tau[conditioned], traj.a[conditioned]):
            expected = closed_form_zero_energy(exps, delta0 - float(tau))
            worst = max(worst, abs(a / expected - 1.0))
            soft.assert_close(float(a), expected, rel_tol=1e-8,
                              message=f"w={format_rational(w)} tau={tau:.17g}: a off the closed form")
    return f"max relative deviation {worst:.3g}"


def check_conservation(soft: SoftAssertions, ctx: VerifyContext) -> str:
    worst_drift = 0.0
    worst_residual = 0.0
    for w in TEST_W:
        params = ctx.params_for(w, curved=True)
        model = reduce(params)
        init = initial_state(params, model, 1.0)
        phys = integrate_physical(model, init, ctx.tight.with_(stop_a_min=ORACLE_STOP_A))
        drift = float(np.nanmax(hamiltonian_drift(model, phys)))
        worst_drift = max(worst_drift, drift)
        soft.assert_less(drift, 1e-9, f"w={format_rational(w)}: Hamiltonian drift {drift:.3g}")

        reg = integrate_regularized(model, handoff_state(model, phys), phys.h_level,
                                    ctx.tight.with_(stop_r_min=1e-40), tau0=float(phys.tau[-1]))
        residual = float(np.abs(manifold_residuals(model, reg)).max())
        worst_residual = max(worst_residual, residual)
        soft.assert_less(residual, 1e-8, f"w={format_rational(w)}: manifold residual {residual:.3g}")
    return f"max drift {worst_drift:.3g}, max manifold residual {worst_residual:.3g}"


def check_chart_equivalence(soft: SoftAssertions, ctx: VerifyContext) -> str:
    worst = 0.0
    for w in TEST_W:
        params = ctx.params_for(w, curved=True)
        model = reduce(params)
        init = initial_state(params, model, 1.0)
        h = hamiltonian(model, init.a, init.p_mom)
        reg_init = to_regularized(model, init)
        inv_gamma = float(1 / model.exps.gamma)
        for a_event in CHART_EVENTS:
            phys = integrate_physical(model, init, ctx.tight.with_(stop_a_min=a_event))
            reg = integrate_regularized(model, reg_init, h, ctx.tight.with_(stop_r_min=a_event ** inv_gamma),
                                        tau0=init.tau)
            pairs = (("tau", phys.tau[-1], reg.tau[-1]), ("s", phys.s[-1], reg.s[-1]),
                     ("P", phys.p_mom[-1], reg.p_mom[-1]))
            for name, expected, actual in pairs:
                worst = max(worst, abs(actual - expected) / max(abs(expected), 1e-300))
                soft.assert_close(float(actual), float(expected), rel_tol=1e-6,
                                  message=f"w={format_rational(w)} a={a_event}: {name} differs between charts")
    return f"max relative chart difference {worst:.3g}"


def check_collision_manifold(soft: SoftAssertions, ctx: VerifyContext) -> str:
    for w in TEST_W:
        for model in (reduce(ctx.params_for(w)), pure_power_model(w)):
            for v in (SQRT2, -SQRT2):
                dr_ds, dv_ds = regularized_field(model, 0.0, v)
                soft.assert_equal(dr_ds, 0.0, f"w={format_rational(w)}: dr/ds at (0, {v:+.6f})")
                soft.assert_close(dv_ds, 0.0, abs_tol=1e-14,
                                  message=f"w={format_rational(w)}: dv/ds at (0, {v:+.6f}) is {dv_ds!r}")

    # h = 0 run into the collision manifold: infinite time in s
    params = ctx.params_for(Fraction(1, 2)).with_overrides(curvature=0.0)
    model = reduce(params)
    init = to_regularized(model, initial_state(params, model, 1.0))
    traj = integrate_regularized(model, init, 0.0, ctx.opts.with_(stop_r_min=1e-200))
    s_end = float(traj.s[-1])
    soft.assert_equal(traj.status, TrajectoryStatus.STOP_EVENT, "approach to r = 1e-200 did not complete")
    soft.assert_greater(s_end, 50.0, f"r = 1e-200 reached at s = {s_end:.6g}")
    soft.assert_close(float(traj.v[-1]), -SQRT2, abs_tol=1e-6, message="v does not settle at -sqrt(2)")
    soft.assert_true(bool(np.all(np.diff(traj.v) >= -1e-12)), "v is not monotone on the approach")
    return f"r = 1e-200 reached at s = {s_end:.4g}"


def check_exponent_recovery(soft: SoftAssertions, ctx: VerifyContext) -> str:
    rows = []
    for w in TEST_W:
        params = ctx.params_for(w)
        model = reduce(params)
        form = asymptotic_form(w)
        fit = near_singularity_fit(model, approach_branch(model, params, opts=ctx.opts), opts=ctx.opts)
        soft.assert_close(fit.gamma_hat, form.gamma_f, abs_tol=1e-3,
                          message=f"w={format_rational(w)}: gamma_hat {fit.gamma_hat:.6g}")
        soft.assert_close(fit.prefactor_hat, form.psi0, rel_tol=1e-3,
                          message=f"w={format_rational(w)}: prefactor {fit.prefactor_hat:.6g} vs {form.psi0:.6g}")
        rows.append(f"{format_rational(w)}: {fit.gamma_hat:.5f}")
    return "gamma_hat " + ", ".join(rows)


def check_bounce(soft: SoftAssertions, ctx: VerifyContext) -> str:
    expected_rules = {Fraction(2): SignRule.SAME_SIGN, Fraction(7, 3): SignRule.FLIPPED}
    for w, rule in expected_rules.items():
        params = ctx.params_for(w)
        model = reduce(params)
        cls = classify(w)
        form = asymptotic_form(w)
        pre = approach_branch(model, params, opts=ctx.opts)
        result = extend_through_singularity(model, cls, pre, opts=ctx.opts)
        label = f"w={format_rational(w)}"
        soft.assert_equal(result.sign_rule, rule, f"{label}: sign rule {result.sign_rule.value}")
        soft.assert_close(result.continuity_gap, 0.0, abs_tol=1e-12, message=f"{label}: continuity gap")
        soft.assert_true(bool(np.all(result.post_branch.a > 0)), f"{label}: continued branch leaves a > 0")
        soft.assert_close(result.gamma_hat_post, form.gamma_f, abs_tol=1e-3,
                          message=f"{label}: continued exponent {result.gamma_hat_post:.6g}")
        drift = float(np.nanmax(hamiltonian_drift(model, result.post_branch)))
        soft.assert_less(drift, 1e-9, f"{label}: continued branch leaves the energy level ({drift:.3g})")
        soft.assert_less(result.mirror_gap, 1e-5, f"{label}: continued branch is not the mirror image "
                                                  f"({result.mirror_gap:.3g})")

        other = extend_through_singularity(model, cls, pre, match_tau=5.0 * result.match_tau, opts=ctx.opts)
        post, other_post = result.post_branch, other.post_branch
        gap = sup_relative_gap(post.tau, post.a, post.p_mom, other_post.tau, other_post.a)
        soft.assert_less(gap, 1e-5, f"{label}: continued branch depends on the matching time ({gap:.3g})")

    obstructed = Fraction(5, 3)
    params = ctx.params_for(obstructed)
    model = reduce(params)
    pre = approach_branch(model, params, opts=ctx.opts)
    soft.assert_raises(NoExtensionError, extend_through_singularity, model, classify(obstructed), pre,
                       reason="q-even", message="w=5/3 must be obstructed with reason q-even")
    return "w=2 SameSign, w=7/3 Flipped, w=5/3 obstructed"


def check_parity_law(soft: SoftAssertions, ctx: VerifyContext) -> str:
    pairs = enumerate_script_p(33)
    for p, q in pairs:
        value = real_pow_rational(-1.0, Fraction(p, q))
        soft.assert_equal(math.copysign(1.0, value), float((-1) ** p), f"sign of (-1)^({p}/{q})")
    soft.assert_raises(ImaginaryBranchError, real_pow_rational, -1.0, Fraction(1, 4),
                       message="even root of -1 must have no real value")
    return f"{len(pairs)} admissible pairs with q <= 33"


def check_c3_coefficient(soft: SoftAssertions, ctx: VerifyContext) -> str:
    # G = 1 keeps 4 pi G / 3 away from 1 so the missing factor is visible
    params = ctx.params_for(Fraction(2)).with_overrides(newton_g=1.0)
    model = reduce(params)
    record = next(r for r in compare_printed_coefficients(params, model) if r["name"] == "c3")
    expected = 2.0 * params.sigma ** 2 / (params.c_tilde * params.rho_w)
    soft.assert_close(record["derived"], expected, rel_tol=1e-12, message="derived c3 is not 2 sigma^2/(c_tilde rho_w)")
    for a in np.geomspace(1e-3, 1.0, 25):
        soft.assert_close(reduced_accel(model, float(a)), model.time_scale ** 2 * full_accel(float(a), params),
                          rel_tol=1e-12, message=f"a={a:.6g}: derived reduction disagrees with the physical ODE")
    return (f"printed c3 {record['printed']:.6g}, derived {record['derived']:.6g} "
            f"(ratio {record['derived'] / record['printed']:.6g})")


def check_energy_polynomial(soft: SoftAssertions, ctx: VerifyContext) -> str:
    ratios = []
    for w in (Fraction(1, 2), Fraction(1), Fraction(2)):
        params = ctx.params_for(w, curved=True)
        model = reduce(params)
        traj = integrate_physical(model, initial_state(params, model, 1.0),
                                  ctx.tight.with_(stop_a_min=ORACLE_STOP_A))
        residual = float(np.abs(manifold_residuals(model, traj)).max())
        soft.assert_less(residual, 1e-8, f"w={format_rational(w)}: derived energy polynomial residual {residual:.3g}")
        for record in compare_terms(printed_g_tilde_terms(params), g_tilde_terms(model)):
            ratios.append(f"{format_rational(w)}/{record['label']}: {record['coef_ratio']:.3g}")
    return "derived/printed " + ", ".join(ratios)


def check_field_exponents(soft: SoftAssertions, ctx: VerifyContext) -> str:
    mismatched = []
    for w in (Fraction(2), Fraction(7, 3)):
        params = ctx.params_for(w, curved=True)
        model = reduce(params)
        phys = integrate_physical(model, initial_state(params, model, 1.0), ctx.opts)
        reg = integrate_regularized(model, handoff_state(model, phys), phys.h_level,
                                    ctx.tight.with_(stop_r_min=1e-40), tau0=float(phys.tau[-1]))
        residual = float(np.abs(manifold_residuals(model, reg)).max())
        soft.assert_less(residual, 1e-8, f"w={format_rational(w)}: derived field leaves the manifold ({residual:.3g})")
        for record in compare_terms(printed_g_terms(params), g_terms(model)):
            if not record["exponent_matches"]:
                mismatched.append(f"{format_rational(w)}/{record['label']}: printed {record['printed_exponent']} "
                                  f"derived {record['derived_exponent']}")
    return "exponent mismatches " + (", ".join(mismatched) if mismatched else "none")


CHECKS: Sequence[VerifyCheck] = (
    VerifyCheck("classification", "admissible-pairs", check_admissible_pairs),
    VerifyCheck("classification", "random-rationals", check_random_rationals),
    VerifyCheck("reduction", "acceleration-equivalence", check_reduction_equivalence),
    VerifyCheck("integration", "zero-energy-oracle", check_zero_energy_oracle),
    VerifyCheck("integration", "conservation", check_conservation),
    VerifyCheck("integration", "chart-equivalence", check_chart_equivalence),
    VerifyCheck("blowup", "collision-manifold", check_collision_manifold),
    VerifyCheck("bounce", "exponent-recovery", check_exponent_recovery),
    VerifyCheck("bounce", "extension", check_bounce),
    VerifyCheck("bounce", "parity-law", check_parity_law),
    VerifyCheck("printed-forms", "c3-coefficient", check_c3_coefficient),
    VerifyCheck("printed-forms", "energy-polynomial-factor", check_energy_polynomial),
    VerifyCheck("printed-forms", "field-exponents", check_field_exponents),
)


def suite_names() -> List[str]:
    return sorted({check.suite for check in CHECKS})


def run_verify(params: CosmologyParams, opts: Optional[IntegratorOptions] = None,
               suites: Optional[Sequence[str]] = None, report: Optional[ReportManager] = None) -> ReportManager:
    """
    Run the invariant checks.

    Args:
        params: Base parameters; checks override w (and K where a curved
            universe is needed)
        opts: Options for approach and bounce runs ([INTEGRATOR] when omitted)
        suites: Restrict to these suite names
        report: Report to append to; a new one when omitted

    Returns:
        ReportManager holding one row per check
    """
    if opts is None:
        opts = IntegratorOptions.from_config()
    ctx = VerifyContext(params=params, opts=opts, tight=opts.with_(rel_tol=1e-13, abs_tol=1e-15))
    selected = [check for check in CHECKS if suites is None or check.suite in suites]
    report = report or ReportManager()
    report.set_environment_info({
        "params": params.to_dict(),
        "rel_tol": opts.rel_tol,
        "abs_tol": opts.abs_tol,
        "seed": ctx.seed,
    })

    report.start_session()
    for check in selected:
        soft = SoftAssertions(f"{check.suite}.{check.name}")
        started = time.perf_counter()
        detail = None
        failures: List[str] = []
        try:
            detail = check.func(soft, ctx)
            status = "failed" if soft.has_failures() else "passed"
            failures = [failure["message"] for failure in soft.get_failures()]
        except Exception as e:
            logger.exception(f"Check {check.suite}/{check.name} raised")
            status = "error"
            reason = getattr(e, "reason", type(e).__name__)
            failures = [f"{reason}: {e}"]
        duration = time.perf_counter() - started
        soft.log_summary()
        report.add_check_result(check.name, check.suite, status, duration, detail,
                                failures[:MAX_REPORTED_FAILURES])
        logger.info(f"{check.suite}/{check.name}: {status} in {duration:.2f} s")
    report.end_session()
    return report
