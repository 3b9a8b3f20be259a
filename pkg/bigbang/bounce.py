"""
Continuation of a branch through the singularity.

Near a = 0 every regularizable solution behaves like
a = tau^gamma * Psi(tau^omega1, tau^omega2) with Psi(0, 0) = (sqrt(2)(beta+1))^gamma.
Only Psi(0, 0) is used analytically; the rest comes from integrating on
each side of the singularity. Times in this module are times to (or since)
the singularity unless stated otherwise.
"""

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.optimize import brentq

from bigbang.blowup import SQRT2, RegState, from_regularized, manifold_spec
from bigbang.cosmo import (CosmologyParams, PhysState, ReducedModel, Regime, constraint_adot, scaled_momentum)
from bigbang.exceptions import (DomainError, FitQualityError, ImaginaryBranchError, InsufficientDataError,
                                IntegrationError, NoExtensionError, RejectedInputError)
from bigbang.flow import (Chart, Direction, IntegratorOptions, PowerLawFit, Trajectory, TrajectoryStatus,
                          approach_floor, fit_power_law, handoff_state, integrate_physical, integrate_regularized,
                          sup_relative_gap, trajectory_frame)
from bigbang.ratnum import (ExponentTriple, Parity, RationalLike, RegularityClass, RegularityKind, as_rational,
                            exponents_of, format_rational)
from config.config_manager import config_manager
from utils.logger import get_logger


logger = get_logger(__name__)

# Largest step in s on the blown-up legs; keeps the junction window sampled
BLOWN_UP_MAX_STEP = 0.01


class SignRule(Enum):
    """How the continued branch relates to the real odd root of the incoming one."""
    SAME_SIGN = "SameSign"
    FLIPPED = "Flipped"

    @classmethod
    def for_parity(cls, parity: Parity) -> "SignRule":
        return cls.SAME_SIGN if parity is Parity.EVEN else cls.FLIPPED

    @property
    def factor(self) -> float:
        return 1.0 if self is SignRule.SAME_SIGN else -1.0


@dataclass(frozen=True)
class AsymptoticForm:
    """Leading-order data of a = tau^gamma Psi(tau^omega1, tau^omega2)."""
    w: Fraction
    gamma: Fraction
    beta: Fraction
    omega1: Fraction
    omega2: Fraction
    psi0: float

    @property
    def gamma_f(self) -> float:
        return float(self.gamma)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w": format_rational(self.w),
            "gamma": format_rational(self.gamma),
            "beta": format_rational(self.beta),
            "omega1": format_rational(self.omega1),
            "omega2": format_rational(self.omega2),
            "psi0": self.psi0,
        }


def asymptotic_form(w: RationalLike) -> AsymptoticForm:
    """Exponents and Psi(0, 0) for an equation of state."""
    w = as_rational(w)
    exps = exponents_of(w)
    regime = Regime.of(w)
    if regime is Regime.W_LESS_ONE:
        omega1, omega2 = exps.alpha * exps.gamma / 4, 1 - w
    elif regime is Regime.W_EQUAL_ONE:
        omega1, omega2 = Fraction(1, 3), Fraction(1)
    else:
        omega1, omega2 = 3 * (w - 1) * exps.gamma, exps.gamma
    psi0 = (math.sqrt(2.0) * (exps.beta_f + 1.0)) ** exps.gamma_f
    return AsymptoticForm(w=w, gamma=exps.gamma, beta=exps.beta, omega1=omega1, omega2=omega2, psi0=psi0)


def real_pow_rational(x: float, e: RationalLike) -> float:
    """
    Real value of x^(p/q).

    For x < 0 the real q-th root is taken, which exists only for odd q:
    the result is (-1)^p |x|^(p/q).

    Raises:
        ImaginaryBranchError: x < 0 and q even
    """
    e = as_rational(e)
    if x >= 0:
        return float(x) ** float(e)
    if e.denominator % 2 == 0:
        raise ImaginaryBranchError(
            f"({x!r})^({format_rational(e)}) has no real value: even root of a negative number")
    magnitude = abs(x) ** float(e)
    return -magnitude if e.numerator % 2 else magnitude


def closed_form_zero_energy(exps: ExponentTriple, delta: float) -> float:
    """Pure power law at h = 0: a = (sqrt(2)(beta+1) delta)^gamma."""
    if delta < 0:
        raise DomainError(f"Time to singularity must be non-negative, got {delta!r}", reason="negative-delta")
    return (math.sqrt(2.0) * (exps.beta_f + 1.0) * delta) ** exps.gamma_f


def leading_order(form: AsymptoticForm, tau: float) -> float:
    """tau^gamma * Psi(0, 0) through the real odd root for tau < 0."""
    return real_pow_rational(tau, form.gamma) * form.psi0


def branch_value(form: AsymptoticForm, rule: SignRule, tau: float) -> float:
    """Leading-order a on either side: tau >= 0 incoming, tau < 0 continued with the sign rule."""
    if tau >= 0:
        return leading_order(form, tau)
    return rule.factor * leading_order(form, tau)


def omega_branch_status(form: AsymptoticForm) -> Dict[str, Dict[str, Any]]:
    """Whether tau^omega1 and tau^omega2 have real values for tau < 0."""
    return {
        name: {"value": format_rational(omega), "real_for_negative_tau": omega.denominator % 2 == 1}
        for name, omega in (("omega1", form.omega1), ("omega2", form.omega2))
    }


def _energy_speed_sq(model: ReducedModel, h: float):
    spec = manifold_spec(model, h)

    def v_sq(r: float) -> float:
        return -spec.residual(r, 0.0)

    return v_sq


def rdot_leading(model: ReducedModel, h: float, r: float) -> float:
    """dr/dtau on the energy manifold: (1+beta) sqrt(2 + 2h r^(alpha*gamma) + G_tilde(r))."""
    v_sq = _energy_speed_sq(model, h)(r)
    if v_sq < 0:
        raise DomainError(f"No real motion at r={r!r} on level h={h!r}", reason="turning-region")
    return (model.exps.beta_f + 1.0) * math.sqrt(v_sq)


def time_to_singularity(model: ReducedModel, h: float, a: float, epsrel: float = 1e-13) -> float:
    """
    Time needed to fall from a to a = 0 along energy level h.

    In the blown-up radius the integrand is gamma / |v(r)|, bounded near r = 0.
    """
    if a < 0:
        raise DomainError(f"Scale factor must be non-negative, got {a!r}", reason="a-nonpositive")
    if a == 0:
        return 0.0
    gamma = model.exps.gamma_f
    v_sq = _energy_speed_sq(model, h)
    r_end = a ** float(1 / model.exps.gamma)

    def integrand(r: float) -> float:
        value = v_sq(r)
        if value <= 0:
            raise DomainError(f"Turning point inside [0, {a!r}] on level h={h!r}", reason="turning-region")
        return 1.0 / math.sqrt(value)

    value, _ = quad(integrand, 0.0, r_end, epsabs=0.0, epsrel=epsrel, limit=200)
    return gamma * value


def scale_factor_at(model: ReducedModel, h: float, delta: float, a_hi: float) -> float:
    """Inverse of time_to_singularity on (0, a_hi]."""
    if not delta > 0:
        return 0.0
    try:
        return brentq(lambda a: time_to_singularity(model, h, a) - delta, 0.0, a_hi,
                      xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=200)
    except ValueError as e:
        raise FitQualityError(f"No scale factor below {a_hi!r} reaches time {delta!r}: {e}",
                              reason="match-tau-outside-branch") from e


def difference_quotients(form: AsymptoticForm, steps: Sequence[float],
                         rule: Optional[SignRule] = None) -> List[Dict[str, float]]:
    """
    One-sided difference quotients of the leading-order branch at tau = 0.

    Both sides grow like |tau|^(gamma-1): the junction is continuous but
    not differentiable.
    """
    if rule is None:
        rule = SignRule.for_parity(Parity.of(form.gamma.numerator))
    at_zero = branch_value(form, rule, 0.0)
    records = []
    for step in steps:
        if not step > 0:
            raise RejectedInputError(f"Difference step must be positive, got {step!r}", reason="bad-step")
        records.append({
            "step": step,
            "right_quotient": (branch_value(form, rule, step) - at_zero) / step,
            "left_quotient": (at_zero - branch_value(form, rule, -step)) / step,
            "expected_magnitude": form.psi0 * step ** (form.gamma_f - 1.0),
        })
    return records


def initial_state(params: CosmologyParams, model: ReducedModel, a0: float, sign: float = -1.0) -> PhysState:
    """State at a0 satisfying the Friedmann constraint; contracting for sign < 0."""
    adot = constraint_adot(a0, params, sign)
    return PhysState(a=a0, p_mom=scaled_momentum(model, adot))


def approach_branch(model: ReducedModel, params: CosmologyParams, a0: Optional[float] = None,
                    opts: Optional[IntegratorOptions] = None) -> Trajectory:
    """
    Physical-chart approach from a0 toward the singularity.

    The run stops where the zero-energy time to the singularity drops to
    ``min_time_to_singularity``, never below ``opts.stop_a_min``.
    """
    bounce_config = config_manager.get_bounce_config()
    if a0 is None:
        a0 = bounce_config["initial_scale_factor"]
    if opts is None:
        opts = IntegratorOptions.from_config()
    floor = approach_floor(model.exps, bounce_config["min_time_to_singularity"], opts.stop_a_min or 1e-3)
    if not floor < a0:
        raise RejectedInputError(f"Initial scale factor {a0!r} is not above the approach floor {floor:.6g}",
                                 reason="a0-below-floor")
    run_opts = opts.with_(direction=Direction.TOWARD, stop_a_min=floor, stop_time_left=None)
    return integrate_physical(model, initial_state(params, model, a0), run_opts)


def _fit_window(bounce_config: Dict[str, Any]) -> Tuple[float, float]:
    return bounce_config["fit_time_min"], bounce_config["fit_time_max"]


def _on_level(model: ReducedModel, h: float, reg: RegState, sign: float) -> RegState:
    """Same r, |v| taken from energy level h, with the given sign."""
    v_sq = _energy_speed_sq(model, h)(reg.r)
    if not v_sq > 0:
        raise DomainError(f"No real motion at r={reg.r!r} on level h={h!r}", reason="turning-region")
    return RegState(r=reg.r, v=math.copysign(math.sqrt(v_sq), sign), s=reg.s)


def approach_blown_up(model: ReducedModel, pre: Trajectory, opts: Optional[IntegratorOptions] = None) -> Trajectory:
    """
    Continue a physical approach in the blown-up chart into the junction window.

    The returned leg measures tau from the singularity (negative, rising
    toward 0) and stops once the time to the singularity is half of
    ``fit_time_min``. v is kept on the energy level of ``pre``.
    """
    if pre.chart is not Chart.PHYSICAL or not pre.p_mom[-1] < 0:
        raise DomainError("Incoming branch must be a physical-chart approach", reason="not-approaching")
    bounce_config = config_manager.get_bounce_config()
    if opts is None:
        opts = IntegratorOptions.from_config()
    h = pre.h_level
    fit_time_min, _ = _fit_window(bounce_config)

    start = _on_level(model, h, handoff_state(model, pre), -1.0)
    r_stop = SQRT2 * (model.exps.beta_f + 1.0) * 0.5 * fit_time_min
    if not r_stop < start.r:
        raise FitQualityError(f"Incoming branch ends at r={start.r:.6g}, inside the junction window",
                              reason="handoff-inside-window")
    delta0 = time_to_singularity(model, h, float(pre.a[-1]))
    run_opts = opts.with_(direction=Direction.TOWARD, stop_r_min=r_stop, stop_time_span=None, stop_v_tol=None,
                          max_step=BLOWN_UP_MAX_STEP, project_energy=True)
    logger.debug(f"Blown-up approach from r={start.r:.6g}, {delta0:.6g} before the singularity")
    return integrate_regularized(model, start, h, run_opts, tau0=-delta0, relative_tau=True)


def _asymptotic_mask(traj: Trajectory) -> np.ndarray:
    """Samples within one decade in a of the trajectory's smallest a."""
    valid = (traj.a > 0) & np.isfinite(traj.tau)
    if not valid.any():
        return valid
    return valid & (traj.a <= 10.0 * traj.a[valid].min())


def fit_exponent(traj: Trajectory, window: Optional[Tuple[float, float]] = None,
                 epoch: Optional[float] = None, min_samples: Optional[int] = None) -> PowerLawFit:
    """
    Power-law fit of a against time to (or since) the singularity.

    Args:
        traj: Approaching or receding trajectory with a > 0 in the window
        window: (lo, hi) in time to the singularity; default the decade in a
            nearest the singularity
        epoch: Singularity time in the trajectory's internal tau; estimated
            from the decade nearest the singularity when omitted
        min_samples: Minimum samples in the window (config default 8)

    Returns:
        PowerLawFit with gamma_hat, prefactor_hat and r_squared
    """
    bounce_config = config_manager.get_bounce_config()
    if min_samples is None:
        min_samples = bounce_config["fit_min_samples"]
    valid = (traj.a > 0) & np.isfinite(traj.tau)
    if valid.sum() < min_samples:
        raise InsufficientDataError(f"Trajectory has {int(valid.sum())} usable samples, need {min_samples}")
    a_valid = traj.a[valid]
    approaching = bool(a_valid[-1] < a_valid[0])
    near = _asymptotic_mask(traj)
    if near.sum() < min_samples:
        near = valid

    if epoch is None:
        p_mom = traj.p_mom[near] if np.all(np.isfinite(traj.p_mom[near])) else None
        epoch = fit_power_law(traj.tau[near], traj.a[near], p_mom, approaching=approaching,
                              epoch_tol=bounce_config["epoch_tol"]).epoch

    delta = (epoch - traj.tau) if approaching else (traj.tau - epoch)
    if window is None:
        selected = near & (delta > 0)
    else:
        lo, hi = window
        if not 0 < lo < hi:
            raise RejectedInputError(f"Fit window must satisfy 0 < lo < hi, got {window!r}", reason="bad-window")
        selected = valid & (delta >= lo) & (delta <= hi)
    count = int(selected.sum())
    if count < min_samples:
        raise InsufficientDataError(f"Fit window holds {count} samples, need at least {min_samples}")
    return fit_power_law(traj.tau[selected], traj.a[selected], approaching=approaching, epoch=epoch)


def near_singularity_fit(model: ReducedModel, pre: Trajectory,
                         opts: Optional[IntegratorOptions] = None) -> PowerLawFit:
    """Exponent and prefactor of an approach, fitted on its blown-up continuation over the junction window."""
    window = _fit_window(config_manager.get_bounce_config())
    return fit_exponent(approach_blown_up(model, pre, opts), window=window, epoch=0.0)


def _limit_at_epoch(fit: PowerLawFit) -> float:
    """prefactor * delta^gamma_hat as delta -> 0."""
    if fit.gamma_hat > 0:
        return 0.0
    if fit.gamma_hat == 0:
        return fit.prefactor_hat
    return math.inf


@dataclass(frozen=True)
class JunctionFit:
    """
    Power-law fits of both blown-up legs at the shared epoch tau = 0.

    ``epoch_pre`` and ``epoch_post`` are each leg's own residual-minimizing
    epoch; ``continuity_gap`` compares the limits of the two fitted laws.
    """
    pre_fit: PowerLawFit
    post_fit: PowerLawFit
    epoch_pre: float
    epoch_post: float
    continuity_gap: float


def fit_junction(pre_leg: Trajectory, post_leg: Trajectory, window: Optional[Tuple[float, float]] = None,
                 epoch_tol: Optional[float] = None, min_samples: Optional[int] = None) -> JunctionFit:
    """
    Fit both sides of the singularity and check that they meet there.

    Both legs carry tau measured from the singularity. Each leg's epoch is
    first estimated on its own; both must lie within ``epoch_tol`` of 0.

    Raises:
        FitQualityError: a leg reaches a = 0 away from the shared epoch
        InsufficientDataError: a leg has too few samples in the window
    """
    bounce_config = config_manager.get_bounce_config()
    if window is None:
        window = _fit_window(bounce_config)
    if epoch_tol is None:
        epoch_tol = bounce_config["junction_epoch_tol"]
    if min_samples is None:
        min_samples = bounce_config["fit_min_samples"]
    lo, hi = window

    epochs = []
    for leg, approaching in ((pre_leg, True), (post_leg, False)):
        delta = -leg.tau if approaching else leg.tau
        selected = (leg.a > 0) & np.isfinite(leg.p_mom) & (delta >= lo) & (delta <= hi)
        if selected.sum() < min_samples:
            raise InsufficientDataError(f"Junction window holds {int(selected.sum())} samples, "
                                        f"need at least {min_samples}")
        estimate = fit_power_law(leg.tau[selected], leg.a[selected], leg.p_mom[selected],
                                 approaching=approaching, epoch_tol=1e-6 * lo)
        epochs.append(estimate.epoch)
    epoch_pre, epoch_post = epochs
    mismatch = max(abs(epoch_pre), abs(epoch_post))
    if mismatch > epoch_tol:
        raise FitQualityError(f"Branches reach a = 0 at {epoch_pre:.6g} and {epoch_post:.6g}, "
                              f"not at the shared epoch (allowed {epoch_tol:.3g})", reason="epoch-mismatch")

    pre_fit = fit_exponent(pre_leg, window=window, epoch=0.0, min_samples=min_samples)
    post_fit = fit_exponent(post_leg, window=window, epoch=0.0, min_samples=min_samples)
    limits = (_limit_at_epoch(pre_fit), _limit_at_epoch(post_fit))
    gap = math.inf if any(math.isinf(x) for x in limits) else abs(limits[0] - limits[1])
    return JunctionFit(pre_fit=pre_fit, post_fit=post_fit, epoch_pre=epoch_pre, epoch_post=epoch_post,
                       continuity_gap=gap)


def mirror_gap(pre: Trajectory, post: Trajectory, epoch: float) -> float:
    """
    Sup-relative distance of the continued physical branch from the incoming one reflected about the epoch.

    The field is time-reversal symmetric, so an even continuation of a
    regularizable branch retraces a(epoch - delta) at epoch + delta.
    """
    return sup_relative_gap(2.0 * epoch - pre.tau[::-1], pre.a[::-1], -pre.p_mom[::-1], post.tau, post.a)


@dataclass(frozen=True)
class BounceResult:
    """
    Incoming branch, continued branch and the junction data.

    ``epoch`` is the singularity time in internal tau of the physical legs;
    the blown-up legs measure tau from the singularity. Presented times are
    times to the singularity: positive before the bounce, negative after it.
    """
    w: Fraction
    regularity: RegularityClass
    form: AsymptoticForm
    pre_branch: Trajectory
    post_branch: Trajectory
    pre_blown_up: Trajectory
    post_blown_up: Trajectory
    sign_rule: SignRule
    match_tau: float
    epoch: float
    epoch_fit_pre: float
    epoch_fit_post: float
    seed: PhysState
    seed_slope_deviation: float
    continuity_gap: float
    prefactor_gap: float
    mirror_gap: float
    gamma_hat_pre: float
    gamma_hat_post: float
    prefactor_pre: float
    prefactor_post: float

    def to_dict(self, pre_csv: Optional[str] = None, post_csv: Optional[str] = None) -> Dict[str, Any]:
        return {
            "w": format_rational(self.w),
            "gamma": format_rational(self.form.gamma),
            "regularizable": self.regularity.regularizable,
            "kind": self.regularity.kind.value,
            "sign_rule": self.sign_rule.value,
            "psi0": self.form.psi0,
            "continuity_gap": self.continuity_gap,
            "prefactor_gap": self.prefactor_gap,
            "mirror_gap": self.mirror_gap,
            "pre_csv": pre_csv,
            "post_csv": post_csv,
            "gamma_hat_pre": self.gamma_hat_pre,
            "gamma_hat_post": self.gamma_hat_post,
            "prefactor_pre": self.prefactor_pre,
            "prefactor_post": self.prefactor_post,
            "match_tau": self.match_tau,
            "epoch": self.epoch,
            "epoch_fit_pre": self.epoch_fit_pre,
            "epoch_fit_post": self.epoch_fit_post,
            "seed": {"a": self.seed.a, "P": self.seed.p_mom},
            "seed_slope_deviation": self.seed_slope_deviation,
            "omega_branches": omega_branch_status(self.form),
        }

    def frames(self, model: ReducedModel) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """(pre, post) tables with tau as time to the singularity, physical and blown-up legs joined."""
        pre = pd.concat([trajectory_frame(self.pre_branch, model, tau_offset=self.epoch),
                         trajectory_frame(self.pre_blown_up, model, tau_offset=0.0).iloc[1:]],
                        ignore_index=True)
        post = pd.concat([trajectory_frame(self.post_blown_up, model, tau_offset=0.0),
                          trajectory_frame(self.post_branch, model, tau_offset=self.epoch).iloc[1:]],
                         ignore_index=True)
        return pre, post


def extend_through_singularity(model: ReducedModel, cls: RegularityClass, pre: Trajectory,
                               match_tau: Optional[float] = None, opts: Optional[IntegratorOptions] = None,
                               asymptotic_tol: Optional[float] = None) -> BounceResult:
    """
    Continue an approaching branch through a = 0.

    The seed of the continued branch sits at time ``match_tau`` after the
    singularity: its scale factor is the leading-order formula evaluated
    through the real odd root, with the sign rule of the parity of p and Psi
    measured on the incoming branch at time ``match_tau`` before. Its
    velocity follows from the energy level. Both sides of the singularity
    are integrated in the blown-up chart with v held on the energy level;
    the continued branch returns to the physical chart where the incoming
    one left it.

    Raises:
        NoExtensionError: the equation of state is not branch regularizable
        FitQualityError: match_tau lies outside the incoming branch or its
            asymptotic regime, or the branches do not meet at one epoch
    """
    if cls.kind is RegularityKind.NOT_BRANCH:
        raise NoExtensionError(f"w = {format_rational(cls.w)} admits no real branch extension: "
                               f"gamma = {format_rational(cls.gamma)}", reason=cls.reason)
    if cls.w != model.w:
        raise RejectedInputError(f"Classification of w={format_rational(cls.w)} does not match model "
                                 f"w={format_rational(model.w)}", reason="class-model-mismatch")
    if pre.chart is not Chart.PHYSICAL or not pre.p_mom[-1] < 0:
        raise DomainError("Incoming branch must be a physical-chart approach", reason="not-approaching")

    bounce_config = config_manager.get_bounce_config()
    if asymptotic_tol is None:
        asymptotic_tol = bounce_config["asymptotic_tol"]
    if match_tau is None:
        match_tau = bounce_config["match_time_to_singularity"]
    if opts is None:
        opts = IntegratorOptions.from_config()

    h = pre.h_level
    exps = model.exps
    form = asymptotic_form(model.w)
    rule = SignRule.for_parity(cls.p_parity)
    fit_time_min, _ = _fit_window(bounce_config)

    handback = time_to_singularity(model, h, float(pre.a[-1]))
    epoch = float(pre.tau[-1]) + handback
    span = epoch - float(pre.tau[0])
    if not 0 < match_tau < min(span, fit_time_min):
        raise FitQualityError(f"match_tau={match_tau!r} outside (0, {min(span, fit_time_min)!r}): the continued "
                              f"branch must start before the junction window", reason="match-tau-outside-branch")

    a_match = scale_factor_at(model, h, match_tau, float(pre.a.max()))
    psi_match = a_match / match_tau ** form.gamma_f
    deviation = abs(psi_match / form.psi0 - 1.0)
    if deviation > asymptotic_tol:
        raise FitQualityError(f"Psi at match_tau={match_tau!r} deviates from Psi(0,0) by {deviation:.3g} "
                              f"(allowed {asymptotic_tol:.3g})")

    def continued(tau: float) -> float:
        return rule.factor * real_pow_rational(tau, form.gamma) * psi_match

    a_seed = continued(-match_tau)
    if not a_seed > 0:
        raise DomainError(f"Continued branch seed is not positive: {a_seed!r}", reason="seed-nonpositive")
    reg_seed = _on_level(model, h, RegState(r=a_seed ** float(1 / exps.gamma), v=1.0), 1.0)
    seed = from_regularized(model, reg_seed)
    step = 1e-4 * match_tau
    slope = -(continued(-match_tau + step) - continued(-match_tau - step)) / (2.0 * step)
    slope_deviation = abs(slope / seed.p_mom - 1.0)
    if slope_deviation > asymptotic_tol:
        raise FitQualityError(f"Seed momentum {seed.p_mom:.6g} differs from the leading-order slope {slope:.6g} "
                              f"by {slope_deviation:.3g} (allowed {asymptotic_tol:.3g})",
                              reason="seed-slope-mismatch")

    logger.info(f"Continuing w={format_rational(model.w)} through the singularity at tau*={epoch:.17g} "
                f"({rule.value}), seed a={a_seed:.6g}, P={seed.p_mom:.6g}")
    pre_leg = approach_blown_up(model, pre, opts)
    post_leg_opts = opts.with_(direction=Direction.AWAY, stop_r_max=float(pre_leg.r[0]), stop_time_span=None,
                               stop_v_tol=None, max_step=BLOWN_UP_MAX_STEP, project_energy=True)
    post_leg = integrate_regularized(model, reg_seed, h, post_leg_opts, tau0=match_tau, relative_tau=True)
    if post_leg.status is not TrajectoryStatus.STOP_EVENT:
        raise IntegrationError(f"Continued branch stopped before leaving the blown-up chart: "
                               f"{post_leg.status.value}", reason=post_leg.status.value)

    returned = float(post_leg.tau[-1])
    resume = from_regularized(model, post_leg.reg_state(-1))
    post_opts = opts.with_(direction=Direction.AWAY, stop_a_min=None, stop_a_max=None, stop_time_left=None,
                           stop_time_span=span - returned, project_energy=True)
    post = integrate_physical(model, PhysState(a=resume.a, p_mom=resume.p_mom, tau=epoch + returned),
                              post_opts, s0=float(post_leg.s[-1]))

    junction = fit_junction(pre_leg, post_leg)
    prefactor_gap = abs(junction.pre_fit.prefactor_hat - junction.post_fit.prefactor_hat) / form.psi0
    reflected = mirror_gap(pre, post, epoch)
    logger.debug(f"Junction: epochs {junction.epoch_pre:.3g} / {junction.epoch_post:.3g}, "
                 f"mirror gap {reflected:.3g}")

    return BounceResult(
        w=model.w,
        regularity=cls,
        form=form,
        pre_branch=pre,
        post_branch=post,
        pre_blown_up=pre_leg,
        post_blown_up=post_leg,
        sign_rule=rule,
        match_tau=match_tau,
        epoch=epoch,
        epoch_fit_pre=junction.epoch_pre,
        epoch_fit_post=junction.epoch_post,
        seed=seed,
        seed_slope_deviation=slope_deviation,
        continuity_gap=junction.continuity_gap,
        prefactor_gap=prefactor_gap,
        mirror_gap=reflected,
        gamma_hat_pre=junction.pre_fit.gamma_hat,
        gamma_hat_post=junction.post_fit.gamma_hat,
        prefactor_pre=junction.pre_fit.prefactor_hat,
        prefactor_post=junction.post_fit.prefactor_hat,
    )
