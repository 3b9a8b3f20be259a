"""
Adaptive integration of the reduced physical system and the blown-up system.

Both charts are advanced by an embedded Dormand-Prince 5(4) pair with PI
step-size control. The integration variable always increases; the physical
chart carries y = [a, P, s] in tau, the regularized chart y = [r, v, tau]
in s. Stop events are localized with ``scipy.optimize.brentq`` on the
fraction of the final step, re-stepping from the step start.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq, minimize_scalar

from bigbang.blowup import RegState, g_terms, manifold_spec, to_regularized
from bigbang.cosmo import PhysState, ReducedModel, hamiltonian, potential_value, reduced_accel
from bigbang.exceptions import DomainError, InsufficientDataError, IntegrationError, RejectedInputError
from bigbang.ratnum import ExponentTriple
from config.config_manager import config_manager
from utils.logger import get_logger


logger = get_logger(__name__)

EPS = np.finfo(float).eps
TINY = np.finfo(float).tiny

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# fifth-order minus embedded fourth-order weights
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

# PI controller exponents for a fifth-order error estimate
PI_ALPHA = 0.7 / 5.0
PI_BETA = 0.4 / 5.0

FIT_MIN_POINTS = 3


class Direction(Enum):
    """Orientation of a run relative to the singularity."""
    TOWARD = "toward"
    AWAY = "away"


class Chart(Enum):
    PHYSICAL = "physical"
    REGULARIZED = "regularized"


class TrajectoryStatus(Enum):
    """Why a run stopped. Truncations are statuses, not exceptions."""
    STOP_EVENT = "stop-event"
    TIME_SPAN = "time-span"
    NEAR_COLLISION_MANIFOLD = "near-collision-manifold"
    STEP_UNDERFLOW = "truncated-step-underflow"
    MAX_STEPS = "truncated-max-steps"

    @property
    def truncated(self) -> bool:
        return self in (TrajectoryStatus.STEP_UNDERFLOW, TrajectoryStatus.MAX_STEPS)


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances, stop conditions and controller settings for one run."""
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 200000
    stop_a_min: Optional[float] = 1e-3
    stop_a_max: Optional[float] = None
    stop_r_min: Optional[float] = None
    stop_time_span: Optional[float] = None
    stop_v_tol: Optional[float] = None
    direction: Direction = Direction.TOWARD
    event_tol: float = 1e-12
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 10.0
    initial_step: Optional[float] = None
    max_step: Optional[float] = None
    stop_r_max: Optional[float] = None
    stop_time_left: Optional[float] = None
    project_energy: bool = False

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise RejectedInputError("Tolerances must be positive", reason="bad-tolerance")
        if self.max_steps < 1:
            raise RejectedInputError("max_steps must be positive", reason="bad-max-steps")
        for name in ("stop_a_min", "stop_a_max", "stop_time_span", "stop_v_tol", "initial_step", "max_step",
                     "stop_r_max", "stop_time_left"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise RejectedInputError(f"{name} must be positive when given", reason=f"bad-{name}")
        if self.stop_r_min is not None and self.stop_r_min < 0:
            raise RejectedInputError("stop_r_min must be non-negative", reason="bad-stop_r_min")
        if not 0 < self.min_factor < 1 < self.max_factor:
            raise RejectedInputError("Step factors must satisfy 0 < min < 1 < max", reason="bad-step-factors")
        if isinstance(self.direction, str):
            object.__setattr__(self, "direction", Direction(self.direction))

    @classmethod
    def from_config(cls, **overrides: Any) -> "IntegratorOptions":
        """Defaults from the [INTEGRATOR] section, then keyword overrides."""
        settings = dict(config_manager.get_integrator_config())
        settings.update(overrides)
        return cls(**settings)

    def with_(self, **changes: Any) -> "IntegratorOptions":
        return replace(self, **changes)


@dataclass(frozen=True)
class StepStatistics:
    accepted: int = 0
    rejected: int = 0
    domain_rejections: int = 0
    evaluations: int = 0

    def to_dict(self) -> Dict[str, Any]:
        total = self.accepted + self.rejected
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "domain_rejections": self.domain_rejections,
            "evaluations": self.evaluations,
            "acceptance_ratio": self.accepted / total if total else 1.0,
        }


@dataclass(frozen=True)
class Trajectory:
    """
    Accepted samples of one run, both charts co-recorded.

    ``tau`` is internal scaled time (always increasing along physical runs),
    ``s`` the blow-up time. On the collision manifold a = 0 and P is NaN.
    """
    chart: Chart
    direction: Direction
    h_level: float
    tau: np.ndarray
    s: np.ndarray
    a: np.ndarray
    p_mom: np.ndarray
    r: np.ndarray
    v: np.ndarray
    status: TrajectoryStatus
    stats: StepStatistics = field(default_factory=StepStatistics)

    def __len__(self) -> int:
        return len(self.tau)

    @property
    def time(self) -> np.ndarray:
        """Integration variable of the chart."""
        return self.tau if self.chart is Chart.PHYSICAL else self.s

    def phys_state(self, index: int) -> PhysState:
        return PhysState(a=float(self.a[index]), p_mom=float(self.p_mom[index]), tau=float(self.tau[index]))

    def reg_state(self, index: int) -> RegState:
        return RegState(r=float(self.r[index]), v=float(self.v[index]), s=float(self.s[index]))

    def first_state(self) -> PhysState:
        return self.phys_state(0)

    def last_state(self) -> PhysState:
        return self.phys_state(-1)


class DormandPrince54:
    """
    One adaptive run of an autonomous system y' = f(y).

    Stage evaluations outside the domain raise DomainError and count as a
    rejected step; the step is retried with the minimum factor.
    """

    def __init__(self, rhs: Callable[[np.ndarray], np.ndarray], options: IntegratorOptions,
                 relative_only: Tuple[int, ...] = ()):
        self.rhs = rhs
        self.options = options
        self.relative_only = relative_only
        self.evaluations = 0

    def _f(self, y: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        return self.rhs(y)

    def scale(self, y: np.ndarray, y_new: np.ndarray) -> np.ndarray:
        opts = self.options
        magnitude = np.maximum(np.abs(y), np.abs(y_new))
        sc = opts.abs_tol + opts.rel_tol * magnitude
        for i in self.relative_only:
            sc[i] = max(opts.rel_tol * magnitude[i], TINY)
        return sc

    def step(self, y: np.ndarray, k1: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray, float]:
        """Advance by h; returns (y_new, f(y_new), RMS error norm)."""
        k2 = self._f(y + h * (A21 * k1))
        k3 = self._f(y + h * (A31 * k1 + A32 * k2))
        k4 = self._f(y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = self._f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = self._f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = self._f(y_new)
        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        err = float(np.sqrt(np.mean((err_vec / self.scale(y, y_new)) ** 2)))
        return y_new, k7, err

    def initial_step(self, y: np.ndarray, k1: np.ndarray) -> float:
        """Starting step from the size of y, f(y) and a trial Euler step."""
        if self.options.initial_step is not None:
            return self.options.initial_step
        sc = self.scale(y, y)
        d0 = float(np.sqrt(np.mean((y / sc) ** 2)))
        d1 = float(np.sqrt(np.mean((k1 / sc) ** 2)))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        while True:
            try:
                k_trial = self._f(y + h0 * k1)
                break
            except DomainError:
                h0 *= 0.1
                if h0 < TINY:
                    return h0
        d2 = float(np.sqrt(np.mean(((k_trial - k1) / sc) ** 2))) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
        return min(100.0 * h0, h1)

    def run(self, t0: float, y0: np.ndarray,
            event: Optional[Callable[[np.ndarray], float]] = None,
            accept_check: Optional[Callable[[np.ndarray], None]] = None,
            extra_stop: Optional[Callable[[np.ndarray], bool]] = None,
            project: Optional[Callable[[np.ndarray], np.ndarray]] = None
            ) -> Tuple[List[float], List[np.ndarray], TrajectoryStatus, StepStatistics]:
        """
        Integrate until an event, the time span, an extra stop or a truncation.

        Args:
            t0: Initial value of the integration variable
            y0: Initial state
            event: g(y), positive before the stop; a sign change to g <= 0 is localized
            accept_check: Called on every accepted state; raises to abort the run
            extra_stop: Checked after each accepted step
            project: Maps each accepted state back onto its invariant level

        Returns:
            (times, states, status, statistics)
        """
        opts = self.options
        t = float(t0)
        y = np.array(y0, dtype=float)
        times = [t]
        states = [y.copy()]
        t_end = t + opts.stop_time_span if opts.stop_time_span is not None else math.inf

        if event is not None and event(y) <= 0:
            return times, states, TrajectoryStatus.STOP_EVENT, StepStatistics(evaluations=self.evaluations)

        k1 = self._f(y)
        h = self.initial_step(y, k1)
        if opts.max_step is not None:
            h = min(h, opts.max_step)
        accepted = rejected = domain_rejections = 0
        err_prev = 1e-4
        last_rejected = False
        nonfinite = False
        status = None

        while status is None:
            if accepted >= opts.max_steps:
                status = TrajectoryStatus.MAX_STEPS
                break
            min_step = 10.0 * EPS * max(abs(t), 1.0)
            clipped = False
            if t + h >= t_end:
                h = t_end - t
                clipped = True
                if h <= min_step:
                    status = TrajectoryStatus.TIME_SPAN
                    break
            if h < min_step:
                if nonfinite:
                    raise IntegrationError(f"Non-finite state near t={t!r}", reason="non-finite-state")
                status = TrajectoryStatus.STEP_UNDERFLOW
                break

            try:
                y_new, k_new, err = self.step(y, k1, h)
            except DomainError:
                domain_rejections += 1
                rejected += 1
                h *= opts.min_factor
                last_rejected = True
                continue

            if not (math.isfinite(err) and np.all(np.isfinite(y_new))):
                nonfinite = True
                rejected += 1
                h *= opts.min_factor
                last_rejected = True
                continue
            nonfinite = False

            if err > 1.0:
                rejected += 1
                h *= max(opts.min_factor, opts.safety * err ** (-1.0 / 5.0))
                last_rejected = True
                continue

            if accept_check is not None:
                accept_check(y_new)

            if event is not None and event(y_new) <= 0:
                theta = self._localize(event, y, k1, h)
                y_event = self.step(y, k1, theta * h)[0] if theta < 1.0 else y_new
                if project is not None:
                    y_event = project(y_event)
                accepted += 1
                times.append(t + theta * h)
                states.append(y_event)
                status = TrajectoryStatus.STOP_EVENT
                break

            if project is not None:
                y_new = project(y_new)
                k_new = self._f(y_new)

            accepted += 1
            t = t_end if clipped else t + h
            y = y_new
            k1 = k_new
            times.append(t)
            states.append(y.copy())

            if clipped:
                status = TrajectoryStatus.TIME_SPAN
                break
            if extra_stop is not None and extra_stop(y):
                status = TrajectoryStatus.NEAR_COLLISION_MANIFOLD
                break

            err_floor = max(err, 1e-10)
            factor = opts.safety * err_floor ** (-PI_ALPHA) * err_prev ** PI_BETA
            factor = min(opts.max_factor, max(opts.min_factor, factor))
            if last_rejected:
                factor = min(factor, 1.0)
            err_prev = max(err, 1e-4)
            h *= factor
            if opts.max_step is not None:
                h = min(h, opts.max_step)
            last_rejected = False

        stats = StepStatistics(accepted=accepted, rejected=rejected,
                               domain_rejections=domain_rejections, evaluations=self.evaluations)
        return times, states, status, stats

    def _localize(self, event: Callable[[np.ndarray], float], y: np.ndarray, k1: np.ndarray, h: float) -> float:
        """Fraction theta of the step where the event function changes sign."""
        tol = self.options.event_tol

        def g_of(theta: float) -> float:
            if theta == 0.0:
                return event(y)
            return event(self.step(y, k1, theta * h)[0])

        g_end = g_of(1.0)
        if abs(g_end) <= tol:
            return 1.0
        theta = brentq(g_of, 0.0, 1.0, xtol=1e-15, rtol=4.0 * EPS, maxiter=200)
        if abs(g_of(theta)) > tol:
            logger.debug(f"Event localized to |g| = {abs(g_of(theta)):.3g} above tolerance {tol:.3g}")
        return theta


def _physical_rhs(model: ReducedModel) -> Callable[[np.ndarray], np.ndarray]:
    s_power = -float(1 + model.exps.beta)

    def rhs(y: np.ndarray) -> np.ndarray:
        a, p_mom = y[0], y[1]
        accel = reduced_accel(model, a)
        return np.array([p_mom, accel, a ** s_power])

    return rhs


def _regularized_rhs(model: ReducedModel) -> Callable[[np.ndarray], np.ndarray]:
    beta = model.exps.beta_f
    rest_level = model.lead_coef / beta
    terms = [(term.coef, float(term.exponent)) for term in g_terms(model)]

    def rhs(y: np.ndarray) -> np.ndarray:
        r, v = y[0], y[1]
        if r < 0:
            raise DomainError(f"Blown-up radius must be non-negative, got {r!r}", reason="r-negative")
        dv_ds = beta * (v * v - rest_level)
        if r > 0:
            for coef, exponent in terms:
                dv_ds -= coef * r ** exponent
        return np.array([(beta + 1.0) * r * v, dv_ds, r])

    return rhs


def integrate_physical(model: ReducedModel, init: PhysState, opts: IntegratorOptions,
                       s0: float = 0.0) -> Trajectory:
    """
    Advance (a, P) under a' = P, P' = dV/da, co-recording s with ds = dtau / a^(1/gamma).

    TOWARD runs stop at ``stop_a_min`` or once the local time to the
    singularity, gamma a / |P|, falls to ``stop_time_left``; AWAY runs stop
    at ``stop_a_max``. Either also stops at the end of ``stop_time_span``.
    With ``project_energy`` every accepted P is reset to the magnitude the
    energy level prescribes.
    """
    toward = opts.direction is Direction.TOWARD
    stop_level = opts.stop_a_min if toward else opts.stop_a_max
    time_left = opts.stop_time_left if toward else None
    if stop_level is None and time_left is None and opts.stop_time_span is None:
        raise IntegrationError("Physical run has no stop condition", reason="no-stop-condition")

    gamma = model.exps.gamma_f
    event_parts: List[Callable[[np.ndarray], float]] = []
    if stop_level is not None:
        if toward:
            event_parts.append(lambda y: y[0] - stop_level)
        else:
            event_parts.append(lambda y: stop_level - y[0])
    if time_left is not None:
        event_parts.append(lambda y: gamma * y[0] / -y[1] - time_left if y[1] < 0 else math.inf)
    event = None
    if event_parts:
        event = lambda y: min(part(y) for part in event_parts)  # noqa: E731

    h_level = hamiltonian(model, init.a, init.p_mom)

    project = None
    if opts.project_energy:
        def project(y: np.ndarray) -> np.ndarray:
            if not y[0] > 0:
                return y
            speed_sq = 2.0 * (h_level + potential_value(model, y[0]))
            if not (speed_sq > 0 and math.isfinite(speed_sq)):
                return y
            projected = y.copy()
            projected[1] = math.copysign(math.sqrt(speed_sq), y[1])
            return projected

    logger.debug(f"Physical run from a={init.a:.17g}, P={init.p_mom:.17g}, h={h_level:.6g}, "
                 f"direction={opts.direction.value}")
    stepper = DormandPrince54(_physical_rhs(model), opts)
    times, states, status, stats = stepper.run(init.tau, np.array([init.a, init.p_mom, s0]),
                                               event=event, project=project)

    ys = np.array(states)
    a = ys[:, 0]
    p_mom = ys[:, 1]
    exps = model.exps
    traj = Trajectory(
        chart=Chart.PHYSICAL,
        direction=opts.direction,
        h_level=h_level,
        tau=np.array(times),
        s=ys[:, 2],
        a=a,
        p_mom=p_mom,
        r=a ** float(1 + exps.beta),
        v=a ** exps.beta_f * p_mom,
        status=status,
        stats=stats,
    )
    _log_finish(traj)
    return traj


def integrate_regularized(model: ReducedModel, init: RegState, h: float, opts: IntegratorOptions,
                          tau0: float = 0.0, relative_tau: bool = False) -> Trajectory:
    """
    Advance (r, v) in s under the regularized field, co-recording tau with dtau = r ds.

    Stops at ``stop_r_min`` (TOWARD, r0 > 0), at ``stop_r_max`` (AWAY), at
    ``stop_time_span`` in s, or once |v| is within ``stop_v_tol`` of sqrt(2).
    With ``project_energy`` every accepted v is reset onto level h.
    ``relative_tau`` controls the error of tau relative to its own size,
    for runs whose tau is measured from the singularity.
    """
    spec = manifold_spec(model, h)
    if init.on_collision_manifold:
        residual = spec.residual(0.0, init.v)
        if abs(residual) > 1e-12:
            raise DomainError(f"Start point r=0, v={init.v!r} is not on the collision manifold",
                              reason="off-collision-manifold")

    use_r_event = (opts.direction is Direction.TOWARD and opts.stop_r_min is not None
                   and opts.stop_r_min > 0 and init.r > 0)
    use_r_max_event = opts.direction is Direction.AWAY and opts.stop_r_max is not None
    if (not (use_r_event or use_r_max_event) and opts.stop_time_span is None
            and opts.stop_v_tol is None):
        raise IntegrationError("Regularized run has no stop condition", reason="no-stop-condition")

    event = None
    if use_r_event:
        log_r_min = math.log(opts.stop_r_min)
        event = lambda y: math.log(y[0]) - log_r_min if y[0] > 0 else -math.inf  # noqa: E731
    elif use_r_max_event:
        log_r_max = math.log(opts.stop_r_max)
        event = lambda y: log_r_max - math.log(y[0]) if y[0] > 0 else math.inf  # noqa: E731

    project = None
    if opts.project_energy:
        def project(y: np.ndarray) -> np.ndarray:
            if y[0] < 0:
                return y
            v_sq = -spec.residual(float(y[0]), 0.0)
            if not v_sq > 0:
                return y
            projected = y.copy()
            projected[1] = math.copysign(math.sqrt(v_sq), y[1])
            return projected

    def accept_check(y: np.ndarray) -> None:
        if y[0] < 0:
            raise IntegrationError(f"Accepted step left r >= 0: r={y[0]!r}", reason="r-negative-excursion")

    extra_stop = None
    if opts.stop_v_tol is not None:
        v_limit = math.sqrt(spec.lead_constant)
        extra_stop = lambda y: abs(abs(y[1]) - v_limit) < opts.stop_v_tol  # noqa: E731

    logger.debug(f"Regularized run from r={init.r:.17g}, v={init.v:.17g}, h={h:.6g}")
    stepper = DormandPrince54(_regularized_rhs(model), opts, relative_only=(0, 2) if relative_tau else (0,))
    times, states, status, stats = stepper.run(
        init.s, np.array([init.r, init.v, tau0]),
        event=event, accept_check=accept_check, extra_stop=extra_stop, project=project)

    ys = np.array(states)
    r = ys[:, 0]
    v = ys[:, 1]
    exps = model.exps
    positive = r > 0
    a = np.zeros_like(r)
    p_mom = np.full_like(r, np.nan)
    with np.errstate(over="ignore"):
        a[positive] = r[positive] ** exps.gamma_f
        p_mom[positive] = r[positive] ** float(-exps.beta * exps.gamma) * v[positive]
    traj = Trajectory(
        chart=Chart.REGULARIZED,
        direction=opts.direction,
        h_level=h,
        tau=ys[:, 2],
        s=np.array(times),
        a=a,
        p_mom=p_mom,
        r=r,
        v=v,
        status=status,
        stats=stats,
    )
    _log_finish(traj)
    return traj


def _log_finish(traj: Trajectory) -> None:
    message = (f"{traj.chart.value} run finished: {traj.status.value}, {len(traj)} samples, "
               f"{traj.stats.accepted} accepted / {traj.stats.rejected} rejected")
    if traj.status.truncated:
        logger.warning(f"Truncated trajectory: {message}")
    else:
        logger.debug(message)


def handoff_state(model: ReducedModel, traj: Trajectory) -> RegState:
    """Blown-up image of the last physical sample, carrying its s."""
    reg = to_regularized(model, traj.last_state())
    return RegState(r=reg.r, v=reg.v, s=float(traj.s[-1]))


def approach_floor(exps: ExponentTriple, min_time_to_singularity: float, a_floor: float = 1e-3) -> float:
    """
    Smallest scale factor a physical-chart approach is asked to reach.

    The zero-energy scale factor at the given time-to-singularity, but no
    smaller than ``a_floor``.
    """
    return max(a_floor, (math.sqrt(2.0) * (exps.beta_f + 1.0) * min_time_to_singularity) ** exps.gamma_f)


def _hamiltonian_residuals(model: ReducedModel, traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    """(H - h, max(1, |h|, |V|)) per sample; NaN where a = 0 or V overflows."""
    h = traj.h_level
    residual = np.full(len(traj), np.nan)
    scale = np.ones(len(traj))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(len(traj)):
            a = traj.a[i]
            p_mom = traj.p_mom[i]
            if not (a > 0 and np.isfinite(p_mom)):
                continue
            potential = potential_value(model, a)
            if not np.isfinite(potential):
                continue
            residual[i] = 0.5 * p_mom * p_mom - potential - h
            scale[i] = max(1.0, abs(h), abs(potential))
    return residual, scale


def hamiltonian_drift(model: ReducedModel, traj: Trajectory) -> np.ndarray:
    """|H - h| / max(1, |h|, V(a)) per sample; NaN where the physical chart is not representable."""
    residual, scale = _hamiltonian_residuals(model, traj)
    return np.abs(residual) / scale


def sup_relative_gap(ref_tau: np.ndarray, ref_a: np.ndarray, ref_slope: np.ndarray,
                     tau: np.ndarray, a: np.ndarray) -> float:
    """
    max |a - a_ref(tau)| / |a_ref(tau)| over the samples inside the reference span.

    The reference is the cubic Hermite interpolant through (ref_tau, ref_a)
    with slopes ref_slope; ref_tau must be increasing.
    """
    ref_tau = np.asarray(ref_tau, dtype=float)
    increasing = np.concatenate(([True], np.diff(ref_tau) > 0))
    if increasing.sum() < 2:
        raise InsufficientDataError("Reference curve needs at least two distinct times", reason="too-few-samples")
    spline = CubicHermiteSpline(ref_tau[increasing], np.asarray(ref_a, dtype=float)[increasing],
                                np.asarray(ref_slope, dtype=float)[increasing])
    tau = np.asarray(tau, dtype=float)
    a = np.asarray(a, dtype=float)
    inside = (tau >= ref_tau[increasing][0]) & (tau <= ref_tau[increasing][-1])
    if not inside.any():
        raise InsufficientDataError("No samples inside the reference span", reason="disjoint-spans")
    reference = spline(tau[inside])
    return float(np.max(np.abs(a[inside] - reference) / np.abs(reference)))


def manifold_residuals(model: ReducedModel, traj: Trajectory) -> np.ndarray:
    spec = manifold_spec(model, traj.h_level)
    return np.array([spec.residual(float(r), float(v)) for r, v in zip(traj.r, traj.v)])


def trajectory_frame(traj: Trajectory, model: ReducedModel, tau_offset: Optional[float] = None) -> pd.DataFrame:
    """
    Tabular form: tau, s, a, P, r, v, H_residual, M_residual.

    With ``tau_offset`` the tau column is reported as tau_offset - tau,
    the time-to-singularity convention.
    """
    h_res, _ = _hamiltonian_residuals(model, traj)
    tau = traj.tau if tau_offset is None else tau_offset - traj.tau
    return pd.DataFrame({
        "tau": tau,
        "s": traj.s,
        "a": traj.a,
        "P": traj.p_mom,
        "r": traj.r,
        "v": traj.v,
        "H_residual": h_res,
        "M_residual": manifold_residuals(model, traj),
    })


@dataclass(frozen=True)
class PowerLawFit:
    """ln a = gamma_hat ln(delta) + ln(prefactor_hat), delta the time to the epoch."""
    gamma_hat: float
    prefactor_hat: float
    r_squared: float
    epoch: float
    samples: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma_hat": self.gamma_hat,
            "prefactor_hat": self.prefactor_hat,
            "r_squared": self.r_squared,
            "epoch": self.epoch,
            "samples": self.samples,
        }


def _line_fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Least-squares line; returns (slope, intercept, residual sum of squares)."""
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.dot(residual, residual))


def fit_power_law(tau: np.ndarray, a: np.ndarray, p_mom: Optional[np.ndarray] = None,
                  approaching: bool = True, epoch: Optional[float] = None,
                  epoch_tol: Optional[float] = None) -> PowerLawFit:
    """
    Fit a = prefactor * delta^gamma with the epoch estimated when not given.

    The epoch lies after the last sample for an approach and before the
    first for a receding branch. It minimizes the residual of the log-log
    line fit over ln(offset) with bounded Brent search; the bracket comes
    from a/|P| at the reference sample, or from the sampled time span.
    """
    tau = np.asarray(tau, dtype=float)
    a = np.asarray(a, dtype=float)
    if len(tau) < FIT_MIN_POINTS:
        raise InsufficientDataError(f"Power-law fit needs at least {FIT_MIN_POINTS} samples, got {len(tau)}",
                                    reason="too-few-samples")
    if np.any(a <= 0):
        raise DomainError("Power-law fit needs a > 0 throughout", reason="a-nonpositive")
    ln_a = np.log(a)
    ref_index = -1 if approaching else 0
    ref = tau[ref_index]
    elapsed = (ref - tau) if approaching else (tau - ref)

    if epoch is None:
        span = float(tau[-1] - tau[0]) or 1.0
        base = None
        if p_mom is not None:
            p_ref = abs(float(p_mom[ref_index]))
            if p_ref > 0 and math.isfinite(p_ref):
                base = float(a[ref_index]) / p_ref
        if base is not None:
            bounds = (math.log(1e-4 * base), math.log(base))
        else:
            bounds = (math.log(1e-6 * span), math.log(10.0 * span))

        # epoch_tol is absolute in tau; the search runs in ln(offset)
        xatol = 1e-8 if epoch_tol is None else min(1e-3, max(1e-10, epoch_tol / math.exp(bounds[1])))

        def objective(log_offset: float) -> float:
            return _line_fit(np.log(elapsed + math.exp(log_offset)), ln_a)[2]

        result = minimize_scalar(objective, bounds=bounds, method="bounded",
                                 options={"xatol": xatol, "maxiter": 500})
        offset = math.exp(float(result.x))
        epoch = ref + offset if approaching else ref - offset
    else:
        offset = (epoch - ref) if approaching else (ref - epoch)
        if not offset > 0:
            raise DomainError("Epoch must lie beyond the sampled range", reason="epoch-inside-samples")

    delta = elapsed + offset
    slope, intercept, ss_res = _line_fit(np.log(delta), ln_a)
    ss_tot = float(np.sum((ln_a - ln_a.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(gamma_hat=slope, prefactor_hat=math.exp(intercept), r_squared=r_squared,
                       epoch=float(epoch), samples=len(tau))


def diagnostics_report(traj: Trajectory, model: ReducedModel, min_fit_samples: int = 8) -> Dict[str, Any]:
    """
    Invariant maxima, step statistics and the local power-law exponent over
    the final decade in a.
    """
    h_res, scale = _hamiltonian_residuals(model, traj)
    drift = np.abs(h_res) / scale
    residual = manifold_residuals(model, traj)
    report: Dict[str, Any] = {
        "chart": traj.chart.value,
        "direction": traj.direction.value,
        "status": traj.status.value,
        "samples": len(traj),
        "h_level": traj.h_level,
        "max_hamiltonian_drift": float(np.nanmax(drift)) if np.isfinite(drift).any() else 0.0,
        "max_hamiltonian_residual": float(np.nanmax(np.abs(h_res))) if np.isfinite(h_res).any() else 0.0,
        "max_manifold_residual": float(np.abs(residual).max()) if len(residual) else 0.0,
        "steps": traj.stats.to_dict(),
        "final_state": {
            "tau": float(traj.tau[-1]), "s": float(traj.s[-1]),
            "a": float(traj.a[-1]), "P": float(traj.p_mom[-1]),
            "r": float(traj.r[-1]), "v": float(traj.v[-1]),
        },
        "fit": None,
    }

    mask = (traj.a > 0) & np.isfinite(traj.p_mom)
    if mask.sum() >= min_fit_samples:
        a = traj.a[mask]
        approaching = bool(a[-1] < a[0])
        a_small = float(a.min())
        window = mask & (traj.a <= 10.0 * a_small)
        if window.sum() >= min_fit_samples:
            try:
                fit = fit_power_law(traj.tau[window], traj.a[window], traj.p_mom[window],
                                    approaching=approaching)
                report["fit"] = fit.to_dict()
            except (InsufficientDataError, DomainError) as e:
                logger.debug(f"Final-decade fit skipped: {e}")
    return report
