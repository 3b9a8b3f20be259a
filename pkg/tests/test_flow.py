"""
Tests for the adaptive integrator in the physical and regularized charts.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from bigbang.blowup import SQRT2, RegState, to_regularized
from bigbang.bounce import closed_form_zero_energy, initial_state
from bigbang.cosmo import PhysState, hamiltonian, potential_value, reduce
from bigbang.exceptions import DomainError, InsufficientDataError, IntegrationError, RejectedInputError
from bigbang.flow import (Chart, Direction, IntegratorOptions, TrajectoryStatus, approach_floor,
                          diagnostics_report, fit_power_law, hamiltonian_drift, handoff_state,
                          integrate_physical, integrate_regularized, manifold_residuals, sup_relative_gap,
                          trajectory_frame)


@pytest.mark.unit
class TestIntegratorOptions:
    """Option defaults and validation"""

    def test_from_config(self):
        opts = IntegratorOptions.from_config()
        assert opts.rel_tol == 1e-10
        assert opts.abs_tol == 1e-12
        assert opts.stop_a_min == 1e-3
        assert opts.stop_r_min == 1e-40
        assert opts.direction is Direction.TOWARD
        assert opts.stop_time_left == 1e-9
        assert opts.max_step is None
        assert opts.project_energy is False

    def test_overrides_and_direction_string(self):
        opts = IntegratorOptions.from_config(direction="away", stop_a_max=2.0)
        assert opts.direction is Direction.AWAY
        assert opts.with_(rel_tol=1e-6).rel_tol == 1e-6

    @pytest.mark.parametrize("changes, reason", [
        ({"rel_tol": 0.0}, "bad-tolerance"),
        ({"max_steps": 0}, "bad-max-steps"),
        ({"stop_a_min": -1.0}, "bad-stop_a_min"),
        ({"stop_r_min": -1.0}, "bad-stop_r_min"),
        ({"min_factor": 1.5}, "bad-step-factors"),
        ({"max_step": 0.0}, "bad-max_step"),
        ({"stop_r_max": -1.0}, "bad-stop_r_max"),
        ({"stop_time_left": 0.0}, "bad-stop_time_left"),
    ])
    def test_rejects_invalid(self, changes, reason):
        with pytest.raises(RejectedInputError) as excinfo:
            IntegratorOptions(**changes)
        assert excinfo.value.reason == reason


@pytest.mark.integration
class TestPhysicalChart:
    """Runs of the reduced system in scaled time"""

    def test_free_motion(self, pure_power_factory, integrator_options):
        model = pure_power_factory(Fraction(1, 2)).without_forces()
        traj = integrate_physical(model, PhysState(a=1.0, p_mom=-1.0), integrator_options.with_(stop_a_min=0.5))
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert traj.tau[-1] == pytest.approx(0.5, rel=1e-10)
        assert traj.a[-1] == pytest.approx(0.5, rel=1e-10)
        assert np.all(traj.p_mom == -1.0)

    @pytest.mark.parametrize("w", [Fraction(1, 2), Fraction(2), Fraction(7, 3)])
    def test_zero_energy_oracle(self, pure_power_factory, tight_options, w):
        model = pure_power_factory(w)
        exps = model.exps
        init = PhysState(a=1.0, p_mom=-math.sqrt(2.0 * potential_value(model, 1.0)))
        traj = integrate_physical(model, init, tight_options.with_(stop_a_min=0.05))
        speed = SQRT2 * (exps.beta_f + 1.0)
        delta0 = 1.0 / speed
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert traj.tau[-1] == pytest.approx(delta0 - 0.05 ** (1.0 / exps.gamma_f) / speed, rel=1e-8)
        assert traj.a[-1] == pytest.approx(0.05, rel=1e-10)
        # only where a(tau) is well conditioned in the time to the singularity
        conditioned = exps.gamma_f * traj.a ** (-1.0 / exps.gamma_f) <= 1e4
        expected = np.array([closed_form_zero_energy(exps, delta0 - t) for t in traj.tau[conditioned]])
        np.testing.assert_allclose(traj.a[conditioned], expected, rtol=1e-8)

    def test_time_monotone_and_s_recorded(self, model_factory, integrator_options, default_params):
        model = model_factory(2)
        traj = integrate_physical(model, initial_state(default_params, model, 1.0),
                                  integrator_options.with_(stop_a_min=0.1))
        assert traj.chart is Chart.PHYSICAL
        assert np.all(np.diff(traj.tau) > 0)
        assert np.all(np.diff(traj.s) > 0)
        assert np.all(np.diff(traj.a) < 0)

    def test_conservation(self, default_params, tight_options):
        params = default_params.with_overrides(w=Fraction(7, 3), curvature=0.25)
        model = reduce(params)
        phys = integrate_physical(model, initial_state(params, model, 1.0), tight_options.with_(stop_a_min=0.05))
        assert float(np.nanmax(hamiltonian_drift(model, phys))) < 1e-9
        reg = integrate_regularized(model, handoff_state(model, phys), phys.h_level,
                                    tight_options.with_(stop_r_min=1e-12), tau0=float(phys.tau[-1]))
        assert float(np.abs(manifold_residuals(model, reg)).max()) < 1e-8

    def test_away_run(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        init = initial_state(default_params, model, 0.1, sign=1.0)
        traj = integrate_physical(model, init, integrator_options.with_(direction=Direction.AWAY, stop_a_max=1.0))
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert traj.a[-1] == pytest.approx(1.0, rel=1e-9)

    def test_max_steps_truncates(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        traj = integrate_physical(model, initial_state(default_params, model, 1.0),
                                  integrator_options.with_(max_steps=3))
        assert traj.status is TrajectoryStatus.MAX_STEPS
        assert traj.status.truncated
        assert len(traj) == 4

    def test_no_stop_condition(self, model_factory, integrator_options):
        with pytest.raises(IntegrationError) as excinfo:
            integrate_physical(model_factory(2), PhysState(a=1.0, p_mom=1.0),
                               integrator_options.with_(direction=Direction.AWAY, stop_a_max=None))
        assert excinfo.value.reason == "no-stop-condition"

    def test_start_beyond_event_gives_single_sample(self, model_factory, integrator_options):
        model = model_factory(2)
        traj = integrate_physical(model, PhysState(a=1e-3, p_mom=-1.0), integrator_options.with_(stop_a_min=1e-2))
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert len(traj) == 1
        report = diagnostics_report(traj, model)
        assert report["samples"] == 1
        assert report["fit"] is None

    def test_stops_on_time_left(self, model_factory, default_params, integrator_options):
        """For w > 1 the physical chart is left while a is still far from underflow"""
        model = model_factory(2)
        traj = integrate_physical(model, initial_state(default_params, model, 1.0), integrator_options)
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert traj.a[-1] > integrator_options.stop_a_min
        time_left = model.exps.gamma_f * traj.a[-1] / abs(traj.p_mom[-1])
        assert time_left == pytest.approx(1e-9, rel=2e-3)

    def test_time_left_ignored_away(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        opts = integrator_options.with_(direction=Direction.AWAY, stop_a_max=None)
        with pytest.raises(IntegrationError) as excinfo:
            integrate_physical(model, initial_state(default_params, model, 0.1, sign=1.0), opts)
        assert excinfo.value.reason == "no-stop-condition"

    def test_energy_projection_away(self, pure_power_factory, integrator_options):
        model = pure_power_factory(Fraction(2))
        init = PhysState(a=1e-2, p_mom=math.sqrt(2.0 * potential_value(model, 1e-2)))
        traj = integrate_physical(model, init, integrator_options.with_(
            direction=Direction.AWAY, stop_a_max=1.0, project_energy=True))
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert float(np.nanmax(hamiltonian_drift(model, traj))) < 1e-13
        speed = SQRT2 * (model.exps.beta_f + 1.0)
        delta0 = 1e-2 ** (1.0 / model.exps.gamma_f) / speed
        assert traj.a[-1] == pytest.approx(1.0, rel=1e-9)
        assert traj.tau[-1] == pytest.approx(1.0 / speed - delta0, rel=1e-7)

    def test_repeated_runs_identical(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(7, 3))
        model = reduce(params)
        init = initial_state(params, model, 1.0)
        first = integrate_physical(model, init, integrator_options)
        second = integrate_physical(model, init, integrator_options)
        for name in ("tau", "s", "a", "p_mom", "r", "v"):
            assert np.array_equal(getattr(first, name), getattr(second, name)), name
        assert first.stats == second.stats


@pytest.mark.integration
class TestRegularizedChart:
    """Runs of the blown-up system in s"""

    def test_rest_point_stays_put(self, pure_power_factory, integrator_options):
        model = pure_power_factory(Fraction(1, 2))
        traj = integrate_regularized(model, RegState(r=0.0, v=SQRT2), 0.0,
                                     integrator_options.with_(stop_time_span=1.0))
        assert traj.status is TrajectoryStatus.TIME_SPAN
        assert traj.s[-1] == pytest.approx(1.0)
        assert np.all(traj.r == 0.0)
        assert np.max(np.abs(traj.v - SQRT2)) < 1e-12
        assert np.all(np.isnan(traj.p_mom))

    def test_off_manifold_start_rejected(self, pure_power_factory, integrator_options):
        with pytest.raises(DomainError) as excinfo:
            integrate_regularized(pure_power_factory(2), RegState(r=0.0, v=1.0), 0.0,
                                  integrator_options.with_(stop_time_span=1.0))
        assert excinfo.value.reason == "off-collision-manifold"

    def test_collision_manifold_reached_in_infinite_s(self, default_params, integrator_options):
        """At h = 0 the approach to r = 0 takes unbounded s and v settles monotonically at -sqrt(2)"""
        params = default_params.with_overrides(w=Fraction(1, 2), curvature=0.0)
        model = reduce(params)
        init = to_regularized(model, initial_state(params, model, 1.0))
        traj = integrate_regularized(model, init, 0.0, integrator_options.with_(stop_r_min=1e-200))
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert traj.s[-1] > 50.0
        assert traj.v[-1] == pytest.approx(-SQRT2, abs=1e-6)
        assert np.all(np.diff(traj.v) >= -1e-12)

    def test_chart_equivalence(self, default_params, tight_options):
        params = default_params.with_overrides(w=Fraction(2), curvature=0.25)
        model = reduce(params)
        init = initial_state(params, model, 1.0)
        h = hamiltonian(model, init.a, init.p_mom)
        phys = integrate_physical(model, init, tight_options.with_(stop_a_min=0.1))
        reg = integrate_regularized(model, to_regularized(model, init), h,
                                    tight_options.with_(stop_r_min=0.1 ** float(1 / model.exps.gamma)))
        assert reg.chart is Chart.REGULARIZED
        assert reg.tau[-1] == pytest.approx(phys.tau[-1], rel=1e-6)
        assert reg.s[-1] == pytest.approx(phys.s[-1], rel=1e-6)
        assert reg.p_mom[-1] == pytest.approx(phys.p_mom[-1], rel=1e-6)

    def test_handoff_carries_s(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        phys = integrate_physical(model, initial_state(default_params, model, 1.0),
                                  integrator_options.with_(stop_a_min=0.1))
        reg = handoff_state(model, phys)
        assert reg.s == phys.s[-1]
        assert reg.r == pytest.approx(phys.r[-1], rel=1e-14)

    def test_tau_measured_from_singularity(self, pure_power_factory, integrator_options):
        """On the h = 0 pure power law tau = -r / (sqrt(2)(beta+1)) along the whole leg"""
        model = pure_power_factory(Fraction(2))
        speed = SQRT2 * (model.exps.beta_f + 1.0)
        opts = integrator_options.with_(stop_r_min=1e-7, max_step=0.01, project_energy=True)
        traj = integrate_regularized(model, RegState(r=1e-3, v=-SQRT2), 0.0, opts, tau0=-1e-3 / speed,
                                     relative_tau=True)
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert traj.r[-1] == pytest.approx(1e-7, rel=1e-9)
        assert np.all(np.diff(traj.s) <= 0.01 * (1.0 + 1e-12))
        np.testing.assert_allclose(-traj.tau, traj.r / speed, rtol=1e-7)

    def test_away_to_r_max(self, pure_power_factory, integrator_options):
        model = pure_power_factory(Fraction(2))
        opts = integrator_options.with_(direction=Direction.AWAY, stop_r_max=1e-3, max_step=0.05,
                                        project_energy=True)
        traj = integrate_regularized(model, RegState(r=1e-9, v=SQRT2), 0.0, opts)
        assert traj.status is TrajectoryStatus.STOP_EVENT
        assert traj.direction is Direction.AWAY
        assert traj.r[-1] == pytest.approx(1e-3, rel=1e-9)
        assert np.all(np.diff(traj.r) > 0)
        assert np.all(np.diff(traj.s) <= 0.05 * (1.0 + 1e-12))
        assert float(np.abs(manifold_residuals(model, traj)).max()) < 1e-13

    def test_away_needs_stop(self, pure_power_factory, integrator_options):
        with pytest.raises(IntegrationError) as excinfo:
            integrate_regularized(pure_power_factory(2), RegState(r=1e-9, v=SQRT2), 0.0,
                                  integrator_options.with_(direction=Direction.AWAY))
        assert excinfo.value.reason == "no-stop-condition"


@pytest.mark.unit
class TestPowerLawFit:
    """Epoch and exponent estimation"""

    def test_constant_trajectory(self):
        tau = np.linspace(0.0, 1.0, 10)
        fit = fit_power_law(tau, np.ones_like(tau), epoch=2.0)
        assert fit.gamma_hat == pytest.approx(0.0, abs=1e-12)
        assert fit.r_squared == 1.0
        assert fit.samples == 10

    def test_recovers_exact_power_law(self):
        tau = np.linspace(0.0, 0.9, 60)
        a = 2.0 * (1.0 - tau) ** (1.0 / 3.0)
        p_mom = -(2.0 / 3.0) * (1.0 - tau) ** (-2.0 / 3.0)
        fit = fit_power_law(tau, a, p_mom)
        assert fit.gamma_hat == pytest.approx(1.0 / 3.0, abs=1e-5)
        assert fit.epoch == pytest.approx(1.0, abs=1e-5)
        assert fit.prefactor_hat == pytest.approx(2.0, rel=1e-4)
        assert fit.r_squared > 0.999999

    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            fit_power_law(np.array([0.0, 1.0]), np.array([1.0, 0.5]))

    def test_epoch_inside_samples(self):
        with pytest.raises(DomainError) as excinfo:
            fit_power_law(np.linspace(0.0, 1.0, 5), np.linspace(1.0, 0.5, 5), epoch=0.5)
        assert excinfo.value.reason == "epoch-inside-samples"

    def test_approach_floor(self, pure_power_factory):
        exps = pure_power_factory(Fraction(1, 2)).exps
        assert approach_floor(exps, 1e-9) == pytest.approx((3.0 * SQRT2 * 1e-9) ** (1.0 / 3.0), rel=1e-14)
        assert approach_floor(exps, 1e-9, a_floor=0.5) == 0.5


@pytest.mark.integration
class TestTrajectoryOutput:
    """Tabular form and diagnostics"""

    def test_frame_columns_and_offset(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        traj = integrate_physical(model, initial_state(default_params, model, 1.0),
                                  integrator_options.with_(stop_a_min=0.1))
        frame = trajectory_frame(traj, model)
        assert list(frame.columns) == ["tau", "s", "a", "P", "r", "v", "H_residual", "M_residual"]
        assert len(frame) == len(traj)
        shifted = trajectory_frame(traj, model, tau_offset=float(traj.tau[-1]))
        assert shifted["tau"].iloc[-1] == 0.0
        assert shifted["tau"].iloc[0] > 0

    def test_diagnostics_report(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        traj = integrate_physical(model, initial_state(default_params, model, 1.0), integrator_options)
        report = diagnostics_report(traj, model)
        assert report["status"] == "stop-event"
        assert report["max_hamiltonian_drift"] < 1e-7
        assert report["fit"] is not None
        assert report["fit"]["gamma_hat"] == pytest.approx(float(model.exps.gamma), abs=5e-3)
        frame = trajectory_frame(traj, model)
        assert report["max_hamiltonian_residual"] == float(frame["H_residual"].abs().max())
        # drift divides by a scale of at least 1
        assert report["max_hamiltonian_residual"] >= report["max_hamiltonian_drift"]

    def test_repeated_reports_identical(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        reports = [diagnostics_report(integrate_physical(model, initial_state(default_params, model, 1.0),
                                                         integrator_options), model) for _ in range(2)]
        assert reports[0] == reports[1]


@pytest.mark.unit
class TestSupRelativeGap:
    """Sup-relative comparison on a shared time grid"""

    def test_identical_curves(self):
        tau = np.linspace(1.0, 2.0, 20)
        assert sup_relative_gap(tau, tau ** 2, 2.0 * tau, tau, tau ** 2) == 0.0

    def test_interpolates_between_samples(self):
        ref_tau = np.linspace(1.0, 2.0, 50)
        tau = np.linspace(1.0, 2.0, 333)
        gap = sup_relative_gap(ref_tau, np.exp(ref_tau), np.exp(ref_tau), tau, np.exp(tau))
        assert gap < 1e-8
        assert sup_relative_gap(ref_tau, np.exp(ref_tau), np.exp(ref_tau), tau, 1.001 * np.exp(tau)) == \
            pytest.approx(1e-3, rel=1e-4)

    def test_only_samples_inside_reference_span(self):
        ref_tau = np.linspace(0.0, 1.0, 10)
        tau = np.array([0.5, 5.0])
        assert sup_relative_gap(ref_tau, 1.0 + ref_tau, np.ones(10), tau, np.array([1.5, 100.0])) == \
            pytest.approx(0.0, abs=1e-15)

    def test_repeated_times_dropped(self):
        ref_tau = np.array([0.0, 0.5, 0.5, 1.0])
        assert sup_relative_gap(ref_tau, 1.0 + ref_tau, np.ones(4), np.array([0.25]), np.array([1.25])) == \
            pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("ref_tau, tau, reason", [
        (np.array([1.0, 1.0]), np.array([1.0]), "too-few-samples"),
        (np.array([0.0, 1.0]), np.array([2.0, 3.0]), "disjoint-spans"),
    ])
    def test_rejects(self, ref_tau, tau, reason):
        with pytest.raises(InsufficientDataError) as excinfo:
            sup_relative_gap(ref_tau, np.ones(2), np.zeros(2), tau, np.ones(len(tau)))
        assert excinfo.value.reason == reason
