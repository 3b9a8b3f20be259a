"""
Tests for the asymptotic form, exponent recovery and continuation through a = 0.
"""

import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest

from bigbang.bounce import (SignRule, approach_blown_up, approach_branch, asymptotic_form, branch_value,
                            closed_form_zero_energy, difference_quotients, extend_through_singularity,
                            fit_exponent, fit_junction, initial_state, leading_order, near_singularity_fit,
                            omega_branch_status, rdot_leading, real_pow_rational, scale_factor_at,
                            time_to_singularity)
from bigbang.cosmo import PhysState, constraint_residual, reduce, scaled_momentum
from bigbang.exceptions import (DomainError, FitQualityError, ImaginaryBranchError, NoExtensionError,
                                 RejectedInputError)
from bigbang.flow import (Direction, TrajectoryStatus, hamiltonian_drift, integrate_physical, manifold_residuals,
                          sup_relative_gap)
from bigbang.ratnum import Parity, classify, enumerate_script_p, exponents_of


@pytest.mark.unit
class TestRealRoots:
    """Real odd-root evaluation of rational powers"""

    @pytest.mark.parametrize("x, e, expected", [
        (-8.0, Fraction(1, 3), -2.0),
        (-8.0, Fraction(2, 3), 4.0),
        (4.0, Fraction(1, 2), 2.0),
        (0.0, Fraction(2, 9), 0.0),
    ])
    def test_real_pow_rational(self, x, e, expected):
        assert real_pow_rational(x, e) == pytest.approx(expected, rel=1e-14)

    def test_even_root_of_negative(self):
        with pytest.raises(ImaginaryBranchError):
            real_pow_rational(-1.0, Fraction(1, 4))

    def test_parity_law(self, soft_assert):
        for p, q in enumerate_script_p(33):
            value = real_pow_rational(-1.0, Fraction(p, q))
            soft_assert.assert_equal(math.copysign(1.0, value), float((-1) ** p), f"sign of (-1)^({p}/{q})")


@pytest.mark.unit
class TestAsymptoticForm:
    """Leading-order form and the sign rule"""

    @pytest.mark.parametrize("beta, gamma, expected", [
        (2, Fraction(1, 3), (3.0 * math.sqrt(2.0)) ** (1.0 / 3.0)),
        (4, Fraction(1, 5), (5.0 * math.sqrt(2.0)) ** 0.2),
    ])
    def test_closed_form_zero_energy(self, beta, gamma, expected):
        exps = exponents_of(Fraction(1, 2) if beta == 2 else Fraction(7, 3))
        assert (exps.beta, exps.gamma) == (beta, gamma)
        assert closed_form_zero_energy(exps, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_closed_form_negative_delta(self):
        with pytest.raises(DomainError) as excinfo:
            closed_form_zero_energy(exponents_of(2), -1e-3)
        assert excinfo.value.reason == "negative-delta"

    def test_leading_order_signs(self):
        assert leading_order(asymptotic_form(Fraction(1, 2)), 1.0) == pytest.approx((3.0 * math.sqrt(2.0)) ** (1 / 3))
        even = asymptotic_form(2)
        assert leading_order(even, -1.0) == pytest.approx(even.psi0, rel=1e-14)
        odd = asymptotic_form(Fraction(7, 3))
        assert leading_order(odd, -1.0) == pytest.approx(-odd.psi0, rel=1e-14)

    def test_sign_rule(self):
        assert SignRule.for_parity(Parity.EVEN) is SignRule.SAME_SIGN
        assert SignRule.for_parity(Parity.ODD) is SignRule.FLIPPED
        odd = asymptotic_form(Fraction(7, 3))
        assert branch_value(odd, SignRule.FLIPPED, -1.0) == pytest.approx(odd.psi0, rel=1e-14)
        assert branch_value(odd, SignRule.FLIPPED, 0.0) == 0.0

    def test_omega_branch_status(self):
        status = omega_branch_status(asymptotic_form(2))
        assert status["omega1"] == {"value": "2/3", "real_for_negative_tau": True}
        assert status["omega2"] == {"value": "2/9", "real_for_negative_tau": True}

    @pytest.mark.parametrize("w", [Fraction(2), Fraction(7, 3)])
    def test_junction_not_differentiable(self, w):
        form = asymptotic_form(w)
        records = difference_quotients(form, [1e-3, 1e-6])
        for record in records:
            assert abs(record["right_quotient"]) == pytest.approx(record["expected_magnitude"], rel=1e-10)
            assert abs(record["left_quotient"]) == pytest.approx(record["expected_magnitude"], rel=1e-10)
        assert abs(records[1]["right_quotient"]) > abs(records[0]["right_quotient"])

    def test_difference_step_must_be_positive(self):
        with pytest.raises(RejectedInputError):
            difference_quotients(asymptotic_form(2), [0.0])


@pytest.mark.unit
class TestTimeToSingularity:
    """Quadrature of the fall time along an energy level"""

    @pytest.mark.parametrize("w", [Fraction(1, 2), Fraction(2), Fraction(7, 3)])
    def test_pure_power_zero_energy(self, pure_power_factory, w):
        model = pure_power_factory(w)
        expected = 1.0 / (math.sqrt(2.0) * (model.exps.beta_f + 1.0))
        assert time_to_singularity(model, 0.0, 1.0) == pytest.approx(expected, rel=1e-10)
        assert time_to_singularity(model, 0.0, 0.0) == 0.0

    def test_rdot_leading(self, pure_power_factory, model_factory):
        model = pure_power_factory(Fraction(2))
        expected = math.sqrt(2.0) * (model.exps.beta_f + 1.0)
        assert rdot_leading(model, 0.0, 0.0) == pytest.approx(expected, rel=1e-14)
        assert rdot_leading(model, 0.0, 0.3) == pytest.approx(expected, rel=1e-14)
        assert rdot_leading(model_factory(2), 0.5, 0.0) == pytest.approx(expected, rel=1e-14)
        with pytest.raises(DomainError) as excinfo:
            rdot_leading(model, -2.0, 1.0)
        assert excinfo.value.reason == "turning-region"

    def test_scale_factor_inverts(self, pure_power_factory):
        model = pure_power_factory(Fraction(7, 3))
        a = scale_factor_at(model, 0.0, 1e-4, 1.0)
        assert a == pytest.approx(closed_form_zero_energy(model.exps, 1e-4), rel=1e-9)

    def test_initial_state_on_constraint(self, default_params, model_factory):
        model = model_factory(2)
        state = initial_state(default_params, model, 0.5)
        adot = state.p_mom / model.time_scale
        assert state.p_mom < 0
        assert scaled_momentum(model, adot) == pytest.approx(state.p_mom)
        assert constraint_residual(0.5, adot, default_params) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.integration
class TestExponentRecovery:
    """Power-law exponent of the approach branch"""

    @pytest.mark.parametrize("w", [Fraction(1, 2), Fraction(1), Fraction(2), Fraction(7, 3)])
    def test_full_model(self, default_params, integrator_options, w):
        params = default_params.with_overrides(w=w)
        model = reduce(params)
        form = asymptotic_form(w)
        fit = near_singularity_fit(model, approach_branch(model, params, opts=integrator_options),
                                   integrator_options)
        assert fit.gamma_hat == pytest.approx(form.gamma_f, abs=1e-3)
        assert fit.prefactor_hat == pytest.approx(form.psi0, rel=1e-3)

    def test_blown_up_approach(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(2))
        model = reduce(params)
        pre = approach_branch(model, params, opts=integrator_options)
        leg = approach_blown_up(model, pre, integrator_options)
        assert leg.status is TrajectoryStatus.STOP_EVENT
        assert np.all(leg.tau < 0)
        assert np.all(np.diff(leg.tau) > 0)
        assert -leg.tau[0] == pytest.approx(time_to_singularity(model, pre.h_level, float(pre.a[-1])), rel=1e-14)
        # stops at half the lower end of the fit window
        assert -leg.tau[-1] == pytest.approx(5e-14, rel=1e-6)
        assert float(np.abs(manifold_residuals(model, leg)).max()) < 1e-12

    def test_blown_up_approach_needs_an_approach(self, model_factory, default_params, integrator_options):
        model = model_factory(2)
        away = integrate_physical(model, initial_state(default_params, model, 0.1, sign=1.0),
                                  integrator_options.with_(direction=Direction.AWAY, stop_a_max=1.0))
        with pytest.raises(DomainError) as excinfo:
            approach_blown_up(model, away, integrator_options)
        assert excinfo.value.reason == "not-approaching"

    def test_window(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(7, 3))
        model = reduce(params)
        fit = fit_exponent(approach_branch(model, params, opts=integrator_options), window=(1e-6, 1e-4))
        assert fit.gamma_hat == pytest.approx(0.2, abs=1e-3)

    def test_bad_window(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(2))
        traj = approach_branch(reduce(params), params, opts=integrator_options)
        with pytest.raises(RejectedInputError) as excinfo:
            fit_exponent(traj, window=(1e-4, 1e-6))
        assert excinfo.value.reason == "bad-window"

    def test_a0_below_floor(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(2))
        with pytest.raises(RejectedInputError) as excinfo:
            approach_branch(reduce(params), params, a0=1e-4, opts=integrator_options)
        assert excinfo.value.reason == "a0-below-floor"


@pytest.mark.integration
class TestExtension:
    """Continuation through the singularity"""

    @pytest.mark.parametrize("w, rule", [(Fraction(2), SignRule.SAME_SIGN), (Fraction(7, 3), SignRule.FLIPPED)])
    def test_branch_regularizable(self, default_params, integrator_options, w, rule):
        params = default_params.with_overrides(w=w)
        model = reduce(params)
        pre = approach_branch(model, params, opts=integrator_options)
        result = extend_through_singularity(model, classify(w), pre, opts=integrator_options)
        assert result.sign_rule is rule
        assert result.continuity_gap == 0.0
        assert abs(result.epoch_fit_pre) <= 1e-15
        assert abs(result.epoch_fit_post) <= 1e-15
        assert np.all(result.post_branch.a > 0)
        assert result.post_branch.direction is Direction.AWAY
        assert result.gamma_hat_pre == pytest.approx(float(result.form.gamma), abs=1e-3)
        assert result.gamma_hat_post == pytest.approx(float(result.form.gamma), abs=1e-3)
        assert result.prefactor_post == pytest.approx(result.form.psi0, rel=1e-3)
        assert result.epoch > pre.tau[-1]
        assert float(np.nanmax(hamiltonian_drift(model, result.post_branch))) < 1e-9
        assert result.mirror_gap < 1e-5

        data = result.to_dict(pre_csv="pre.csv", post_csv="post.csv")
        assert data["sign_rule"] == rule.value
        assert data["pre_csv"] == "pre.csv"
        assert data["kind"] == "BranchRegularizable"
        assert data["mirror_gap"] == result.mirror_gap

    def test_frames_measure_time_to_singularity(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(2))
        model = reduce(params)
        pre = approach_branch(model, params, opts=integrator_options)
        result = extend_through_singularity(model, classify(2), pre, opts=integrator_options)
        pre_frame, post_frame = result.frames(model)
        assert len(pre_frame) == len(result.pre_branch) + len(result.pre_blown_up) - 1
        assert len(post_frame) == len(result.post_blown_up) + len(result.post_branch) - 1
        assert (pre_frame["tau"] > 0).all()
        assert (post_frame["tau"] < 0).all()
        assert np.all(np.diff(pre_frame["tau"].to_numpy()) < 0)
        assert np.all(np.diff(post_frame["tau"].to_numpy()) < 0)

    def test_junction_rejects_shifted_epoch(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(2))
        model = reduce(params)
        pre = approach_branch(model, params, opts=integrator_options)
        result = extend_through_singularity(model, classify(2), pre, opts=integrator_options)
        junction = fit_junction(result.pre_blown_up, result.post_blown_up)
        assert junction.continuity_gap == 0.0
        assert junction.pre_fit.samples >= 8
        # post leg leaving a = 0 at tau = 2e-14 instead of 0
        late = dataclasses.replace(result.post_blown_up, tau=result.post_blown_up.tau + 2e-14)
        with pytest.raises(FitQualityError) as excinfo:
            fit_junction(result.pre_blown_up, late)
        assert excinfo.value.reason == "epoch-mismatch"

    @pytest.mark.slow
    def test_match_time_independence(self, default_params, integrator_options):
        params = default_params.with_overrides(w=Fraction(2))
        model = reduce(params)
        cls = classify(2)
        pre = approach_branch(model, params, opts=integrator_options)
        first = extend_through_singularity(model, cls, pre, opts=integrator_options)
        second = extend_through_singularity(model, cls, pre, match_tau=5.0 * first.match_tau,
                                            opts=integrator_options)
        reference = first.post_branch
        gap = sup_relative_gap(reference.tau, reference.a, reference.p_mom, second.post_branch.tau,
                               second.post_branch.a)
        assert gap < 1e-5

    def test_match_tau_must_precede_window(self, pure_power_factory, integrator_options):
        model = pure_power_factory(Fraction(7, 3))
        pre = integrate_physical(model, PhysState(a=1.0, p_mom=-math.sqrt(2.0)),
                                 integrator_options.with_(stop_a_min=0.5))
        with pytest.raises(FitQualityError) as excinfo:
            extend_through_singularity(model, classify(Fraction(7, 3)), pre, match_tau=1e-12,
                                       opts=integrator_options)
        assert excinfo.value.reason == "match-tau-outside-branch"

    def test_seed_slope_checked_against_tolerance(self, pure_power_factory, integrator_options):
        """Seed on the exact law, but the difference quotient of tau^(1/5) is off by about 2e-9"""
        model = pure_power_factory(Fraction(7, 3))
        pre = integrate_physical(model, PhysState(a=1.0, p_mom=-math.sqrt(2.0)),
                                 integrator_options.with_(stop_a_min=0.5))
        with pytest.raises(FitQualityError) as excinfo:
            extend_through_singularity(model, classify(Fraction(7, 3)), pre, opts=integrator_options,
                                       asymptotic_tol=1e-12)
        assert excinfo.value.reason == "seed-slope-mismatch"

    def test_not_branch_regularizable(self, pure_power_factory, integrator_options):
        model = pure_power_factory(Fraction(5, 3))
        pre = integrate_physical(model, PhysState(a=1.0, p_mom=-math.sqrt(2.0)),
                                 integrator_options.with_(stop_a_min=0.5))
        with pytest.raises(NoExtensionError) as excinfo:
            extend_through_singularity(model, classify(Fraction(5, 3)), pre)
        assert excinfo.value.reason == "q-even"
        assert excinfo.value.exit_code == 3

    def test_class_model_mismatch(self, pure_power_factory, integrator_options):
        model = pure_power_factory(Fraction(7, 3))
        pre = integrate_physical(model, PhysState(a=1.0, p_mom=-math.sqrt(2.0)),
                                 integrator_options.with_(stop_a_min=0.5))
        with pytest.raises(RejectedInputError) as excinfo:
            extend_through_singularity(model, classify(2), pre)
        assert excinfo.value.reason == "class-model-mismatch"
