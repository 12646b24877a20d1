import math

import numpy as np
import pytest

from services.pipeline import build_study
from src.analysis.oracles import single_machine_oracle
from src.core.errors import DimensionError, NoEventError, ResolutionError, SmallSignalBoundError
from src.core.linearize import rescale_model
from src.core.simulate import (
    Perturbation,
    PerturbationKind,
    compute_metrics,
    default_perturbation,
    max_oscillation_frequency,
    screen_generators,
    simulate_response,
    suggest_time_step,
)
from src.utils.config import RESOLUTION_GUARD


@pytest.fixture
def single_model(single_machine_case):
    return build_study(single_machine_case).model


def _step(gen_id, magnitude=-0.05, start=0.0):
    return Perturbation(PerturbationKind.POWER_STEP, gen_id, magnitude, start)


class TestPerturbation:
    def test_kind_from_string(self):
        assert Perturbation('speed_impulse', 1, 0.01).kind == PerturbationKind.SPEED_IMPULSE

    def test_negative_start(self):
        with pytest.raises(ValueError):
            _step(1, start=-1.0)

    def test_default_targets_largest_non_reference(self, study9):
        pert = default_perturbation(study9.model)
        assert pert.target_gen == 2
        assert pert.kind == PerturbationKind.POWER_STEP
        assert pert.magnitude == -0.05

    def test_default_for_single_machine(self, single_model):
        assert default_perturbation(single_model).target_gen == 1


class TestSingleMachine:
    def test_closed_form(self, single_model):
        trace = simulate_response(single_model, _step(1), horizon=20.0, dt=0.01)
        report = single_machine_oracle(0.1, 0.05, -0.05, trace)
        assert report.passed

    def test_delayed_event(self, single_model):
        trace = simulate_response(single_model, _step(1, start=1.005), horizon=10.0, dt=0.01)
        assert np.all(trace.speeds[trace.times < 1.005] == 0.0)
        assert single_machine_oracle(0.1, 0.05, -0.05, trace).passed

    def test_metrics(self, single_model):
        trace = simulate_response(single_model, _step(1), horizon=40.0, dt=0.01)
        metrics = compute_metrics(trace)
        tau = 0.1 / 0.05
        assert metrics.nadir_p == pytest.approx(60.0 - 1.0 / (2 * math.pi), abs=1e-6)
        assert metrics.t_r == pytest.approx(tau * math.log(9.0), rel=1e-3)
        assert metrics.peak_deviation < 0
        assert metrics.t_s > metrics.t_r
        assert metrics.final_frequency == pytest.approx(metrics.nadir_p, abs=1e-6)

    def test_speed_impulse(self, single_model):
        trace = simulate_response(single_model, Perturbation('speed_impulse', 1, 0.02), horizon=5.0, dt=0.01)
        assert trace.speeds[0, 0] == pytest.approx(0.02)
        expected = 0.02 * np.exp(-0.5 * trace.times)
        assert np.allclose(trace.speeds[:, 0], expected, atol=1e-12)


class TestGuards:
    def test_small_signal_bound(self, study9):
        with pytest.raises(SmallSignalBoundError):
            simulate_response(study9.model, _step(2, magnitude=0.5))

    def test_unknown_target(self, study9):
        with pytest.raises(DimensionError):
            simulate_response(study9.model, _step(7), dt=suggest_time_step(study9.model))

    def test_coarse_step_rejected(self, study9):
        with pytest.raises(ResolutionError):
            simulate_response(study9.model, _step(2), dt=0.5)

    def test_suggested_step_resolves_fastest_mode(self, study9):
        dt = suggest_time_step(study9.model)
        assert dt <= RESOLUTION_GUARD / max_oscillation_frequency(study9.model)
        assert dt <= 0.01

    def test_no_event(self, study9):
        model = study9.model
        trace = simulate_response(model, _step(2, magnitude=0.0), horizon=1.0, dt=suggest_time_step(model))
        with pytest.raises(NoEventError):
            compute_metrics(trace)

    def test_non_positive_horizon(self, single_model):
        with pytest.raises(ValueError):
            simulate_response(single_model, _step(1), horizon=0.0)


class TestStockResponse:
    @pytest.fixture(scope='class')
    def trace9(self, study9):
        model = study9.model
        return simulate_response(model, default_perturbation(model), horizon=30.0, dt=suggest_time_step(model))

    def test_grid(self, trace9):
        assert trace9.times[0] == 0.0
        assert trace9.times[-1] == pytest.approx(30.0)
        assert trace9.speeds.shape == (len(trace9.times), 3)
        assert trace9.relative_angles.shape == (len(trace9.times), 2)

    def test_settles_to_common_frequency(self, trace9, study9):
        model = study9.model
        b = np.zeros(model.A.shape[0])
        b[model.speed_index(2)] = 1.0 / model.inertia[0]
        steady = np.linalg.solve(model.A, -b * -0.05)
        final = trace9.speeds[-1]
        assert np.allclose(final, steady[model.speed_slice], rtol=1e-3)
        assert np.allclose(final, final[0], rtol=1e-3)

    def test_nadir_below_nominal(self, trace9):
        metrics = compute_metrics(trace9)
        assert metrics.nadir_p < 60.0
        assert min(metrics.per_gen_nadir.values()) <= metrics.nadir_p + 1e-12
        assert metrics.t_p > 0

    def test_rows(self, trace9):
        row = trace9.rows()[0]
        assert list(row) == ['time', 'f_coi', 'f_2', 'f_3', 'f_1', 'delta_2,1', 'delta_3,1']


class TestScreening:
    def test_every_generator_passes_on_stock_case(self, study9):
        results = screen_generators(study9.model, horizon=30.0)
        assert [r.gen_id for r in results] == [2, 3, 1]
        assert all(r.passed for r in results)


@pytest.fixture
def two_model(two_machine_case):
    return build_study(two_machine_case).model


def _coi_deviation(speeds, weights):
    return speeds @ (weights / weights.sum())


class TestInertialStep:
    def test_has_no_target(self):
        assert Perturbation('inertial_step', 3, -0.5).target_gen is None

    def test_other_kinds_need_a_target(self):
        with pytest.raises(ValueError):
            Perturbation(PerturbationKind.POWER_STEP, None, -0.05)

    def test_default_perturbation_kind(self, study9):
        pert = default_perturbation(study9.model, magnitude=-0.5, kind='inertial_step')
        assert pert.kind == PerturbationKind.INERTIAL_STEP
        assert pert.target_gen is None

    def test_matches_power_step_on_single_machine(self, single_model):
        # one machine with M = 0.1: an acceleration of -0.5 is a -0.05 p.u. step
        inertial = simulate_response(single_model, Perturbation('inertial_step', None, -0.5), horizon=10.0, dt=0.01)
        step = simulate_response(single_model, _step(1, magnitude=-0.05), horizon=10.0, dt=0.01)
        assert np.allclose(inertial.speeds, step.speeds, rtol=1e-12, atol=1e-15)

    def test_identical_machines_move_together(self, two_model):
        a = -0.01
        trace = simulate_response(two_model, Perturbation('inertial_step', None, a), horizon=20.0, dt=0.01)
        d = 0.02 / 0.1
        expected = a / d * (1.0 - np.exp(-d * trace.times))
        assert np.allclose(trace.speeds[:, 0], trace.speeds[:, 1], atol=1e-12)
        assert np.allclose(trace.speeds[:, 0], expected, atol=1e-10)
        assert np.allclose(trace.relative_angles, 0.0, atol=1e-12)

    def test_bound_uses_machine_rating(self, study9):
        model = study9.model
        largest = float(np.max(model.inertia * model.base_mva / model.ratings))
        too_big = 1.01 * 0.1 / largest
        with pytest.raises(SmallSignalBoundError):
            simulate_response(model, Perturbation('inertial_step', None, -too_big), dt=suggest_time_step(model))
        simulate_response(model, Perturbation('inertial_step', None, -0.99 * 0.1 / largest),
                          horizon=1.0, dt=suggest_time_step(model))

    def test_nadir_deepens_with_inertia(self, study9):
        model = study9.model
        dt = suggest_time_step(model)
        pert = Perturbation('inertial_step', None, -0.5)
        base = compute_metrics(simulate_response(model, pert, horizon=30.0, dt=dt))
        heavier = rescale_model(model, inertia_factor=1.5)
        heavy = compute_metrics(simulate_response(heavier, pert, horizon=30.0, dt=suggest_time_step(heavier)))
        assert heavy.nadir_p < base.nadir_p < 60.0


class TestLinearity:
    def test_doubling_the_event_doubles_the_response(self, study9):
        model = study9.model
        dt = suggest_time_step(model)
        single = simulate_response(model, _step(2, magnitude=-0.02), horizon=10.0, dt=dt)
        double = simulate_response(model, _step(2, magnitude=-0.04), horizon=10.0, dt=dt)
        assert np.allclose(double.speeds, 2.0 * single.speeds, rtol=1e-10, atol=1e-15)
        assert np.allclose(double.relative_angles, 2.0 * single.relative_angles, rtol=1e-10, atol=1e-15)

    def test_inertial_step_is_the_sum_of_proportional_power_steps(self, study9):
        model = study9.model
        dt = suggest_time_step(model)
        a = -0.5
        whole = simulate_response(model, Perturbation('inertial_step', None, a), horizon=10.0, dt=dt)
        parts = sum(
            simulate_response(model, _step(gid, magnitude=M * a), horizon=10.0, dt=dt).speeds
            for gid, M in zip(model.generator_ids, model.inertia)
        )
        assert np.allclose(whole.speeds, parts, rtol=1e-9, atol=1e-13)

    def test_halving_the_step_leaves_grid_values_unchanged(self, study9):
        model = study9.model
        dt = suggest_time_step(model)
        pert = _step(2, magnitude=-0.05, start=0.37)
        coarse = simulate_response(model, pert, horizon=10.0, dt=dt)
        fine = simulate_response(model, pert, horizon=10.0, dt=dt / 2)
        assert fine.times[::2] == pytest.approx(coarse.times)
        assert np.allclose(fine.speeds[::2], coarse.speeds, rtol=1e-8, atol=1e-12)


class TestAntiphase:
    def test_mean_frequency_stays_at_base(self, two_model):
        eps = 0.01
        dt = 0.01
        up = simulate_response(two_model, Perturbation('speed_impulse', 1, eps), horizon=10.0, dt=dt)
        down = simulate_response(two_model, Perturbation('speed_impulse', 2, eps), horizon=10.0, dt=dt)
        speeds = up.speeds - down.speeds
        assert np.abs(speeds).max() >= eps - 1e-12
        assert np.allclose(_coi_deviation(speeds, up.inertia_weights), 0.0, atol=1e-12)
