"""
End-to-end runs on the 39-bus New England case (MATPOWER tables + synthetic dynamics)
"""

import numpy as np
import pytest

from src.analysis.oracles import laplacian_oracle, polyroot_oracle, run_oracles, schur_oracle
from src.analysis.sweep import SweepConfig, aggregate, equilibrium_output, sample_scenario
from src.core.modal import Verdict, eigen_analysis
from src.core.model import damping_to_machine, inertia_m_to_h, validate_case
from src.core.simulate import PerturbationKind, compute_metrics, default_perturbation, simulate_response, suggest_time_step


class TestCaseData:
    def test_sizes(self, case39):
        assert len(case39.buses) == 39
        assert len(case39.branches) == 46
        assert len(case39.generators) == 10
        assert len(case39.dynamic_generators) == 10
        assert case39.slack_bus.id == 31

    def test_is_valid(self, case39):
        assert validate_case(case39).is_empty

    def test_total_load(self, case39):
        assert sum(ld.P for ld in case39.loads) == pytest.approx(62.5423)

    def test_synthetic_dynamics_stay_in_range(self, case39):
        output = equilibrium_output(case39)
        for gen in case39.generators:
            H = inertia_m_to_h(gen.inertia_M, case39.base_freq, gen.rating_S, case39.base_mva)
            D = damping_to_machine(gen.damping_D, gen.rating_S, case39.base_mva)
            assert 0 < H <= 8.0
            assert 0 < D <= 0.05
            ratio = gen.rating_S / (output[gen.id] * case39.base_mva)
            assert 1.0 <= ratio <= 2.5, f"generator {gen.id}: rating is {ratio:.2f}x its output"


class TestPowerFlow:
    def test_converges(self, study39):
        assert study39.solution.converged
        assert study39.solution.max_mismatch <= 1e-8

    def test_losses_are_small_and_positive(self, study39):
        losses = float(np.real(study39.solution.injections).sum())
        assert 0 < losses < 0.05 * 62.5423

    def test_pv_buses_hold_their_setpoint(self, case39, study39):
        sol = study39.solution
        for bus in case39.buses:
            if bus.voltage_setpoint is not None:
                assert sol.vm[sol.index(bus.id)] == pytest.approx(bus.voltage_setpoint, abs=1e-10)


class TestReduction:
    def test_boundary_is_the_generator_buses(self, study39):
        assert study39.reduced.boundary_buses == tuple(range(30, 40))
        assert study39.reduced.Y_red.shape == (10, 10)
        assert len(study39.reduced.steps) == 29

    def test_matches_dense_schur_complement(self, study39):
        report = schur_oracle(study39.folded, list(study39.reduced.boundary_buses), reduced=study39.reduced)
        assert report.passed, report.detail

    def test_laplacian_matches_finite_differences(self, study39):
        assert laplacian_oracle(study39.reduced, study39.laplacian.H).passed

    def test_polynomial_oracle_is_out_of_range(self, study39):
        assert not polyroot_oracle(study39.model).applicable


class TestVerdict:
    def test_stable(self, study39):
        modal = eigen_analysis(study39.model)
        assert modal.verdict == Verdict.STABLE
        assert len(modal.eigenvalues) == 19
        assert modal.max_real < 0

    def test_every_applicable_oracle_passes(self, study39):
        assert all(r.passed for r in run_oracles(study39) if r.applicable)

    def test_inertial_step_lowers_the_frequency(self, study39):
        model = study39.model
        pert = default_perturbation(model, magnitude=-0.5, kind=PerturbationKind.INERTIAL_STEP)
        trace = simulate_response(model, pert, horizon=20.0, dt=suggest_time_step(model))
        metrics = compute_metrics(trace)
        assert metrics.nadir_p < 60.0
        assert metrics.final_frequency < 60.0


class TestSweepDraw:
    def test_ratings_cover_equilibrium_output(self, case39):
        cfg = SweepConfig(case=case39, n_scenarios=5, seed=7)
        for scenario_id in range(5):
            draw = sample_scenario(cfg, scenario_id)
            output = equilibrium_output(draw.case)
            for gen in draw.case.generators:
                assert gen.rating_S >= output[gen.id] * draw.case.base_mva - 1e-9

    def test_aggregate_inertia_is_in_range(self, case39):
        H_agg, D_agg = aggregate(case39.generators, case39.base_freq, case39.base_mva)
        assert 3.0 <= H_agg <= 6.0
        assert 0.02 <= D_agg <= 0.05
