import math

import pytest

from src.core.errors import CaseParseError, CaseValidationError
from src.core.model import (
    DISPATCH,
    DYNAMICS,
    STRUCTURE,
    BusKind,
    Tech,
    apply_tech_preset,
    damping_to_machine,
    damping_to_system,
    inertia_h_to_m,
    inertia_m_to_h,
    load_case,
    parse_matpower,
    retype_generator,
    save_case,
    scale_dynamics,
    scale_loads,
    validate_case,
)
from src.utils.config import STOCK_CASE_9BUS, STOCK_CASE_9BUS_DYN, STOCK_CASE_9BUS_M
from tests.conftest import make_case


def _bus(id, kind='pq', v=None):
    entry = {'id': id, 'kind': kind}
    if v is not None:
        entry['voltage_setpoint'] = v
    return entry


def _sg(id, bus, dispatch=0.5, rating=100.0):
    return {'id': id, 'bus': bus, 'tech': 'SG', 'inertia_M': 0.1, 'damping_D': 0.02,
            'rating_S': rating, 'dispatch_P': dispatch}


class TestStockCase:
    def test_sizes(self, case9):
        assert len(case9.buses) == 9
        assert len(case9.branches) == 9
        assert len(case9.generators) == 3
        assert case9.slack_bus.id == 1

    def test_is_valid(self, case9):
        assert validate_case(case9).is_empty

    def test_inertia_constant_is_on_machine_rating(self, case9):
        # 9.55 s on 247.5 MVA is the familiar 23.64 s on the 100 MVA system base
        gen = case9.generator(1)
        assert gen.inertia_M == pytest.approx(2 * 23.64 / (2 * math.pi * 60), rel=1e-12)
        assert inertia_m_to_h(gen.inertia_M, 60.0, gen.rating_S, case9.base_mva) == pytest.approx(9.5515, abs=1e-4)

    def test_matpower_matches_json(self, case9):
        case_m = load_case(STOCK_CASE_9BUS_M, dyn=STOCK_CASE_9BUS_DYN)
        assert case_m.bus_ids == case9.bus_ids
        assert [b.kind for b in case_m.buses] == [b.kind for b in case9.buses]
        for a, b in zip(case_m.generators, case9.generators):
            assert a.bus == b.bus
            assert a.inertia_M == pytest.approx(b.inertia_M)
            assert a.damping_D == pytest.approx(b.damping_D)
            assert a.dispatch_P == pytest.approx(b.dispatch_P)
        assert sum(ld.P for ld in case_m.loads) == pytest.approx(3.15)

    def test_round_trip(self, case9, tmp_path):
        path = save_case(case9, tmp_path / 'copy.json')
        assert load_case(path) == case9


class TestInertiaConversion:
    def test_inverse(self):
        M = inertia_h_to_m(4.2, 50.0, 180.0, 100.0)
        assert inertia_m_to_h(M, 50.0, 180.0, 100.0) == pytest.approx(4.2)

    def test_value(self):
        assert inertia_h_to_m(math.pi * 60, 60.0, 100.0, 100.0) == pytest.approx(1.0)

    def test_scales_with_rating(self):
        small = inertia_h_to_m(5.0, 60.0, 100.0, 100.0)
        large = inertia_h_to_m(5.0, 60.0, 250.0, 100.0)
        assert large == pytest.approx(2.5 * small)

    def test_unrated_unit_has_zero_inertia_constant(self):
        assert inertia_m_to_h(0.1, 60.0, 0.0, 100.0) == 0.0

    def test_damping_round_trip(self):
        D = damping_to_system(0.04, 250.0, 100.0)
        assert D == pytest.approx(0.1)
        assert damping_to_machine(D, 250.0, 100.0) == pytest.approx(0.04)
        assert damping_to_machine(0.1, 0.0, 100.0) == 0.0

    def test_json_reader_uses_machine_rating(self):
        case = make_case([_bus(1, 'slack', 1.0)], [], [
            {'id': 1, 'bus': 1, 'tech': 'SG', 'inertia_H': 4.0, 'damping_D': 0.02,
             'rating_S': 200.0, 'dispatch_P': 0.0},
        ])
        assert case.generator(1).inertia_M == pytest.approx(2 * 4.0 * 2.0 / (2 * math.pi * 60))


class TestValidation:
    def test_missing_slack(self):
        case = make_case([_bus(1, 'pv', 1.0), _bus(2)],
                         [{'from_bus': 1, 'to_bus': 2, 'r': 0, 'x': 0.1}], [_sg(1, 1)])
        report = validate_case(case)
        assert any('slack' in issue.message for issue in report.structural)

    def test_dangling_branch(self):
        case = make_case([_bus(1, 'slack', 1.0), _bus(2)],
                         [{'from_bus': 1, 'to_bus': 7, 'r': 0, 'x': 0.1}], [_sg(1, 1)])
        report = validate_case(case)
        assert any(issue.location.startswith('branch 0') for issue in report.structural)

    def test_zero_impedance(self):
        case = make_case([_bus(1, 'slack', 1.0), _bus(2)],
                         [{'from_bus': 1, 'to_bus': 2, 'r': 0, 'x': 0}], [_sg(1, 1)])
        assert validate_case(case).structural

    def test_sg_without_damping_is_dynamics_issue(self):
        gen = _sg(1, 1)
        gen['damping_D'] = 0.0
        case = make_case([_bus(1, 'slack', 1.0), _bus(2)],
                         [{'from_bus': 1, 'to_bus': 2, 'r': 0, 'x': 0.1}], [gen])
        kinds = {issue.kind for issue in validate_case(case).issues}
        assert kinds == {DYNAMICS}

    def test_all_gfl_flagged(self):
        gfl = {'id': 1, 'bus': 1, 'tech': 'GFL', 'rating_S': 100.0, 'dispatch_P': 0.5}
        case = make_case([_bus(1, 'slack', 1.0), _bus(2)],
                         [{'from_bus': 1, 'to_bus': 2, 'r': 0, 'x': 0.1}], [gfl])
        assert any('no dynamic' in issue.message for issue in validate_case(case).issues)

    def test_dispatch_above_rating(self):
        case = make_case([_bus(1, 'slack', 1.0), _bus(2)],
                         [{'from_bus': 1, 'to_bus': 2, 'r': 0, 'x': 0.1}],
                         [_sg(1, 1, dispatch=2.0, rating=100.0)])
        assert [issue.kind for issue in validate_case(case).issues] == [DISPATCH]

    def test_two_dynamic_generators_on_one_bus(self):
        case = make_case([_bus(1, 'slack', 1.0), _bus(2)],
                         [{'from_bus': 1, 'to_bus': 2, 'r': 0, 'x': 0.1}],
                         [_sg(1, 1), _sg(2, 1)])
        assert any(issue.kind == DYNAMICS and 'shares bus' in issue.message
                   for issue in validate_case(case).issues)

    def test_report_to_dict(self, case9):
        assert validate_case(case9).to_dict() == {'valid': True, 'issues': []}


class TestLoading:
    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{\n  "base_mva": 100,\n  "buses": [,\n}\n')
        with pytest.raises(CaseParseError) as exc:
            load_case(path)
        assert exc.value.line == 3

    def test_missing_field(self, tmp_path):
        path = tmp_path / 'missing.json'
        path.write_text('{"base_mva": 100, "buses": [], "branches": []}')
        with pytest.raises(CaseParseError, match='base_freq'):
            load_case(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CaseParseError):
            load_case(tmp_path / 'nope.json')

    def test_matpower_needs_sidecar(self):
        with pytest.raises(CaseParseError, match='sidecar'):
            load_case(STOCK_CASE_9BUS_M)

    def test_strict_rejects_structure(self, tmp_path, case9):
        path = tmp_path / 'noslack.json'
        text = STOCK_CASE_9BUS.read_text().replace('"kind": "slack"', '"kind": "pv"')
        path.write_text(text)
        with pytest.raises(CaseValidationError):
            load_case(path)
        assert load_case(path, strict=False).buses[0].kind == BusKind.PV

    def test_parse_matpower_tables(self):
        text = (
            "function mpc = tiny\n"
            "mpc.baseMVA = 100;\n"
            "mpc.bus = [\n"
            "  1 3 0 0 0 0 1 1 0 345 1 1.1 0.9; % slack\n"
            "  2 1 50 10 0 0 1 1 0 345 1 1.1 0.9;\n"
            "];\n"
            "mpc.gen = [\n"
            "  1 50 0 100 -100 1 100 1 100 0;\n"
            "];\n"
            "mpc.branch = [\n"
            "  1 2 0.01 0.1 0 250 250 250 0 0 1 -360 360;\n"
            "];\n"
        )
        tables = parse_matpower(text)
        assert tables['baseMVA'] == 100.0
        assert len(tables['bus']) == 2
        line, row = tables['bus'][1]
        assert line == 5
        assert row[2] == 50.0


class TestTransforms:
    def test_retype_to_gfl_zeroes_dynamics(self, case9):
        case = retype_generator(case9, 2, 'GFL')
        gen = case.generator(2)
        assert gen.tech == Tech.GFL
        assert gen.inertia_M == 0.0 and gen.damping_D == 0.0
        assert len(case.dynamic_generators) == 2

    def test_scale_dynamics(self, case9):
        case = scale_dynamics(case9, inertia_factor=2.0, damping_factor=0.5, gen_ids=[3])
        assert case.generator(3).inertia_M == pytest.approx(2 * case9.generator(3).inertia_M)
        assert case.generator(3).damping_D == pytest.approx(0.5 * case9.generator(3).damping_D)
        assert case.generator(1) == case9.generator(1)

    def test_droop_preset(self, case9):
        case = apply_tech_preset(case9, 'all_gfm_droop')
        for new, old in zip(case.generators, case9.generators):
            assert new.tech == Tech.GFM_DROOP
            assert new.inertia_M == pytest.approx(0.01 * old.inertia_M)
            assert new.damping_D == pytest.approx(2.0 * old.damping_D)

    def test_all_gfl_preset(self, case9):
        case = apply_tech_preset(case9, 'all_gfl')
        assert not case.dynamic_generators
        assert case.gfl_penetration() == pytest.approx(1.0)

    def test_unknown_preset(self, case9):
        with pytest.raises(ValueError):
            apply_tech_preset(case9, 'all_steam')

    def test_scale_loads_moves_non_slack_dispatch(self, case9):
        case = scale_loads(case9, 1.2)
        assert case.loads[0].P == pytest.approx(1.2 * case9.loads[0].P)
        assert case.generator(2).dispatch_P == pytest.approx(1.2 * case9.generator(2).dispatch_P)
        assert case.generator(1).dispatch_P == case9.generator(1).dispatch_P

    def test_scale_loads_wrong_count(self, case9):
        with pytest.raises(ValueError):
            scale_loads(case9, [1.0, 1.1])
