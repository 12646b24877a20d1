import math

from src.utils import config


def test_defaults_are_consistent():
    assert config.validate_config() == []


def test_omega_base():
    assert config.omega_base(50.0) == 100 * math.pi


def test_stock_cases_ship_with_the_repo():
    for path in (config.STOCK_CASE_9BUS, config.STOCK_CASE_9BUS_M, config.STOCK_CASE_9BUS_DYN,
                 config.STOCK_CASE_39BUS_M, config.STOCK_CASE_39BUS_DYN):
        assert path.exists()


def test_sweep_event_stays_small_signal():
    # stiffest machine allowed by the sweep, on its own rating, at 50 Hz
    worst = abs(config.SWEEP_PERTURBATION_MAGNITUDE) * 2.0 * config.INERTIA_HI / config.omega_base(50.0)
    assert worst <= config.SMALL_SIGNAL_BOUND


def test_sensitivity_scenarios():
    ids = [row[0] for row in config.SENSITIVITY_SCENARIOS]
    assert ids == list(range(len(ids)))
    assert config.SENSITIVITY_SCENARIOS[0][2:4] == (1.0, 1.0)
