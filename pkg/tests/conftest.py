"""
Shared fixtures: the stock 9- and 39-bus cases and small networks built in code
"""

import pytest

from services.pipeline import build_study
from src.core.model import case_from_dict, load_case
from src.utils.config import STOCK_CASE_9BUS, STOCK_CASE_39BUS_DYN, STOCK_CASE_39BUS_M


def make_case(buses, branches, generators, loads=(), base_freq=60.0, name='test'):
    return case_from_dict({
        'name': name,
        'base_mva': 100.0,
        'base_freq': base_freq,
        'buses': list(buses),
        'branches': list(branches),
        'generators': list(generators),
        'loads': list(loads),
    })


@pytest.fixture(scope='session')
def case9():
    return load_case(STOCK_CASE_9BUS)


@pytest.fixture(scope='session')
def study9(case9):
    return build_study(case9)


@pytest.fixture(scope='session')
def case39():
    return load_case(STOCK_CASE_39BUS_M, dyn=STOCK_CASE_39BUS_DYN)


@pytest.fixture(scope='session')
def study39(case39):
    return build_study(case39)


@pytest.fixture
def single_machine_case():
    """One SG behind a line feeding one load: A = [-D/M]."""
    return make_case(
        buses=[{'id': 1, 'kind': 'slack', 'voltage_setpoint': 1.0},
               {'id': 2, 'kind': 'pq'}],
        branches=[{'from_bus': 1, 'to_bus': 2, 'r': 0.01, 'x': 0.1}],
        generators=[{'id': 1, 'bus': 1, 'tech': 'SG', 'inertia_M': 0.1, 'damping_D': 0.05,
                     'rating_S': 100.0, 'dispatch_P': 0.5}],
        loads=[{'bus': 2, 'P': 0.5, 'Q': 0.1}],
        name='single_machine',
    )


@pytest.fixture
def two_machine_case():
    """Two identical machines on a lossless line, no load."""
    return make_case(
        buses=[{'id': 1, 'kind': 'slack', 'voltage_setpoint': 1.0},
               {'id': 2, 'kind': 'pv', 'voltage_setpoint': 1.0}],
        branches=[{'from_bus': 1, 'to_bus': 2, 'r': 0.0, 'x': 0.2}],
        generators=[
            {'id': 1, 'bus': 1, 'tech': 'SG', 'inertia_M': 0.1, 'damping_D': 0.02,
             'rating_S': 100.0, 'dispatch_P': 0.0},
            {'id': 2, 'bus': 2, 'tech': 'SG', 'inertia_M': 0.1, 'damping_D': 0.02,
             'rating_S': 100.0, 'dispatch_P': 0.3},
        ],
        name='two_machine',
    )


@pytest.fixture
def chain_case():
    """Three-bus chain: SG - PQ load - SG, with a GFL unit on the middle bus."""
    return make_case(
        buses=[{'id': 1, 'kind': 'slack', 'voltage_setpoint': 1.02},
               {'id': 2, 'kind': 'pq'},
               {'id': 3, 'kind': 'pv', 'voltage_setpoint': 1.0}],
        branches=[{'from_bus': 1, 'to_bus': 2, 'r': 0.01, 'x': 0.1, 'b': 0.02},
                  {'from_bus': 2, 'to_bus': 3, 'r': 0.02, 'x': 0.15, 'b': 0.02}],
        generators=[
            {'id': 1, 'bus': 1, 'tech': 'SG', 'inertia_H': 5.0, 'damping_D': 0.03,
             'rating_S': 150.0, 'dispatch_P': 0.6},
            {'id': 2, 'bus': 2, 'tech': 'GFL', 'rating_S': 50.0, 'dispatch_P': 0.2},
            {'id': 3, 'bus': 3, 'tech': 'GFM_VSM', 'inertia_H': 3.0, 'damping_D': 0.02,
             'rating_S': 100.0, 'dispatch_P': 0.4},
        ],
        loads=[{'bus': 2, 'P': 1.1, 'Q': 0.3}],
        name='chain',
    )
