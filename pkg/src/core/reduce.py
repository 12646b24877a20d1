#!/usr/bin/env python3
"""
Network reduction for GridSync Screener

Loads and grid-following (GFL) generators are frozen at their equilibrium
injections and turned into constant shunt admittances; every bus that does not
host a dynamic generator is then eliminated by Kron reduction, one node at a
time in ascending bus id:

    Y_ik <- Y_ik - Y_ip * Y_pk / Y_pp

Usage:
    folded = fold_constant_elements(case, Y, sol)
    red = kron_reduce(folded, boundary_buses(case), equilibrium=sol)
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DimensionError, PowerFlowDivergedError, ZeroPivotError, ZeroVoltageError
from src.core.model import NetworkCase
from src.core.powerflow import AdmittanceMatrix, PowerFlowSolution
from src.utils.config import ZERO_PIVOT_TOL, ZERO_VOLTAGE_TOL

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EliminationStep:
    """Everything needed to undo one Kron step."""
    bus: int
    position: int
    pivot: complex
    row: np.ndarray
    col: np.ndarray
    bus_ids_before: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ReducedNetwork:
    boundary_buses: Tuple[int, ...]
    Y_red: np.ndarray
    steps: Tuple[EliminationStep, ...] = ()
    equilibrium: Optional[PowerFlowSolution] = None

    @property
    def elimination_log(self) -> List[int]:
        return [step.bus for step in self.steps]

    @property
    def order(self) -> int:
        return len(self.boundary_buses)

    def boundary_voltages(self) -> Tuple[np.ndarray, np.ndarray]:
        """(|V|, angle) at the boundary buses from the equilibrium."""
        if self.equilibrium is None:
            raise ValueError("Reduced network carries no equilibrium")
        idx = [self.equilibrium.index(bus_id) for bus_id in self.boundary_buses]
        return self.equilibrium.vm[idx], self.equilibrium.va[idx]

    def to_dict(self) -> Dict:
        return {
            'boundary_buses': list(self.boundary_buses),
            'elimination_log': self.elimination_log,
            'Y_red': [[[z.real, z.imag] for z in row] for row in self.Y_red],
        }


def boundary_buses(case: NetworkCase) -> List[int]:
    """Buses hosting a dynamic (non-GFL) generator, in case bus order."""
    hosts = {gen.bus for gen in case.dynamic_generators}
    return [bus_id for bus_id in case.bus_ids if bus_id in hosts]


def generator_injections(case: NetworkCase, sol: PowerFlowSolution) -> Dict[int, complex]:
    """
    Complex power of every generator at the equilibrium.

    The bus generation (net injection plus local load) is split between the
    generators on the bus in proportion to their dispatch. A GFL generator keeps
    its reactive setpoint (zero when unspecified).
    """
    load_at = {}
    for load in case.loads:
        load_at[load.bus] = load_at.get(load.bus, 0j) + complex(load.P, load.Q)

    by_bus: Dict[int, list] = {}
    for gen in case.generators:
        by_bus.setdefault(gen.bus, []).append(gen)

    result = {}
    for bus_id, gens in by_bus.items():
        total = sol.injections[sol.index(bus_id)] + load_at.get(bus_id, 0j)
        dispatch = np.array([max(gen.dispatch_P, 0.0) for gen in gens])
        shares = dispatch / dispatch.sum() if dispatch.sum() > 0 else np.full(len(gens), 1.0 / len(gens))
        for gen, share in zip(gens, shares):
            if gen.is_dynamic:
                result[gen.id] = complex(total.real * share, total.imag * share)
            else:
                result[gen.id] = complex(total.real * share, gen.dispatch_Q or 0.0)
    return result


def fold_constant_elements(case: NetworkCase, Y: AdmittanceMatrix,
                           sol: PowerFlowSolution) -> AdmittanceMatrix:
    """
    Replace loads and GFL generators with constant admittances at the equilibrium.

    A load S becomes y = conj(S) / |V|^2 on the diagonal; a GFL injection enters
    with the opposite sign.

    Raises:
        PowerFlowDivergedError: sol did not converge
        ZeroVoltageError: element on a bus with |V| = 0
    """
    if not sol.converged:
        raise PowerFlowDivergedError("Cannot fold loads around a non-converged power flow")
    if sol.bus_ids != Y.bus_ids:
        raise DimensionError("Power-flow solution and admittance matrix disagree on bus ordering")

    folded = Y.Y.copy()
    gfl_injections = generator_injections(case, sol)

    def add_constant_power(bus_id, S_load):
        k = Y.index(bus_id)
        v2 = sol.vm[k] ** 2
        if v2 < ZERO_VOLTAGE_TOL:
            raise ZeroVoltageError(f"Bus {bus_id} has zero voltage; cannot fold its load/GFL injection")
        folded[k, k] += np.conj(S_load) / v2

    for load in case.loads:
        add_constant_power(load.bus, complex(load.P, load.Q))
    for gen in case.generators:
        if not gen.is_dynamic:
            add_constant_power(gen.bus, -gfl_injections[gen.id])

    return AdmittanceMatrix(bus_ids=Y.bus_ids, Y=folded)


def kron_reduce(Y_folded: AdmittanceMatrix, boundary: Sequence[int],
                equilibrium: Optional[PowerFlowSolution] = None,
                order: Optional[Sequence[int]] = None) -> ReducedNetwork:
    """
    Eliminate every non-boundary bus, ascending by id unless order lists them.

    Raises:
        KeyError: a boundary bus is not in the network
        ValueError: order is not a permutation of the non-boundary buses
        ZeroPivotError: |Y_pp| below the pivot tolerance at some step
    """
    for bus_id in boundary:
        if bus_id not in Y_folded.bus_ids:
            raise KeyError(f"Boundary bus {bus_id} not in network")

    keep = set(boundary)
    Y = Y_folded.Y.copy()
    bus_ids = list(Y_folded.bus_ids)
    steps = []

    interior = sorted(b for b in Y_folded.bus_ids if b not in keep)
    if order is not None:
        if sorted(order) != interior:
            raise ValueError(f"Elimination order {list(order)} does not cover the interior buses {interior}")
        interior = list(order)

    for bus_id in interior:
        p = bus_ids.index(bus_id)
        pivot = Y[p, p]
        if abs(pivot) < ZERO_PIVOT_TOL:
            logger.error(f"Zero pivot eliminating bus {bus_id}")
            raise ZeroPivotError(bus_id, pivot)

        others = [k for k in range(len(bus_ids)) if k != p]
        row = Y[p, others].copy()
        col = Y[others, p].copy()
        steps.append(EliminationStep(bus=bus_id, position=p, pivot=pivot, row=row, col=col,
                                     bus_ids_before=tuple(bus_ids)))

        Y = Y[np.ix_(others, others)] - np.outer(col, row) / pivot
        del bus_ids[p]

    # restore the requested boundary ordering
    order = [bus_ids.index(bus_id) for bus_id in boundary]
    Y_red = Y[np.ix_(order, order)]

    if steps:
        logger.debug(f"Kron reduction eliminated {len(steps)} buses, kept {len(boundary)}")
    return ReducedNetwork(boundary_buses=tuple(boundary), Y_red=Y_red, steps=tuple(steps),
                          equilibrium=equilibrium)


def expand_step(Y_after: np.ndarray, step: EliminationStep) -> np.ndarray:
    """
    Undo one elimination step: rebuild the matrix that existed before bus
    step.bus was eliminated, in the ordering step.bus_ids_before.
    """
    n = len(step.bus_ids_before)
    if Y_after.shape != (n - 1, n - 1):
        raise DimensionError(f"Expected a {n - 1}x{n - 1} matrix, got {Y_after.shape}")

    others = [k for k in range(n) if k != step.position]
    Y_before = np.zeros((n, n), dtype=complex)
    Y_before[np.ix_(others, others)] = Y_after + np.outer(step.col, step.row) / step.pivot
    Y_before[step.position, others] = step.row
    Y_before[others, step.position] = step.col
    Y_before[step.position, step.position] = step.pivot
    return Y_before
