#!/usr/bin/env python3
"""
AC power flow for GridSync Screener

Builds the bus admittance matrix of a NetworkCase and solves the power-flow
equations with a polar Newton-Raphson iteration from a flat start. The converged
solution is the equilibrium every later stage linearizes around.

Usage:
    Y = build_admittance(case)
    sol = solve_power_flow(case, Y)
    if sol.converged:
        P = compute_injections(sol, Y)
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from src.core.errors import DimensionError, SingularJacobianError
from src.core.model import BusKind, NetworkCase
from src.utils.config import JACOBIAN_RCOND_MIN, POWERFLOW_MAX_ITER, POWERFLOW_TOLERANCE

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdmittanceMatrix:
    """Dense complex Y = G + jB, rows/columns ordered as bus_ids."""
    bus_ids: Tuple[int, ...]
    Y: np.ndarray

    @property
    def order(self) -> int:
        return len(self.bus_ids)

    @property
    def G(self) -> np.ndarray:
        return self.Y.real

    @property
    def B(self) -> np.ndarray:
        return self.Y.imag

    def index(self, bus_id: int) -> int:
        return self.bus_ids.index(bus_id)


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    bus_ids: Tuple[int, ...]
    vm: np.ndarray
    va: np.ndarray
    injections: np.ndarray
    converged: bool
    iterations: int
    max_mismatch: float

    @property
    def voltages(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)

    def index(self, bus_id: int) -> int:
        return self.bus_ids.index(bus_id)

    def rows(self) -> List[Dict]:
        """One row per bus: bus, vm, va, P, Q."""
        return [
            {
                'bus': bus_id,
                'vm': float(self.vm[k]),
                'va': float(self.va[k]),
                'P': float(self.injections[k].real),
                'Q': float(self.injections[k].imag),
            }
            for k, bus_id in enumerate(self.bus_ids)
        ]


def build_admittance(case: NetworkCase) -> AdmittanceMatrix:
    """
    Assemble the bus admittance matrix with the pi branch model.

    Y_ij = -y_ij for every branch i-j, Y_ii = sum of incident series admittances
    plus half the line charging of each incident branch plus the bus shunt.
    """
    bus_ids = tuple(case.bus_ids)
    index = {bus_id: k for k, bus_id in enumerate(bus_ids)}
    Y = np.zeros((len(bus_ids), len(bus_ids)), dtype=complex)

    for branch in case.branches:
        f, t = index[branch.from_bus], index[branch.to_bus]
        y = 1.0 / branch.series_impedance
        charging = 0.5j * branch.shunt_susceptance
        Y[f, f] += y + charging
        Y[t, t] += y + charging
        Y[f, t] -= y
        Y[t, f] -= y

    for bus in case.buses:
        Y[index[bus.id], index[bus.id]] += complex(bus.shunt_g, bus.shunt_b)

    return AdmittanceMatrix(bus_ids=bus_ids, Y=Y)


def scheduled_injections(case: NetworkCase) -> np.ndarray:
    """Net scheduled complex injection per bus: generation minus load (p.u.)."""
    index = {bus_id: k for k, bus_id in enumerate(case.bus_ids)}
    S = np.zeros(len(index), dtype=complex)
    for gen in case.generators:
        S[index[gen.bus]] += complex(gen.dispatch_P, gen.dispatch_Q or 0.0)
    for load in case.loads:
        S[index[load.bus]] -= complex(load.P, load.Q)
    return S


def power_flow_jacobian(Y: np.ndarray, V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Partial derivatives dS/dVa and dS/dVm of S = V * conj(Y V) (polar form)."""
    Ibus = Y @ V
    diagV = np.diag(V)
    diagIbus = np.diag(Ibus)
    diagVnorm = np.diag(V / np.abs(V))
    dS_dVm = diagV @ np.conj(Y @ diagVnorm) + np.conj(diagIbus) @ diagVnorm
    dS_dVa = 1j * diagV @ np.conj(diagIbus - Y @ diagV)
    return dS_dVa, dS_dVm


def solve_power_flow(case: NetworkCase, Y: AdmittanceMatrix,
                     tol: float = POWERFLOW_TOLERANCE,
                     max_iter: int = POWERFLOW_MAX_ITER) -> PowerFlowSolution:
    """
    Newton-Raphson power flow.

    Unknowns are the angles of PV and PQ buses and the magnitudes of PQ buses;
    the slack bus holds its voltage and angle setpoint, PV buses their
    magnitude setpoint. Non-convergence is returned in the solution, not raised.

    Raises:
        SingularJacobianError: Jacobian singular during the iteration
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if tuple(case.bus_ids) != Y.bus_ids:
        raise DimensionError("Admittance matrix does not match the case bus ordering")

    kinds = [bus.kind for bus in case.buses]
    pv = [k for k, kind in enumerate(kinds) if kind == BusKind.PV]
    pq = [k for k, kind in enumerate(kinds) if kind == BusKind.PQ]
    pvpq = pv + pq
    slack = case.slack_bus

    vm = np.array([bus.voltage_setpoint if bus.kind != BusKind.PQ else 1.0 for bus in case.buses], dtype=float)
    va = np.full(len(kinds), slack.angle_setpoint, dtype=float)
    Sbus = scheduled_injections(case)
    Ymat = Y.Y
    n_pvpq = len(pvpq)

    def mismatch(V):
        dS = V * np.conj(Ymat @ V) - Sbus
        return np.concatenate([dS[pvpq].real, dS[pq].imag])

    V = vm * np.exp(1j * va)
    F = mismatch(V)
    max_mismatch = float(np.max(np.abs(F))) if F.size else 0.0
    iterations = 0
    converged = max_mismatch <= tol

    while not converged and iterations < max_iter:
        if not np.isfinite(max_mismatch):
            break
        iterations += 1

        dS_dVa, dS_dVm = power_flow_jacobian(Ymat, V)
        J = np.block([
            [dS_dVa[np.ix_(pvpq, pvpq)].real, dS_dVm[np.ix_(pvpq, pq)].real],
            [dS_dVa[np.ix_(pq, pvpq)].imag, dS_dVm[np.ix_(pq, pq)].imag],
        ])
        try:
            rcond = 1.0 / np.linalg.cond(J)
            if not rcond >= JACOBIAN_RCOND_MIN:
                raise np.linalg.LinAlgError(f"rcond {rcond:.3e}")
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as e:
            logger.error(f"Singular power-flow Jacobian at iteration {iterations}: {e}")
            raise SingularJacobianError(
                f"Power-flow Jacobian is singular at iteration {iterations} "
                f"(voltage collapse or infeasible dispatch)"
            )

        va[pvpq] += dx[:n_pvpq]
        vm[pq] += dx[n_pvpq:]
        V = vm * np.exp(1j * va)

        F = mismatch(V)
        max_mismatch = float(np.max(np.abs(F)))
        logger.debug(f"NR iteration {iterations}: max mismatch {max_mismatch:.3e}")
        converged = max_mismatch <= tol

    if converged:
        logger.info(f"Power flow converged in {iterations} iterations (mismatch {max_mismatch:.2e})")
    else:
        logger.warning(f"Power flow did not converge after {iterations} iterations "
                       f"(mismatch {max_mismatch:.2e})")

    return PowerFlowSolution(
        bus_ids=Y.bus_ids,
        vm=vm.copy(),
        va=va.copy(),
        injections=V * np.conj(Ymat @ V),
        converged=bool(converged),
        iterations=iterations,
        max_mismatch=max_mismatch,
    )


def compute_injections(solution: PowerFlowSolution, Y: AdmittanceMatrix) -> np.ndarray:
    """
    Active power injection at every bus from the network equations:

        P_i = V_i^2 G_ii + sum_{j != i} V_i V_j [B_ij sin(d_i - d_j) + G_ij cos(d_i - d_j)]
    """
    n = len(solution.vm)
    if Y.Y.shape != (n, n) or len(solution.va) != n:
        raise DimensionError(f"Solution has {n} buses but Y is {Y.Y.shape[0]}x{Y.Y.shape[1]}")

    vm, va = solution.vm, solution.va
    G, B = Y.G, Y.B
    theta = va[:, None] - va[None, :]
    coupling = np.outer(vm, vm) * (B * np.sin(theta) + G * np.cos(theta))
    np.fill_diagonal(coupling, 0.0)
    return vm ** 2 * np.diag(G) + coupling.sum(axis=1)
