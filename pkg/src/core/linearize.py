#!/usr/bin/env python3
"""
Small-signal linearization for GridSync Screener

Builds the synchronizing-power Laplacian H = dP/d(delta) of the reduced network
at the equilibrium and assembles the (2n-1)-state swing model with the reference
generator placed last:

    d/dt delta_{i,n} = w_i - w_n                          (i < n)
    d/dt w_i         = -sum_{j<n} H_ij / M_i * delta_{j,n} - d_i * w_i

with d_i = D_i / M_i. Every row of H sums to zero, so the absolute angles
enter only through their differences to the reference angle and the columns
H_{.,j}, j < n, act on the relative angles directly.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DimensionError, InfeasibleModelError, ZeroInertiaError
from src.core.model import GeneratorSpec
from src.core.reduce import ReducedNetwork

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Laplacian:
    bus_ids: Tuple[int, ...]
    H: np.ndarray


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    A: np.ndarray
    state_labels: Tuple[str, ...]
    generator_ids: Tuple[int, ...]
    reference_gen: int
    inertia: np.ndarray
    damping: np.ndarray
    H: np.ndarray
    ratings: Optional[np.ndarray] = None
    base_freq: float = 60.0
    base_mva: float = 100.0

    @property
    def n(self) -> int:
        return len(self.generator_ids)

    @property
    def damping_factors(self) -> np.ndarray:
        return self.damping / self.inertia

    @property
    def per_gen(self) -> List[Tuple[float, float, float]]:
        return [(float(M), float(D), float(D / M)) for M, D in zip(self.inertia, self.damping)]

    @property
    def speed_slice(self) -> slice:
        return slice(self.n - 1, 2 * self.n - 1)

    @property
    def h_blocks(self) -> Tuple[np.ndarray, np.ndarray]:
        """(h_i, h_n): angle columns of the non-reference and reference speed rows."""
        n = self.n
        return self.A[n - 1:2 * n - 2, :n - 1], self.A[2 * n - 2, :n - 1]

    def speed_index(self, gen_id: int) -> int:
        return self.n - 1 + self.generator_ids.index(gen_id)

    def to_dict(self) -> Dict:
        return {
            'state_labels': list(self.state_labels),
            'generator_ids': list(self.generator_ids),
            'reference_gen': self.reference_gen,
            'inertia_M': self.inertia.tolist(),
            'damping_D': self.damping.tolist(),
            'A': self.A.tolist(),
        }


def build_laplacian(red: ReducedNetwork) -> Laplacian:
    """
    H_ij = -V_i V_j [B_ij cos(d_i - d_j) - G_ij sin(d_i - d_j)]   (i != j)
    H_ii = -sum_{j != i} H_ij
    on the reduced network at the equilibrium voltages.
    """
    vm, va = red.boundary_voltages()
    G, B = red.Y_red.real, red.Y_red.imag
    theta = va[:, None] - va[None, :]
    H = -np.outer(vm, vm) * (B * np.cos(theta) - G * np.sin(theta))
    np.fill_diagonal(H, 0.0)
    np.fill_diagonal(H, -H.sum(axis=1))
    return Laplacian(bus_ids=red.boundary_buses, H=H)


def assemble_state_matrix(H: Laplacian, gens: Sequence[GeneratorSpec],
                          reference: Optional[int] = None,
                          base_freq: float = 60.0, base_mva: float = 100.0) -> StateSpaceModel:
    """
    Assemble A for the dynamic generators, reference generator last.

    Args:
        H: Laplacian over the boundary buses
        gens: dynamic generators, one per boundary bus
        reference: reference generator id (default: the last in gens)

    Raises:
        InfeasibleModelError: no dynamic generator
        ZeroInertiaError: a generator has M = 0
        DimensionError: generators do not match the Laplacian buses
    """
    gens = list(gens)
    if not gens:
        raise InfeasibleModelError("No dynamic (non-GFL) generator: the synchronous frequency is undefined")
    for gen in gens:
        if not gen.is_dynamic:
            raise DimensionError(f"Generator {gen.id} is GFL and must be folded before linearization")
        if not gen.inertia_M > 0:
            raise ZeroInertiaError(f"Generator {gen.id} has zero inertia; the swing equation is singular")
    if len(gens) != len(H.bus_ids) or {gen.bus for gen in gens} != set(H.bus_ids):
        raise DimensionError(
            f"{len(gens)} generators on buses {sorted(gen.bus for gen in gens)} "
            f"do not match Laplacian buses {list(H.bus_ids)}"
        )

    if reference is None:
        reference = gens[-1].id
    ordered = [gen for gen in gens if gen.id != reference] + [gen for gen in gens if gen.id == reference]
    if ordered[-1].id != reference:
        raise KeyError(f"Reference generator {reference} is not a dynamic generator")

    perm = [H.bus_ids.index(gen.bus) for gen in ordered]
    Hp = H.H[np.ix_(perm, perm)]
    M = np.array([gen.inertia_M for gen in ordered])
    D = np.array([gen.damping_D for gen in ordered])

    n = len(ordered)
    A = np.zeros((2 * n - 1, 2 * n - 1))
    for k in range(n - 1):
        A[k, n - 1 + k] = 1.0
        A[k, 2 * n - 2] = -1.0
    A[n - 1:, :n - 1] = -Hp[:, :n - 1] / M[:, None]
    A[n - 1:, n - 1:] = np.diag(-D / M)

    ref_id = ordered[-1].id
    labels = tuple(
        [f"ddelta_{gen.id},{ref_id}" for gen in ordered[:-1]] + [f"dw_{gen.id}" for gen in ordered]
    )
    logger.debug(f"Assembled {2 * n - 1}-state model, reference generator {ref_id}")
    return StateSpaceModel(
        A=A,
        state_labels=labels,
        generator_ids=tuple(gen.id for gen in ordered),
        reference_gen=ref_id,
        inertia=M,
        damping=D,
        H=Hp,
        ratings=np.array([gen.rating_S for gen in ordered]),
        base_freq=base_freq,
        base_mva=base_mva,
    )


def rescale_model(model: StateSpaceModel, inertia_factor: float = 1.0, damping_factor: float = 1.0,
                  gen_ids: Optional[Sequence[int]] = None) -> StateSpaceModel:
    """Re-assemble A with scaled M and D; the equilibrium (and H) is unchanged."""
    selected = np.array([gen_ids is None or gid in gen_ids for gid in model.generator_ids])
    M = np.where(selected, model.inertia * inertia_factor, model.inertia)
    D = np.where(selected, model.damping * damping_factor, model.damping)
    if np.any(M <= 0):
        raise ZeroInertiaError("Scaled inertia must stay positive")

    n = model.n
    A = model.A.copy()
    A[n - 1:, :n - 1] = -model.H[:, :n - 1] / M[:, None]
    A[n - 1:, n - 1:] = np.diag(-D / M)
    return StateSpaceModel(
        A=A,
        state_labels=model.state_labels,
        generator_ids=model.generator_ids,
        reference_gen=model.reference_gen,
        inertia=M,
        damping=D,
        H=model.H,
        ratings=model.ratings,
        base_freq=model.base_freq,
        base_mva=model.base_mva,
    )


def relative_laplacian(model: StateSpaceModel) -> np.ndarray:
    """h = h_i - 1 (x) h_n: the (n-1)x(n-1) block driving the relative speeds."""
    h_i, h_n = model.h_blocks
    return h_i - h_n[None, :]
