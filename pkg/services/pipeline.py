"""
Study pipeline service: power flow -> fold -> Kron reduction -> linearization
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from src.core.errors import GridSyncError, InfeasibleModelError, PowerFlowDivergedError
from src.core.linearize import Laplacian, StateSpaceModel, assemble_state_matrix, build_laplacian
from src.core.modal import ModalResult, eigen_analysis
from src.core.model import NetworkCase, apply_tech_preset
from src.core.powerflow import AdmittanceMatrix, PowerFlowSolution, build_admittance, solve_power_flow
from src.core.reduce import ReducedNetwork, boundary_buses, fold_constant_elements, kron_reduce
from src.core.simulate import (
    Perturbation,
    compute_metrics,
    default_perturbation,
    simulate_response,
    suggest_time_step,
)
from src.utils.config import DEFAULT_HORIZON, POWERFLOW_MAX_ITER, POWERFLOW_TOLERANCE

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StudyModel:
    """Every intermediate product of one case, kept for reporting and verification."""
    case: NetworkCase
    admittance: AdmittanceMatrix
    solution: PowerFlowSolution
    folded: AdmittanceMatrix
    reduced: ReducedNetwork
    laplacian: Laplacian
    model: StateSpaceModel


def default_reference(case: NetworkCase) -> int:
    """Dynamic generator at the slack bus, else the largest-rated dynamic generator."""
    dynamic = case.dynamic_generators
    if not dynamic:
        raise InfeasibleModelError("No dynamic (non-GFL) generator: the synchronous frequency is undefined")
    slack_id = case.slack_bus.id
    for gen in dynamic:
        if gen.bus == slack_id:
            return gen.id
    return max(dynamic, key=lambda gen: (gen.rating_S, -gen.id)).id


def build_study(case: NetworkCase, reference: Optional[int] = None,
                tol: float = POWERFLOW_TOLERANCE, max_iter: int = POWERFLOW_MAX_ITER) -> StudyModel:
    """
    Run the full chain up to the state matrix.

    Raises:
        InfeasibleModelError: no dynamic generator
        PowerFlowDivergedError: power flow did not converge
        (plus anything the individual stages raise)
    """
    if not case.dynamic_generators:
        raise InfeasibleModelError("No dynamic (non-GFL) generator: the synchronous frequency is undefined")
    if reference is None:
        reference = default_reference(case)

    admittance = build_admittance(case)
    solution = solve_power_flow(case, admittance, tol=tol, max_iter=max_iter)
    if not solution.converged:
        raise PowerFlowDivergedError(
            f"Power flow did not converge after {solution.iterations} iterations "
            f"(max mismatch {solution.max_mismatch:.3e} p.u.)"
        )

    folded = fold_constant_elements(case, admittance, solution)
    reduced = kron_reduce(folded, boundary_buses(case), equilibrium=solution)
    laplacian = build_laplacian(reduced)
    model = assemble_state_matrix(laplacian, case.dynamic_generators, reference=reference,
                                  base_freq=case.base_freq, base_mva=case.base_mva)
    return StudyModel(case=case, admittance=admittance, solution=solution, folded=folded,
                      reduced=reduced, laplacian=laplacian, model=model)


def analyze_case(case: NetworkCase, reference: Optional[int] = None) -> Tuple[StudyModel, ModalResult]:
    study = build_study(case, reference=reference)
    return study, eigen_analysis(study.model)


def compare_presets(case: NetworkCase, presets: Sequence[str],
                    perturbation: Optional[Perturbation] = None,
                    horizon: float = DEFAULT_HORIZON, dt: Optional[float] = None) -> List[Dict]:
    """
    Frequency-response metrics of the same event under each technology preset.

    The event defaults to the stock power step of the first feasible preset so
    every row sees the identical disturbance. Infeasible presets produce a row
    with the error message instead of metrics.
    """
    rows = []
    for preset in presets:
        row = {'preset': preset}
        try:
            study = build_study(apply_tech_preset(case, preset))
            modal = eigen_analysis(study.model)
            if perturbation is None:
                perturbation = default_perturbation(study.model)
            step = dt or suggest_time_step(study.model)
            trace = simulate_response(study.model, perturbation, horizon=horizon, dt=step)
            row.update(verdict=modal.verdict.value, max_re_lambda=modal.max_real, dt=step,
                       **compute_metrics(trace).to_dict())
        except GridSyncError as e:
            logger.warning(f"Preset {preset}: {e}")
            row['error'] = str(e)
        rows.append(row)
    return rows
