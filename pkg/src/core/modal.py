#!/usr/bin/env python3
"""
Modal analysis for GridSync Screener

Eigen-decomposition of the swing model, mode classification (oscillatory
internal modes vs. real coupling modes), the stability verdict, the cubic
characteristic matrix polynomial, the homogeneous-damping shortcut, and the
inertia/damping sensitivity sweep that produces eigenvalue loci.

Usage:
    result = eigen_analysis(model)
    print(result.verdict, result.eigenvalues)

    runs = sensitivity_sweep(model, stock_scenarios())
    rows = loci_rows(runs)
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from tqdm import tqdm

from src.core.errors import EigenSolverError, GridSyncError, HeterogeneityError
from src.core.linearize import StateSpaceModel, relative_laplacian, rescale_model
from src.utils.config import (
    HETEROGENEITY_TOL,
    MARGINAL_TOL_FACTOR,
    MAX_WORKERS,
    REAL_MODE_TOL,
    SENSITIVITY_SCENARIOS,
)

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    STABLE = 'stable'
    MARGINAL = 'marginal'
    UNSTABLE = 'unstable'


INTERNAL = 'internal'
COUPLING = 'coupling'


@dataclass(frozen=True)
class InternalMode:
    """Oscillatory pair lambda = -zeta*wn +/- j*wn*sqrt(1 - zeta^2)."""
    indices: Tuple[int, int]
    eigenvalue: complex
    zeta: float
    omega_n: float


@dataclass(frozen=True)
class CouplingMode:
    """Real mode, factor (lambda + k_d)."""
    index: int
    k_d: float


@dataclass(frozen=True, eq=False)
class ModalResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    verdict: Verdict
    dominant_mode: int
    tol_marginal: float
    classes: Tuple[str, ...] = ()
    internal_modes: Tuple[InternalMode, ...] = ()
    coupling_modes: Tuple[CouplingMode, ...] = ()

    @property
    def max_real(self) -> float:
        return float(self.eigenvalues.real.max())

    def eigenvector_partitions(self, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(w', w'', w''') = relative-angle rows, non-reference speed rows, reference speed row."""
        w = self.eigenvectors
        return w[:n - 1], w[n - 1:2 * n - 2], w[2 * n - 2:]

    def mode_table(self) -> List[Dict]:
        zeta_of, omega_of = {}, {}
        for mode in self.internal_modes:
            for idx in mode.indices:
                zeta_of[idx] = mode.zeta
                omega_of[idx] = mode.omega_n
        return [
            {
                'eig_index': k,
                'real': float(lam.real),
                'imag': float(lam.imag),
                'class': self.classes[k] if self.classes else '',
                'zeta': zeta_of.get(k),
                'omega_n': omega_of.get(k),
            }
            for k, lam in enumerate(self.eigenvalues)
        ]

    def to_dict(self) -> Dict:
        return {
            'verdict': self.verdict.value,
            'max_real': self.max_real,
            'dominant_mode': self.dominant_mode,
            'tol_marginal': self.tol_marginal,
            'eigenvalues': self.mode_table(),
            'internal_modes': [
                {'indices': list(m.indices), 'zeta': m.zeta, 'omega_n': m.omega_n}
                for m in self.internal_modes
            ],
            'coupling_modes': [{'index': m.index, 'k_d': m.k_d} for m in self.coupling_modes],
        }


def _verdict(eigenvalues: np.ndarray, tol: float) -> Verdict:
    max_real = eigenvalues.real.max()
    if max_real < -tol:
        return Verdict.STABLE
    if abs(max_real) <= tol:
        return Verdict.MARGINAL
    return Verdict.UNSTABLE


def eigen_analysis(model: StateSpaceModel) -> ModalResult:
    """
    Spectrum of A, classified, with the stability verdict.

    Eigenvalues are ordered by decreasing real part, then decreasing imaginary
    part, so the dominant mode comes first.

    Raises:
        EigenSolverError: the eigensolver fails or returns non-finite values
    """
    A = model.A
    if not np.all(np.isfinite(A)):
        raise EigenSolverError("State matrix contains non-finite entries")
    try:
        eigenvalues, eigenvectors = scipy.linalg.eig(A)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"Eigen-decomposition failed: {e}")
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenSolverError("Eigensolver returned non-finite eigenvalues")

    order = np.lexsort((-eigenvalues.imag, -eigenvalues.real))
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    tol = MARGINAL_TOL_FACTOR * float(np.linalg.norm(A, 2))
    result = ModalResult(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        verdict=_verdict(eigenvalues, tol),
        dominant_mode=int(np.argmax(eigenvalues.real)),
        tol_marginal=tol,
    )
    return classify_modes(result, model)


def classify_modes(result: ModalResult, model: StateSpaceModel) -> ModalResult:
    """
    Assign every eigenvalue to exactly one class: members of a conjugate pair are
    internal modes (zeta = -Re/|lambda|, wn = |lambda|), real eigenvalues are
    coupling modes with k_d = -Re.
    """
    lam = result.eigenvalues
    if len(lam) != 2 * model.n - 1:
        raise EigenSolverError(f"Expected {2 * model.n - 1} eigenvalues, got {len(lam)}")

    classes = [None] * len(lam)
    internal, coupling = [], []
    for k, value in enumerate(lam):
        if abs(value.imag) <= REAL_MODE_TOL * max(1.0, abs(value)):
            classes[k] = COUPLING
            coupling.append(CouplingMode(index=k, k_d=float(-value.real)))

    for k, value in enumerate(lam):
        if classes[k] is not None or value.imag < 0:
            continue
        candidates = [j for j in range(len(lam)) if classes[j] is None and j != k and lam[j].imag < 0]
        partner = min(candidates, key=lambda j: abs(lam[j] - np.conj(value)))
        classes[k] = classes[partner] = INTERNAL
        omega_n = float(abs(value))
        internal.append(InternalMode(indices=(k, partner), eigenvalue=complex(value),
                                     zeta=float(-value.real / omega_n), omega_n=omega_n))

    return replace(result, classes=tuple(classes), internal_modes=tuple(internal),
                   coupling_modes=tuple(coupling))


# ============================================================================
# CHARACTERISTIC MATRIX POLYNOMIAL
# ============================================================================

@dataclass(frozen=True, eq=False)
class CharacteristicCoefficients:
    """p(lambda) = alpha lambda^3 + beta lambda^2 + gamma lambda + xi."""
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray
    reference_damping: float

    def scale(self) -> float:
        return max(float(np.abs(c).max()) if c.size else 0.0 for c in (self.alpha, self.beta, self.gamma, self.xi))


def characteristic_coefficients(model: StateSpaceModel) -> CharacteristicCoefficients:
    """
    Coefficients of the (n-1)x(n-1) cubic matrix polynomial whose determinant
    vanishes on the spectrum of A. Uses the signed entries of A: a_i, a_n are
    the speed diagonal (-D/M), h_i, h_n the angle columns of the speed rows.
    """
    n = model.n
    h_i, h_n = model.h_blocks
    diag = np.diag(model.A)[n - 1:]
    a_i = np.diag(diag[:-1])
    a_n = float(diag[-1])
    eye = np.eye(n - 1)
    ones_h_n = np.ones((n - 1, 1)) @ h_n[None, :]

    return CharacteristicCoefficients(
        alpha=eye,
        beta=-a_i - a_n * eye,
        gamma=a_i * a_n - h_i + ones_h_n,
        xi=h_i * a_n - a_i @ ones_h_n,
        reference_damping=a_n,
    )


def det_characteristic(coeffs: CharacteristicCoefficients, lam: complex) -> complex:
    """det(alpha lambda^3 + beta lambda^2 + gamma lambda + xi)."""
    P = coeffs.alpha * lam ** 3 + coeffs.beta * lam ** 2 + coeffs.gamma * lam + coeffs.xi
    return complex(np.linalg.det(P))


# ============================================================================
# HOMOGENEOUS DAMPING
# ============================================================================

def check_homogeneous(damping_factors: Sequence[float], tol: float = HETEROGENEITY_TOL) -> float:
    """Common damping factor d, or HeterogeneityError if the d_i differ."""
    d = np.asarray(damping_factors, dtype=float)
    spread = float(d.max() - d.min())
    if spread > tol * max(float(np.abs(d).max()), np.finfo(float).tiny):
        raise HeterogeneityError(
            f"Damping factors D/M differ (spread {spread:.3e}); the homogeneous shortcut does not apply"
        )
    return float(d.mean())


def homogeneous_eigen(h: np.ndarray, d_s: float,
                      damping_factors: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    lambda = 0.5 d_s +/- 0.5 sqrt(d_s^2 + 4 lambda_h) for every eigenvalue
    lambda_h of the relative block h. d_s is the signed damping factor (-D/M).
    """
    if damping_factors is not None:
        check_homogeneous(damping_factors)
    lam_h = np.linalg.eigvals(h) if h.size else np.array([], dtype=complex)
    root = np.sqrt(d_s ** 2 + 4.0 * lam_h.astype(complex))
    return np.concatenate([0.5 * d_s + 0.5 * root, 0.5 * d_s - 0.5 * root])


def homogeneous_spectrum(model: StateSpaceModel) -> np.ndarray:
    """Shortcut eigenvalues plus the uniform-speed mode d_s: the full spectrum of A."""
    d = check_homogeneous(model.damping_factors)
    shortcut = homogeneous_eigen(relative_laplacian(model), -d)
    return np.concatenate([shortcut, [complex(-d)]])


# ============================================================================
# SENSITIVITY SWEEP
# ============================================================================

@dataclass(frozen=True)
class SensitivityScenario:
    id: int
    name: str
    inertia_factor: float = 1.0
    damping_factor: float = 1.0
    gen_ids: Optional[Tuple[int, ...]] = None


@dataclass(frozen=True, eq=False)
class SensitivityRun:
    scenario: SensitivityScenario
    result: Optional[ModalResult] = None
    error: Optional[str] = None


def stock_scenarios() -> List[SensitivityScenario]:
    return [SensitivityScenario(*row) for row in SENSITIVITY_SCENARIOS]


def _run_scenario(base: StateSpaceModel, scenario: SensitivityScenario) -> SensitivityRun:
    model = rescale_model(base, scenario.inertia_factor, scenario.damping_factor, scenario.gen_ids)
    return SensitivityRun(scenario=scenario, result=eigen_analysis(model))


def sensitivity_sweep(base: StateSpaceModel, scenarios: Sequence[SensitivityScenario],
                      max_workers: int = MAX_WORKERS, progress: bool = False) -> List[SensitivityRun]:
    """
    Eigen-analysis of the base model under every M/D scaling scenario.

    The equilibrium does not depend on M or D, so each scenario only rescales
    the speed rows of A. Failures are recorded per scenario. Runs come back
    ordered by scenario id.
    """
    runs = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(_run_scenario, base, sc): sc for sc in scenarios}
        with tqdm(total=len(futures), desc="Sensitivity scenarios", unit="scenario",
                  disable=not progress) as pbar:
            for future in as_completed(futures):
                scenario = futures[future]
                try:
                    runs.append(future.result())
                except GridSyncError as e:
                    logger.warning(f"Scenario {scenario.id} ({scenario.name}) failed: {e}")
                    runs.append(SensitivityRun(scenario=scenario, error=str(e)))
                except Exception as e:
                    logger.error(f"Unexpected error in scenario {scenario.id} ({scenario.name}): {e}")
                    runs.append(SensitivityRun(scenario=scenario, error=str(e)))
                finally:
                    pbar.update(1)

    return sorted(runs, key=lambda run: run.scenario.id)


def loci_rows(runs: Sequence[SensitivityRun]) -> List[Dict]:
    """Flatten sensitivity runs into eigenvalue loci rows."""
    rows = []
    for run in runs:
        if run.result is None:
            continue
        for entry in run.result.mode_table():
            rows.append({'scenario': run.scenario.id, 'scenario_name': run.scenario.name, **entry})
    return rows
