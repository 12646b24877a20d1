#!/usr/bin/env python3
"""
Independent verification oracles for GridSync Screener

Each oracle recomputes a production result along a different numerical path
and reports the discrepancy:

    schur_oracle          Kron reduction vs. dense Schur complement (linear solve)
    fd_jacobian_oracle    analytic Jacobian vs. central finite differences
    polyroot_oracle       eigenvalues of A vs. roots of the cubic characteristic
                          matrix polynomial (block companion linearization)
    single_machine_oracle first-order closed-form step response
    two_machine_oracle    closed-form spectrum of a symmetric machine pair

Usage:
    reports = run_oracles(build_study(case))
    assert all(r.passed for r in reports if r.applicable)
"""

import hashlib
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from src.core.linearize import StateSpaceModel
from src.core.modal import eigen_analysis
from src.core.powerflow import AdmittanceMatrix
from src.core.reduce import ReducedNetwork, kron_reduce
from src.core.simulate import SimulationTrace

logger = logging.getLogger(__name__)

SCHUR_TOL = 1e-10
FD_TOL = 1e-5
POLYROOT_TOL = 1e-6
CLOSED_FORM_TOL = 1e-8


@dataclass(frozen=True)
class OracleReport:
    name: str
    max_abs_error: float
    max_rel_error: float
    passed: bool
    applicable: bool = True
    inputs_digest: str = ''
    detail: str = ''

    def to_dict(self) -> Dict:
        return asdict(self)


def inputs_digest(*arrays) -> str:
    """sha256 over the raw bytes of the oracle inputs."""
    h = hashlib.sha256()
    for array in arrays:
        a = np.ascontiguousarray(np.asarray(array))
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def _inapplicable(name: str, digest: str, detail: str) -> OracleReport:
    logger.info(f"{name}: not applicable ({detail})")
    return OracleReport(name=name, max_abs_error=math.nan, max_rel_error=math.nan, passed=False,
                        applicable=False, inputs_digest=digest, detail=detail)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Hausdorff distance between two finite point sets in the complex plane."""
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return math.inf
    dist = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def schur_oracle(Y_folded: AdmittanceMatrix, boundary: Sequence[int],
                 reduced: Optional[ReducedNetwork] = None, tol: float = SCHUR_TOL) -> OracleReport:
    """Y_bb - Y_bi Y_ii^{-1} Y_ib via one dense solve, compared with kron_reduce."""
    name = 'schur'
    digest = inputs_digest(Y_folded.Y, np.array(boundary))
    b_idx = [Y_folded.index(bus) for bus in boundary]
    i_idx = [k for k in range(Y_folded.order) if k not in b_idx]
    Y = Y_folded.Y

    if i_idx:
        Y_ii = Y[np.ix_(i_idx, i_idx)]
        try:
            rcond = 1.0 / np.linalg.cond(Y_ii)
            if not rcond > np.finfo(float).eps:
                raise np.linalg.LinAlgError(f"rcond {rcond:.2e}")
            X = scipy.linalg.solve(Y_ii, Y[np.ix_(i_idx, b_idx)])
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
            return _inapplicable(name, digest, f"interior block singular: {e}")
        schur = Y[np.ix_(b_idx, b_idx)] - Y[np.ix_(b_idx, i_idx)] @ X
    else:
        schur = Y[np.ix_(b_idx, b_idx)]

    if reduced is None:
        reduced = kron_reduce(Y_folded, boundary)
    err = float(np.abs(reduced.Y_red - schur).max()) if schur.size else 0.0
    scale = max(1.0, float(np.abs(Y).max()))
    rel = err / scale
    return OracleReport(name=name, max_abs_error=err, max_rel_error=rel, passed=rel <= tol,
                        inputs_digest=digest,
                        detail=f"{len(i_idx)} interior, {len(b_idx)} boundary buses")


def fd_jacobian_oracle(injections: Callable[[np.ndarray], np.ndarray], point: np.ndarray,
                       analytic: np.ndarray, step: float = 1e-6, tol: float = FD_TOL,
                       name: str = 'fd_jacobian') -> OracleReport:
    """Central differences of injections() at point vs. the analytic Jacobian."""
    point = np.asarray(point, dtype=float)
    digest = inputs_digest(point, analytic)
    n = len(point)
    fd = np.zeros((len(injections(point)), n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        fd[:, j] = (injections(point + e) - injections(point - e)) / (2.0 * step)

    err = float(np.abs(fd - analytic).max()) if fd.size else 0.0
    scale = float(np.abs(analytic).max()) if analytic.size else 0.0
    rel = err / scale if scale > 0 else err
    return OracleReport(name=name, max_abs_error=err, max_rel_error=rel, passed=rel <= tol,
                        inputs_digest=digest, detail=f"step {step:g}")


def laplacian_oracle(reduced: ReducedNetwork, H: np.ndarray, step: float = 1e-6) -> OracleReport:
    """H against dP/d(delta) of P = Re(V conj(Y_red V)) on the reduced network."""
    vm, va = reduced.boundary_voltages()
    Y = reduced.Y_red

    def active_power(angles):
        V = vm * np.exp(1j * angles)
        return (V * np.conj(Y @ V)).real

    return fd_jacobian_oracle(active_power, va, H, step=step, name='laplacian_fd')


def _companion_roots(A: np.ndarray, n: int) -> np.ndarray:
    """Roots of det(I l^3 + beta l^2 + gamma l + xi) built straight from A."""
    m = n - 1
    h_i = A[m:2 * m, :m]
    h_n = A[2 * m, :m]
    a_i = np.diag(np.diag(A)[m:2 * m])
    a_n = A[2 * m, 2 * m]
    one_h_n = np.outer(np.ones(m), h_n)
    beta = -a_i - a_n * np.eye(m)
    gamma = a_i * a_n - h_i + one_h_n
    xi = h_i * a_n - a_i @ one_h_n

    C = np.zeros((3 * m, 3 * m))
    C[:m, m:2 * m] = np.eye(m)
    C[m:2 * m, 2 * m:] = np.eye(m)
    C[2 * m:, :m] = -xi
    C[2 * m:, m:2 * m] = -gamma
    C[2 * m:, 2 * m:] = -beta
    return np.linalg.eigvals(C)


def polyroot_oracle(model: StateSpaceModel, tol: float = POLYROOT_TOL) -> OracleReport:
    """
    Roots of the characteristic matrix polynomial vs. the spectrum of A.

    The polynomial's determinant carries n-2 extra roots at the reference
    generator's signed damping factor; they are removed before comparing.
    Applicable for 2 <= n <= 4.
    """
    name = 'polyroot'
    digest = inputs_digest(model.A)
    n = model.n
    if n < 2 or n > 4:
        return _inapplicable(name, digest, f"n = {n} outside 2..4")

    roots = list(_companion_roots(model.A, n))
    a_n = model.A[2 * n - 2, 2 * n - 2]
    for _ in range(n - 2):
        roots.pop(int(np.argmin([abs(r - a_n) for r in roots])))

    spectrum = eigen_analysis(model).eigenvalues
    err = hausdorff(np.array(roots), spectrum)
    scale = max(1.0, float(np.abs(spectrum).max()))
    return OracleReport(name=name, max_abs_error=err, max_rel_error=err / scale, passed=err <= tol * scale,
                        inputs_digest=digest, detail=f"{len(roots)} roots vs {len(spectrum)} eigenvalues")


def single_machine_oracle(M: float, D: float, delta_p: float, trace: SimulationTrace,
                          gen_index: int = 0, tol: float = CLOSED_FORM_TOL) -> OracleReport:
    """dw(t) = (dP / D)(1 - exp(-(D/M)(t - t0))) for t >= t0."""
    name = 'single_machine'
    digest = inputs_digest(np.array([M, D, delta_p]), trace.speeds)
    t = trace.times - trace.start_time
    expected = np.where(t >= 0, delta_p / D * (1.0 - np.exp(-(D / M) * np.maximum(t, 0.0))), 0.0)
    err = float(np.abs(trace.speeds[:, gen_index] - expected).max())
    scale = abs(delta_p / D) if D > 0 else 1.0
    rel = err / scale if scale > 0 else err
    return OracleReport(name=name, max_abs_error=err, max_rel_error=rel, passed=rel <= tol,
                        inputs_digest=digest, detail=f"M={M:g}, D={D:g}, dP={delta_p:g}")


def two_machine_oracle(model: StateSpaceModel, tol: float = CLOSED_FORM_TOL) -> OracleReport:
    """
    Identical machines (M, D) coupled by synchronizing coefficient k:
        lambda = -d/2 +/- sqrt(d^2/4 - 2k/M), plus the uniform-speed mode -d.
    """
    name = 'two_machine'
    digest = inputs_digest(model.A)
    if model.n != 2:
        return _inapplicable(name, digest, f"n = {model.n}, needs 2")
    M, D = model.inertia, model.damping
    if not (math.isclose(M[0], M[1], rel_tol=1e-12) and math.isclose(D[0], D[1], rel_tol=1e-12)):
        return _inapplicable(name, digest, "machines are not identical")

    d = D[0] / M[0]
    stiffness = (model.H[0, 0] - model.H[1, 0]) / M[0]
    root = np.sqrt(complex(d * d / 4.0 - stiffness))
    expected = np.array([-d / 2 + root, -d / 2 - root, -d])
    spectrum = np.linalg.eigvals(model.A)
    err = hausdorff(expected, spectrum)
    scale = max(1.0, float(np.abs(expected).max()))
    return OracleReport(name=name, max_abs_error=err, max_rel_error=err / scale, passed=err <= tol * scale,
                        inputs_digest=digest, detail=f"k/M = {stiffness:.6g}, d = {d:.6g}")


def run_oracles(study) -> List[OracleReport]:
    """Every oracle that applies to a built study (see services.pipeline.build_study)."""
    reports = [
        schur_oracle(study.folded, list(study.reduced.boundary_buses), reduced=study.reduced),
        laplacian_oracle(study.reduced, study.laplacian.H),
        polyroot_oracle(study.model),
        two_machine_oracle(study.model),
    ]
    for report in reports:
        if report.applicable:
            status = 'PASS' if report.passed else 'FAIL'
            logger.info(f"Oracle {report.name}: {status} (max rel error {report.max_rel_error:.3e})")
    return reports
