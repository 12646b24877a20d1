#!/usr/bin/env python3
"""
Time-domain response for GridSync Screener

Integrates x' = A x + b u(t) under a small power step, speed impulse or
system-wide inertial (acceleration) step with
exact zero-order-hold stepping (matrix exponential of the augmented system), and
extracts the frequency-response metrics: nadir, rise time, peak time and
settling time of the centre-of-inertia frequency.

Usage:
    pert = default_perturbation(model)
    trace = simulate_response(model, pert, horizon=30.0, dt=suggest_time_step(model))
    metrics = compute_metrics(trace, model.base_freq)
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from src.core.errors import DimensionError, NoEventError, ResolutionError, SmallSignalBoundError
from src.core.linearize import StateSpaceModel
from src.utils.config import (
    DEFAULT_HORIZON,
    DEFAULT_PERTURBATION_KIND,
    DEFAULT_PERTURBATION_MAGNITUDE,
    DEFAULT_PERTURBATION_START,
    DEFAULT_TIME_STEP,
    NO_EVENT_TOL,
    RESOLUTION_GUARD,
    RISE_TIME_LIMITS,
    SETTLING_BAND,
    SMALL_SIGNAL_BOUND,
)

logger = logging.getLogger(__name__)


class PerturbationKind(str, Enum):
    POWER_STEP = 'power_step'
    SPEED_IMPULSE = 'speed_impulse'
    INERTIAL_STEP = 'inertial_step'


@dataclass(frozen=True)
class Perturbation:
    """
    Power step (p.u.) or speed impulse (rad/s) at one generator, or an inertial
    step: every dynamic generator i sees a power step M_i * magnitude, i.e. a
    common acceleration of magnitude rad/s^2. The inertial step has no target.
    """
    kind: PerturbationKind
    target_gen: Optional[int]
    magnitude: float
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', PerturbationKind(self.kind))
        if self.kind == PerturbationKind.INERTIAL_STEP:
            object.__setattr__(self, 'target_gen', None)
        elif self.target_gen is None:
            raise ValueError(f"{self.kind.value} needs a target generator")
        if self.start_time < 0:
            raise ValueError(f"start_time must be non-negative, got {self.start_time}")

    def scaled(self, factor: float) -> 'Perturbation':
        return Perturbation(self.kind, self.target_gen, self.magnitude * factor, self.start_time)


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    times: np.ndarray
    speeds: np.ndarray
    relative_angles: np.ndarray
    generator_ids: Tuple[int, ...]
    inertia_weights: np.ndarray
    base_freq: float
    start_time: float = 0.0

    @property
    def frequency(self) -> np.ndarray:
        """Per-generator frequency f = base_freq + dw / (2 pi), Hz."""
        return self.base_freq + self.speeds / (2.0 * math.pi)

    @property
    def coi_frequency(self) -> np.ndarray:
        """Inertia-weighted mean frequency."""
        weights = self.inertia_weights / self.inertia_weights.sum()
        return self.frequency @ weights

    def rows(self) -> List[Dict]:
        freq = self.frequency
        coi = self.coi_frequency
        ref = self.generator_ids[-1]
        rows = []
        for k, t in enumerate(self.times):
            row = {'time': float(t), 'f_coi': float(coi[k])}
            for i, gid in enumerate(self.generator_ids):
                row[f'f_{gid}'] = float(freq[k, i])
            for i, gid in enumerate(self.generator_ids[:-1]):
                row[f'delta_{gid},{ref}'] = float(self.relative_angles[k, i])
            rows.append(row)
        return rows


@dataclass(frozen=True)
class FrequencyMetrics:
    nadir_p: float
    t_r: float
    t_p: float
    t_s: float
    per_gen_nadir: Dict[int, float] = field(default_factory=dict)
    final_frequency: float = 0.0
    peak_deviation: float = 0.0

    def to_dict(self) -> Dict:
        return {
            'nadir_p': self.nadir_p,
            't_r': self.t_r,
            't_p': self.t_p,
            't_s': self.t_s,
            'per_gen_nadir': {str(k): v for k, v in self.per_gen_nadir.items()},
            'final_frequency': self.final_frequency,
            'peak_deviation': self.peak_deviation,
        }


def max_oscillation_frequency(model: StateSpaceModel) -> float:
    """Largest |Im(lambda)| of A (rad/s)."""
    return float(np.abs(np.linalg.eigvals(model.A).imag).max())


def suggest_time_step(model: StateSpaceModel, dt_max: float = DEFAULT_TIME_STEP) -> float:
    """Largest round step <= dt_max that resolves the fastest oscillatory mode."""
    omega = max_oscillation_frequency(model)
    if omega == 0:
        return dt_max
    limit = RESOLUTION_GUARD / omega
    if dt_max <= limit:
        return dt_max
    # largest 1/2/5 x 10^k step under the guard
    exponent = math.floor(math.log10(limit))
    for mantissa in (5.0, 2.0, 1.0):
        dt = mantissa * 10.0 ** exponent
        if dt <= limit:
            return dt
    return 10.0 ** (exponent - 1)


def default_perturbation(model: StateSpaceModel,
                         magnitude: float = DEFAULT_PERTURBATION_MAGNITUDE,
                         start_time: float = DEFAULT_PERTURBATION_START,
                         kind: str = DEFAULT_PERTURBATION_KIND) -> Perturbation:
    """
    Event at the largest-rated non-reference generator (the reference if n = 1).
    An inertial step hits every generator and ignores the target choice.
    """
    kind = PerturbationKind(kind)
    if kind == PerturbationKind.INERTIAL_STEP:
        return Perturbation(kind, None, magnitude, start_time)
    candidates = list(range(model.n - 1)) or [0]
    ratings = model.ratings if model.ratings is not None else model.inertia
    target = max(candidates, key=lambda k: (ratings[k], -k))
    return Perturbation(kind, model.generator_ids[target], magnitude, start_time)


def equivalent_size(model: StateSpaceModel, pert: Perturbation) -> float:
    """
    Size compared against the small-signal bound: |magnitude| for a power step
    or speed impulse, and for an inertial step the largest power step it implies
    on a machine's own rating, |a| max_i M_i base_mva / S_i.
    """
    if pert.kind != PerturbationKind.INERTIAL_STEP:
        return abs(pert.magnitude)
    per_machine = model.inertia.astype(float).copy()
    if model.ratings is not None:
        rated = model.ratings > 0
        per_machine[rated] = model.inertia[rated] * model.base_mva / model.ratings[rated]
    return abs(pert.magnitude) * float(per_machine.max())


def _discretize(A: np.ndarray, b: np.ndarray, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """Phi = e^{A tau}, Gamma = int_0^tau e^{A s} ds b, from the augmented exponential."""
    m = A.shape[0]
    aug = np.zeros((m + 1, m + 1))
    aug[:m, :m] = A
    aug[:m, m] = b
    E = scipy.linalg.expm(aug * tau)
    return E[:m, :m], E[:m, m]


def simulate_response(model: StateSpaceModel, pert: Perturbation,
                      horizon: float = DEFAULT_HORIZON, dt: float = DEFAULT_TIME_STEP,
                      small_signal_bound: float = SMALL_SIGNAL_BOUND) -> SimulationTrace:
    """
    Response on the uniform grid t_k = k dt, 0 <= t_k <= horizon.

    All states are zero before pert.start_time. A power step adds magnitude / M
    to the target's speed derivative from start_time on; a speed impulse adds
    magnitude to the target's speed at start_time; an inertial step adds
    magnitude to every speed derivative.

    Raises:
        ResolutionError: dt > guard / max|Im(lambda)|
        SmallSignalBoundError: equivalent_size above the small-signal bound
        DimensionError: target generator not in the model
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    size = equivalent_size(model, pert)
    if size > small_signal_bound:
        raise SmallSignalBoundError(
            f"Perturbation {pert.kind.value} of size {size:.4g} exceeds the small-signal bound {small_signal_bound}"
        )
    inertial = pert.kind == PerturbationKind.INERTIAL_STEP
    if not inertial and pert.target_gen not in model.generator_ids:
        raise DimensionError(f"Generator {pert.target_gen} is not a dynamic generator of the model")

    eigenvalues = np.linalg.eigvals(model.A)
    omega = float(np.abs(eigenvalues.imag).max())
    if omega > 0 and dt > RESOLUTION_GUARD / omega:
        raise ResolutionError(
            f"dt = {dt} cannot resolve a {omega:.4g} rad/s mode (need dt <= {RESOLUTION_GUARD / omega:.4g})"
        )
    if eigenvalues.real.max() > 0:
        logger.warning(f"Simulating an unstable model (max Re = {eigenvalues.real.max():.4g})")

    A = model.A
    m = A.shape[0]
    b = np.zeros(m)
    u = 0.0
    target = None
    if inertial:
        b[model.speed_slice] = 1.0
        u = pert.magnitude
    else:
        target = model.speed_index(pert.target_gen)
        if pert.kind == PerturbationKind.POWER_STEP:
            b[target] = 1.0 / model.inertia[model.generator_ids.index(pert.target_gen)]
            u = pert.magnitude

    n_steps = int(math.floor(horizon / dt + 1e-9))
    times = np.arange(n_steps + 1) * dt
    X = np.zeros((n_steps + 1, m))
    Phi, Gamma = _discretize(A, b, dt)

    # first grid point at or after the event
    k0 = int(math.ceil(pert.start_time / dt - 1e-9))
    if k0 <= n_steps:
        offset = times[k0] - pert.start_time
        x = np.zeros(m)
        if pert.kind == PerturbationKind.SPEED_IMPULSE:
            x[target] = pert.magnitude
            if offset > 0:
                x = scipy.linalg.expm(A * offset) @ x
        elif offset > 0:
            _, Gamma_partial = _discretize(A, b, offset)
            x = Gamma_partial * u
        X[k0] = x
        drive = Gamma * u
        for k in range(k0, n_steps):
            x = Phi @ x + drive
            X[k + 1] = x

    n = model.n
    return SimulationTrace(
        times=times,
        speeds=X[:, n - 1:],
        relative_angles=X[:, :n - 1],
        generator_ids=model.generator_ids,
        inertia_weights=model.inertia.copy(),
        base_freq=model.base_freq,
        start_time=pert.start_time,
    )


def _first_crossing(t: np.ndarray, y: np.ndarray, level: float) -> float:
    """Linearly interpolated first time y reaches level (y rising from 0)."""
    idx = int(np.argmax(y >= level))
    if idx == 0:
        return float(t[0])
    y0, y1 = y[idx - 1], y[idx]
    return float(t[idx - 1] + (level - y0) / (y1 - y0) * (t[idx] - t[idx - 1]))


def compute_metrics(trace: SimulationTrace, base_freq: Optional[float] = None) -> FrequencyMetrics:
    """
    Frequency-response metrics of the centre-of-inertia frequency.

    Times are measured from the event. The rise reference is the final deviation,
    or the peak deviation when the response returns close to baseline. Settling
    uses a band of SETTLING_BAND times the peak deviation around the final value.

    Raises:
        NoEventError: no generator ever leaves the baseline
    """
    base = trace.base_freq if base_freq is None else base_freq
    freq = base + trace.speeds / (2.0 * math.pi)
    if trace.times.size == 0 or np.max(np.abs(freq - base)) <= NO_EVENT_TOL:
        raise NoEventError("Trace never leaves the pre-disturbance baseline (no event)")

    weights = trace.inertia_weights / trace.inertia_weights.sum()
    coi = freq @ weights
    per_gen_nadir = {gid: float(freq[:, i].min()) for i, gid in enumerate(trace.generator_ids)}

    after = trace.times >= trace.start_time - 1e-12
    t = trace.times[after] - trace.start_time
    y = coi[after] - base
    nadir = float(coi.min())

    peak_idx = int(np.argmax(np.abs(y)))
    peak = float(y[peak_idx])
    if abs(peak) <= NO_EVENT_TOL:
        return FrequencyMetrics(nadir_p=nadir, t_r=0.0, t_p=0.0, t_s=0.0, per_gen_nadir=per_gen_nadir,
                                final_frequency=float(coi[-1]), peak_deviation=0.0)

    sign = math.copysign(1.0, peak)
    magnitude = sign * y
    y_final = float(magnitude[-1])
    reference = y_final if y_final >= 0.1 * abs(peak) else abs(peak)

    lo, hi = RISE_TIME_LIMITS
    t_r = _first_crossing(t, magnitude, hi * reference) - _first_crossing(t, magnitude, lo * reference)

    t_p = float(t[int(np.argmax(magnitude >= abs(peak) * (1.0 - 1e-6)))])

    outside = np.abs(magnitude - y_final) > SETTLING_BAND * abs(peak)
    if outside.any():
        last = int(np.nonzero(outside)[0][-1])
        t_s = float(t[min(last + 1, len(t) - 1)])
    else:
        t_s = 0.0

    return FrequencyMetrics(
        nadir_p=nadir,
        t_r=float(t_r),
        t_p=t_p,
        t_s=t_s,
        per_gen_nadir=per_gen_nadir,
        final_frequency=float(coi[-1]),
        peak_deviation=peak,
    )


# ============================================================================
# SCREENING
# ============================================================================

@dataclass(frozen=True)
class ScreeningResult:
    gen_id: int
    bounded: bool
    decayed: bool
    max_abs_speed: float
    final_abs_speed: float

    @property
    def passed(self) -> bool:
        return self.bounded and self.decayed


def screen_generators(model: StateSpaceModel, magnitude: float = 0.01,
                      horizon: float = DEFAULT_HORIZON, dt: Optional[float] = None,
                      decay_ratio: float = 0.05) -> List[ScreeningResult]:
    """
    Kick every generator's speed once and check that the response stays bounded
    and dies out (final |dw| below decay_ratio of the initial kick).
    """
    dt = dt or suggest_time_step(model)
    results = []
    for gid in model.generator_ids:
        trace = simulate_response(model, Perturbation(PerturbationKind.SPEED_IMPULSE, gid, magnitude),
                                  horizon=horizon, dt=dt)
        speeds = np.abs(trace.speeds)
        max_abs = float(speeds.max())
        final_abs = float(speeds[-1].max())
        bounded = bool(np.all(np.isfinite(speeds))) and max_abs <= 1e3 * abs(magnitude)
        decayed = final_abs <= decay_ratio * abs(magnitude)
        if not (bounded and decayed):
            logger.warning(f"Generator {gid} fails screening (max {max_abs:.3g}, final {final_abs:.3g} rad/s)")
        results.append(ScreeningResult(gid, bounded, decayed, max_abs, final_abs))
    return results
