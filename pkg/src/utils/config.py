#!/usr/bin/env python3
"""
Configuration file for GridSync Screener
Centralizes every numerical default: solver tolerances, stability bands,
perturbation and simulation settings, sweep ranges, and output paths.
"""

import logging
import math
import os
from pathlib import Path

logger = logging.getLogger(__name__)

# Repository root (src/utils/config.py -> two levels up)
PROJECT_ROOT = Path(__file__).resolve().parents[2]

# ============================================================================
# PATHS AND DIRECTORIES
# ============================================================================

DATA_DIR = PROJECT_ROOT / 'data'
CASES_DIR = DATA_DIR / 'cases'

# Output directory - can be overridden by environment variable
OUTPUT_DIR = Path(os.getenv('GRIDSYNC_OUTPUT_DIR', str(PROJECT_ROOT / 'output')))

# Stock benchmark shipped with the repository
STOCK_CASE_9BUS = CASES_DIR / 'case9.json'
STOCK_CASE_9BUS_M = CASES_DIR / 'case9.m'
STOCK_CASE_9BUS_DYN = CASES_DIR / 'case9_dyn.json'
STOCK_CASE_39BUS_M = CASES_DIR / 'case39.m'
STOCK_CASE_39BUS_DYN = CASES_DIR / 'case39_dyn.json'

TOOL_VERSION = '1.0.0'

# ============================================================================
# POWER FLOW
# ============================================================================

# Newton-Raphson mismatch tolerance (p.u.) and iteration cap
POWERFLOW_TOLERANCE = 1e-8
POWERFLOW_MAX_ITER = 50

# Jacobians with a reciprocal condition number below this are treated as singular
JACOBIAN_RCOND_MIN = 1e-14

# ============================================================================
# NETWORK REDUCTION
# ============================================================================

# |Y_pp| below this at an elimination step is a zero pivot
ZERO_PIVOT_TOL = 1e-12

# |V|^2 below this makes constant-admittance folding impossible
ZERO_VOLTAGE_TOL = 1e-12

# ============================================================================
# MODAL ANALYSIS
# ============================================================================

# Marginal band is this factor times the 2-norm of A
MARGINAL_TOL_FACTOR = 1e-9

# Relative spread of d_i = D_i/M_i tolerated by the homogeneous shortcut
HETEROGENEITY_TOL = 1e-9

# |Im(lambda)| below this (relative to |lambda|) classifies a mode as real
REAL_MODE_TOL = 1e-9

# Stock sensitivity scenarios: (id, name, inertia factor, damping factor)
SENSITIVITY_SCENARIOS = [
    (0, 'base', 1.0, 1.0),
    (1, 'inertia_x2', 2.0, 1.0),
    (2, 'inertia_x0.5', 0.5, 1.0),
    (3, 'damping_x2', 1.0, 2.0),
    (4, 'damping_x0.5', 1.0, 0.5),
    (5, 'gfl_substitution', 0.1, 0.1),
    (6, 'gfm_droop_replacement', 0.01, 2.0),
]

# ============================================================================
# SIMULATION
# ============================================================================

# Largest perturbation still considered small-signal (p.u. or rad/s)
SMALL_SIGNAL_BOUND = 0.1

# Default event: power step at the largest non-reference generator
DEFAULT_PERTURBATION_KIND = 'power_step'
DEFAULT_PERTURBATION_MAGNITUDE = -0.05
DEFAULT_PERTURBATION_START = 0.0

# Sweep event: a common acceleration (rad/s^2) on every dynamic generator, so the
# disturbance each machine sees grows with its own inertia
SWEEP_PERTURBATION_KIND = 'inertial_step'
SWEEP_PERTURBATION_MAGNITUDE = -0.5

DEFAULT_HORIZON = 30.0
DEFAULT_TIME_STEP = 0.01

# dt must not exceed this factor over the largest |Im(lambda)|
RESOLUTION_GUARD = 0.1

# Frequency-response metrics
RISE_TIME_LIMITS = (0.1, 0.9)
SETTLING_BAND = 0.02

# Deviations below this (Hz) count as no event
NO_EVENT_TOL = 1e-12

# Under-frequency protection thresholds (Hz)
NADIR_THRESHOLD_60HZ = 59.5
NADIR_THRESHOLD_50HZ = 48.5

# ============================================================================
# SWEEP CONFIGURATION
# ============================================================================

DEFAULT_SCENARIOS = 1000
DEFAULT_SEED = 42

# Upper bounds for inertia constant H (s) and damping D (p.u.); lo = 0.1 * hi
INERTIA_HI = 8.0
DAMPING_HI = 0.05
RANGE_LO_FRACTION = 0.1

DEFAULT_LOAD_SCALE_RANGE = (0.8, 1.2)

# Generator rating as a multiple of its dispatch (reserve margin)
RATING_FACTOR_RANGE = (1.0, 2.5)

# Rating floor (MVA) for generators dispatched at or near zero
MIN_RATING_MVA = 1.0

DEFAULT_TECH_MIX = 'all_sg'

# Parallel workers for scenario evaluation
MAX_WORKERS = 8

# Heatmap grid resolution (bins per axis)
HEATMAP_BINS = 10

# ============================================================================
# OUTPUT FORMATTING
# ============================================================================

# Significant digits for every floating-point value written to disk or stdout
FLOAT_DIGITS = 12

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


def omega_base(base_freq):
    """Nominal angular frequency (rad/s) for a base frequency in Hz."""
    return 2.0 * math.pi * base_freq


# ============================================================================
# VALIDATION
# ============================================================================

def validate_config():
    """Validate configuration and warn about inconsistent values"""
    warnings = []

    if POWERFLOW_TOLERANCE <= 0:
        warnings.append("POWERFLOW_TOLERANCE must be positive.")

    if abs(DEFAULT_PERTURBATION_MAGNITUDE) > SMALL_SIGNAL_BOUND:
        warnings.append("DEFAULT_PERTURBATION_MAGNITUDE exceeds SMALL_SIGNAL_BOUND.")

    if DEFAULT_PERTURBATION_KIND not in ("power_step", "speed_impulse", "inertial_step"):
        warnings.append(f"Unknown DEFAULT_PERTURBATION_KIND {DEFAULT_PERTURBATION_KIND!r}.")

    # worst case: the stiffest machine on its own rating, M = 2 H / omega
    if abs(SWEEP_PERTURBATION_MAGNITUDE) * 2.0 * INERTIA_HI / omega_base(50.0) > SMALL_SIGNAL_BOUND:
        warnings.append("SWEEP_PERTURBATION_MAGNITUDE can exceed SMALL_SIGNAL_BOUND at INERTIA_HI.")

    lo, hi = RISE_TIME_LIMITS
    if not 0 < lo < hi < 1:
        warnings.append("RISE_TIME_LIMITS must satisfy 0 < lo < hi < 1.")

    if DEFAULT_LOAD_SCALE_RANGE[0] > DEFAULT_LOAD_SCALE_RANGE[1]:
        warnings.append("DEFAULT_LOAD_SCALE_RANGE is empty.")

    if RATING_FACTOR_RANGE[0] < 1.0:
        warnings.append("RATING_FACTOR_RANGE below 100% of dispatch violates the reserve-margin rule.")

    for warning in warnings:
        logger.warning(warning)

    return warnings


if __name__ == '__main__':
    print("GridSync Screener Configuration")
    print("=" * 50)
    print(f"Project Root: {PROJECT_ROOT}")
    print(f"Cases Directory: {CASES_DIR}")
    print(f"Output Directory: {OUTPUT_DIR}")
    print(f"Power flow: tol={POWERFLOW_TOLERANCE}, max_iter={POWERFLOW_MAX_ITER}")
    print(f"Sweep: n={DEFAULT_SCENARIOS}, seed={DEFAULT_SEED}, H<={INERTIA_HI}, D<={DAMPING_HI}")
    print()
    for line in validate_config():
        print(f"WARNING: {line}")
