#!/usr/bin/env python3
"""
Monte Carlo stability screening for GridSync Screener

Draws random inertia, damping, loading, ratings and technology mixes around a
base case, runs every scenario through power flow, reduction, modal analysis and
a stock frequency event, and records capacity-weighted aggregate inertia and
damping next to the verdict and nadir. Scenarios are independent: each one owns
a counter-based random stream keyed on (seed, scenario_id), so results do not
depend on evaluation order or worker count.

Usage:
    cfg = SweepConfig(case=load_case(STOCK_CASE_9BUS), n_scenarios=100, seed=42)
    records = run_sweep(cfg)
    rows = emit_heatmap(records)
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from tqdm import tqdm

from services.pipeline import build_study
from src.core.errors import GridSyncError, PowerFlowDivergedError, SingularJacobianError, SweepConfigError, ZeroCapacityError
from src.core.modal import eigen_analysis
from src.core.model import (
    GeneratorSpec,
    NetworkCase,
    Tech,
    damping_to_machine,
    damping_to_system,
    inertia_h_to_m,
    inertia_m_to_h,
    scale_loads,
    validate_case,
)
from src.core.powerflow import build_admittance, solve_power_flow
from src.core.reduce import generator_injections
from src.core.simulate import (
    PerturbationKind,
    compute_metrics,
    default_perturbation,
    simulate_response,
    suggest_time_step,
)
from src.utils.config import (
    DAMPING_HI,
    DEFAULT_HORIZON,
    DEFAULT_LOAD_SCALE_RANGE,
    DEFAULT_SCENARIOS,
    DEFAULT_SEED,
    DEFAULT_TECH_MIX,
    DEFAULT_TIME_STEP,
    HEATMAP_BINS,
    INERTIA_HI,
    MAX_WORKERS,
    MIN_RATING_MVA,
    NADIR_THRESHOLD_50HZ,
    NADIR_THRESHOLD_60HZ,
    RANGE_LO_FRACTION,
    RATING_FACTOR_RANGE,
    SWEEP_PERTURBATION_KIND,
    SWEEP_PERTURBATION_MAGNITUDE,
)

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1
TECH_MIX_PRESETS = ('all_sg', 'all_gfm_vsm', 'all_gfm_droop', 'gfl_fraction', 'mixed')
LOAD_MODES = ('global', 'per_load')

RECORD_FIELDS = [
    'scenario_id', 'H_agg', 'D_agg', 'load_scale', 'tech_assignment',
    'powerflow_converged', 'verdict', 'nadir_p', 'max_re_lambda', 'error',
]
HEATMAP_FIELDS = ['D_agg', 'H_agg', 'nadir_p', 'verdict', 'below_59p5_hz', 'below_48p5_hz']


@dataclass(frozen=True)
class SweepConfig:
    case: NetworkCase
    n_scenarios: int = DEFAULT_SCENARIOS
    seed: int = DEFAULT_SEED
    inertia_range: Tuple[float, float] = (RANGE_LO_FRACTION * INERTIA_HI, INERTIA_HI)
    damping_range: Tuple[float, float] = (RANGE_LO_FRACTION * DAMPING_HI, DAMPING_HI)
    load_scale_range: Tuple[float, float] = DEFAULT_LOAD_SCALE_RANGE
    rating_factor_range: Tuple[float, float] = RATING_FACTOR_RANGE
    tech_mix: str = DEFAULT_TECH_MIX
    load_mode: str = 'global'
    perturbation_kind: str = SWEEP_PERTURBATION_KIND
    magnitude: float = SWEEP_PERTURBATION_MAGNITUDE
    horizon: float = DEFAULT_HORIZON
    dt: Optional[float] = None

    def __post_init__(self):
        if self.n_scenarios < 1:
            raise SweepConfigError(f"n_scenarios must be at least 1, got {self.n_scenarios}")
        for name in ('inertia_range', 'damping_range', 'load_scale_range', 'rating_factor_range'):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise SweepConfigError(f"{name} must satisfy 0 <= lo <= hi, got {lo}:{hi}")
        if self.rating_factor_range[0] < 1.0:
            raise SweepConfigError("rating_factor_range must start at or above 1.0 (rating >= dispatch)")
        if self.load_mode not in LOAD_MODES:
            raise SweepConfigError(f"load_mode must be one of {LOAD_MODES}, got '{self.load_mode}'")
        if self.perturbation_kind not in [k.value for k in PerturbationKind]:
            raise SweepConfigError(f"Unknown perturbation kind '{self.perturbation_kind}'")
        parse_tech_mix(self.tech_mix)


@dataclass(frozen=True)
class SweepRecord:
    scenario_id: int
    H_agg: Optional[float] = None
    D_agg: Optional[float] = None
    load_scale: Optional[float] = None
    tech_assignment: str = ''
    powerflow_converged: bool = False
    verdict: Optional[str] = None
    nadir_p: Optional[float] = None
    max_re_lambda: Optional[float] = None
    error: Optional[str] = None

    def to_row(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class ScenarioDraw:
    scenario_id: int
    case: NetworkCase
    load_scale: float


def parse_tech_mix(policy: str) -> Tuple[str, float]:
    """'gfl_fraction:0.3' -> ('gfl_fraction', 0.3); other presets carry no parameter."""
    name, _, arg = policy.partition(':')
    if name not in TECH_MIX_PRESETS:
        raise SweepConfigError(f"Unknown tech mix '{policy}' (choose from {', '.join(TECH_MIX_PRESETS)})")
    if name == 'gfl_fraction':
        try:
            fraction = float(arg)
        except ValueError:
            raise SweepConfigError(f"gfl_fraction needs a numeric fraction, got '{arg}'")
        if not 0 <= fraction < 1:
            raise SweepConfigError(f"gfl_fraction must lie in [0, 1), got {fraction}")
        return name, fraction
    if arg:
        raise SweepConfigError(f"Tech mix '{name}' takes no parameter")
    return name, 0.0


def scenario_rng(seed: int, scenario_id: int) -> np.random.Generator:
    """Independent Philox stream for one scenario."""
    return np.random.Generator(np.random.Philox(key=(scenario_id << 64) | (seed & SEED_MASK)))


def _assign_techs(rng: np.random.Generator, n_gen: int, policy: str) -> List[Tech]:
    name, fraction = parse_tech_mix(policy)
    if name == 'all_sg':
        return [Tech.SG] * n_gen
    if name == 'all_gfm_vsm':
        return [Tech.GFM_VSM] * n_gen
    if name == 'all_gfm_droop':
        return [Tech.GFM_DROOP] * n_gen
    if name == 'gfl_fraction':
        n_gfl = min(int(round(fraction * n_gen)), n_gen - 1)
        gfl = set(rng.permutation(n_gen)[:n_gfl].tolist())
        return [Tech.GFL if k in gfl else Tech.SG for k in range(n_gen)]

    choices = [Tech.SG, Tech.GFM_VSM, Tech.GFM_DROOP, Tech.GFL]
    techs = [choices[k] for k in rng.integers(0, len(choices), size=n_gen)]
    if all(tech == Tech.GFL for tech in techs):
        techs[int(rng.integers(0, n_gen))] = Tech.SG
    return techs


def equilibrium_output(case: NetworkCase) -> Dict[int, float]:
    """
    Active output (p.u.) of every generator at the case's power-flow equilibrium.

    The slack generator covers losses and load changes, so its stored dispatch
    is stale once loads move. Falls back to the stored dispatch when the power
    flow does not converge; the scenario then fails downstream anyway.
    """
    try:
        solution = solve_power_flow(case, build_admittance(case))
    except SingularJacobianError:
        solution = None
    if solution is None or not solution.converged:
        logger.debug(f"Power flow failed on {case.name}; ratings follow the stored dispatch")
        return {gen.id: gen.dispatch_P for gen in case.generators}
    return {gid: S.real for gid, S in generator_injections(case, solution).items()}


def sample_scenario(cfg: SweepConfig, scenario_id: int) -> ScenarioDraw:
    """
    Deterministic scenario for (cfg.seed, scenario_id).

    Per generator: H and D uniform over their ranges on the machine's own
    rating, rating a uniform multiple of its equilibrium output, technology per
    the tech-mix policy. Loads scale by one global factor or one factor per
    load; non-slack dispatch follows.
    """
    base = cfg.case
    rng = scenario_rng(cfg.seed, scenario_id)
    n_gen, n_load = len(base.generators), len(base.loads)

    H = rng.uniform(*cfg.inertia_range, size=n_gen)
    D = rng.uniform(*cfg.damping_range, size=n_gen)
    if cfg.load_mode == 'global':
        factors = [float(rng.uniform(*cfg.load_scale_range))] * n_load
    else:
        factors = rng.uniform(*cfg.load_scale_range, size=n_load).tolist()
    rating_factors = rng.uniform(*cfg.rating_factor_range, size=n_gen)
    techs = _assign_techs(rng, n_gen, cfg.tech_mix)

    case = scale_loads(base, factors) if n_load else base
    output = equilibrium_output(case)
    generators = []
    for k, gen in enumerate(case.generators):
        rating = float(rating_factors[k] * max(output[gen.id] * case.base_mva, MIN_RATING_MVA))
        if techs[k] == Tech.GFL:
            gen = replace(gen, tech=Tech.GFL, inertia_M=0.0, damping_D=0.0, rating_S=rating)
        else:
            gen = replace(gen, tech=techs[k],
                          inertia_M=inertia_h_to_m(float(H[k]), case.base_freq, rating, case.base_mva),
                          damping_D=damping_to_system(float(D[k]), rating, case.base_mva),
                          rating_S=rating)
        generators.append(gen)

    load_scale = float(np.mean(factors)) if factors else 1.0
    return ScenarioDraw(scenario_id=scenario_id, case=replace(case, generators=tuple(generators)),
                        load_scale=load_scale)


def aggregate(gens: Sequence[GeneratorSpec], base_freq: float = 60.0,
              base_mva: float = 100.0) -> Tuple[float, float]:
    """
    Capacity-weighted inertia and damping, both on machine ratings:
        H_agg = sum(H_i S_i) / sum(S_i),  D_agg = sum(D_i S_i) / sum(S_i)
    """
    S = np.array([gen.rating_S for gen in gens], dtype=float)
    total = S.sum()
    if not total > 0:
        raise ZeroCapacityError("Total generator rating is zero; aggregates are undefined")
    H = np.array([inertia_m_to_h(gen.inertia_M, base_freq, gen.rating_S, base_mva) for gen in gens])
    D = np.array([damping_to_machine(gen.damping_D, gen.rating_S, base_mva) for gen in gens])
    return float(H @ S / total), float(D @ S / total)


def evaluate_scenario(cfg: SweepConfig, scenario_id: int) -> SweepRecord:
    """Sample one scenario and run it end to end; failures become record fields."""
    draw = sample_scenario(cfg, scenario_id)
    case = draw.case
    H_agg, D_agg = aggregate(case.generators, case.base_freq, case.base_mva)
    record = SweepRecord(
        scenario_id=scenario_id,
        H_agg=H_agg,
        D_agg=D_agg,
        load_scale=draw.load_scale,
        tech_assignment=';'.join(f"{gen.id}:{gen.tech.value}" for gen in case.generators),
    )

    issues = [issue for issue in validate_case(case).issues if issue.kind != 'dispatch']
    if issues:
        return replace(record, error='invalid: ' + '; '.join(f"{i.location}: {i.message}" for i in issues))

    try:
        study = build_study(case)
    except (PowerFlowDivergedError, SingularJacobianError) as e:
        return replace(record, error=str(e))
    record = replace(record, powerflow_converged=True)

    modal = eigen_analysis(study.model)
    record = replace(record, verdict=modal.verdict.value, max_re_lambda=modal.max_real)

    pert = default_perturbation(study.model, magnitude=cfg.magnitude, kind=cfg.perturbation_kind)
    dt = cfg.dt or suggest_time_step(study.model, DEFAULT_TIME_STEP)
    trace = simulate_response(study.model, pert, horizon=cfg.horizon, dt=dt)
    return replace(record, nadir_p=compute_metrics(trace).nadir_p)


def run_sweep(cfg: SweepConfig, max_workers: int = MAX_WORKERS, progress: bool = True) -> List[SweepRecord]:
    """Evaluate every scenario in parallel; records come back ordered by scenario_id."""
    logger.info(f"Running {cfg.n_scenarios} scenarios (seed {cfg.seed}, tech mix {cfg.tech_mix}) "
                f"with {max_workers} workers")

    def process_scenario(scenario_id):
        return evaluate_scenario(cfg, scenario_id)

    records = []
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_id = {executor.submit(process_scenario, sid): sid for sid in range(cfg.n_scenarios)}

        with tqdm(total=cfg.n_scenarios, desc="Screening scenarios", unit="scenario",
                  disable=not progress) as pbar:
            for future in as_completed(future_to_id):
                scenario_id = future_to_id[future]
                try:
                    records.append(future.result())
                except GridSyncError as e:
                    logger.warning(f"Scenario {scenario_id} failed: {e}")
                    records.append(SweepRecord(scenario_id=scenario_id, error=str(e)))
                except Exception as e:
                    logger.error(f"Unexpected error in scenario {scenario_id}: {e}")
                    records.append(SweepRecord(scenario_id=scenario_id, error=f"{type(e).__name__}: {e}"))
                finally:
                    pbar.update(1)

    records.sort(key=lambda r: r.scenario_id)
    summary = summarize(records)
    logger.info(f"Sweep done: {summary['converged']}/{summary['total']} converged, "
                f"{summary['stable']} stable, {summary['marginal']} marginal, "
                f"{summary['unstable']} unstable, {summary['errors']} with errors")
    return records


def summarize(records: Sequence[SweepRecord]) -> Dict:
    return {
        'total': len(records),
        'converged': sum(1 for r in records if r.powerflow_converged),
        'stable': sum(1 for r in records if r.verdict == 'stable'),
        'marginal': sum(1 for r in records if r.verdict == 'marginal'),
        'unstable': sum(1 for r in records if r.verdict == 'unstable'),
        'errors': sum(1 for r in records if r.error),
    }


# ============================================================================
# HEATMAP DATA
# ============================================================================

def _with_nadir(records: Sequence[SweepRecord]) -> List[SweepRecord]:
    return [r for r in records if r.powerflow_converged and r.nadir_p is not None]


def emit_heatmap(records: Sequence[SweepRecord]) -> List[Dict]:
    """(D_agg, H_agg, nadir, verdict) rows with under-frequency threshold flags."""
    return [
        {
            'D_agg': r.D_agg,
            'H_agg': r.H_agg,
            'nadir_p': r.nadir_p,
            'verdict': r.verdict,
            'below_59p5_hz': r.nadir_p < NADIR_THRESHOLD_60HZ,
            'below_48p5_hz': r.nadir_p < NADIR_THRESHOLD_50HZ,
        }
        for r in _with_nadir(records)
    ]


@dataclass(frozen=True, eq=False)
class HeatmapGrid:
    """Mean nadir per (D_agg, H_agg) bin; NaN where a bin is empty."""
    d_edges: np.ndarray
    h_edges: np.ndarray
    mean_nadir: np.ndarray
    counts: np.ndarray

    def rows(self) -> List[Dict]:
        rows = []
        for i in range(len(self.d_edges) - 1):
            for j in range(len(self.h_edges) - 1):
                count = int(self.counts[i, j])
                rows.append({
                    'D_lo': float(self.d_edges[i]), 'D_hi': float(self.d_edges[i + 1]),
                    'H_lo': float(self.h_edges[j]), 'H_hi': float(self.h_edges[j + 1]),
                    'count': count,
                    'mean_nadir': float(self.mean_nadir[i, j]) if count else None,
                })
        return rows


def bin_heatmap(records: Sequence[SweepRecord], bins: int = HEATMAP_BINS) -> HeatmapGrid:
    usable = _with_nadir(records)
    if not usable:
        raise ValueError("No converged records with a nadir to bin")
    D = np.array([r.D_agg for r in usable])
    H = np.array([r.H_agg for r in usable])
    nadir = np.array([r.nadir_p for r in usable])
    counts, d_edges, h_edges = np.histogram2d(D, H, bins=bins)
    sums, _, _ = np.histogram2d(D, H, bins=[d_edges, h_edges], weights=nadir)
    with np.errstate(invalid='ignore', divide='ignore'):
        mean = np.where(counts > 0, sums / counts, np.nan)
    return HeatmapGrid(d_edges=d_edges, h_edges=h_edges, mean_nadir=mean, counts=counts)


def spearman_trend(records: Sequence[SweepRecord]) -> Dict:
    """Rank correlation of nadir with aggregate damping and with aggregate inertia."""
    usable = _with_nadir(records)
    result = {'n': len(usable), 'rho_damping': math.nan, 'p_damping': math.nan,
              'rho_inertia': math.nan, 'p_inertia': math.nan}
    if len(usable) < 3:
        return result
    nadir = [r.nadir_p for r in usable]
    rho_d, p_d = stats.spearmanr([r.D_agg for r in usable], nadir)
    rho_h, p_h = stats.spearmanr([r.H_agg for r in usable], nadir)
    result.update(rho_damping=float(rho_d), p_damping=float(p_d),
                  rho_inertia=float(rho_h), p_inertia=float(p_h))
    return result


def quadrant_means(records: Sequence[SweepRecord]) -> Dict[str, Optional[float]]:
    """Mean nadir in the four quadrants split at the median D_agg and H_agg."""
    usable = _with_nadir(records)
    if not usable:
        return {}
    d_mid = float(np.median([r.D_agg for r in usable]))
    h_mid = float(np.median([r.H_agg for r in usable]))
    buckets: Dict[str, List[float]] = {}
    for r in usable:
        key = f"{'high' if r.H_agg > h_mid else 'low'}_H_{'high' if r.D_agg > d_mid else 'low'}_D"
        buckets.setdefault(key, []).append(r.nadir_p)
    return {key: float(np.mean(values)) for key, values in sorted(buckets.items())}
