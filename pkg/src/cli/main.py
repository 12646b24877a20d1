#!/usr/bin/env python3
"""
GridSync Screener command-line entry point

Commands:
    validate   check a case file and list every invariant violation
    powerflow  solve the AC power flow
    reduce     fold loads/GFL units and Kron-reduce to the generator buses
    analyze    eigenvalues, mode classification and stability verdict
    simulate   small-signal frequency response and its metrics
    screen     kick every generator once and check the response dies out
    sweep      Monte Carlo screening over inertia, damping, loading and technology
    verify     run the independent verification oracles on a case

Exit codes: 0 success/stable, 2 unstable, 3 no event, 1 any other error.
stdout carries only the JSON payload (or a JSON error object); logs go to stderr.

Usage:
    python -m src.cli.main analyze --case data/cases/case9.json
    python -m src.cli.main simulate --case data/cases/case9.m --dyn data/cases/case9_dyn.json
    python -m src.cli.main screen --case data/cases/case39.m --dyn data/cases/case39_dyn.json
    python -m src.cli.main sweep --n 1000 --seed 42 --tech-mix gfl_fraction:0.3 --excel
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from services.pipeline import build_study, compare_presets
from services.report_generator import (
    dumps,
    modal_report,
    oracle_report,
    powerflow_report,
    screening_report,
    simulation_report,
    write_json,
)
from src.analysis.oracles import run_oracles
from src.analysis.sweep import (
    SweepConfig,
    bin_heatmap,
    emit_heatmap,
    quadrant_means,
    run_sweep,
    spearman_trend,
    summarize,
)
from src.cli.manifest import RunManifest
from src.core.errors import CaseParseError, GridSyncError, NoEventError, SweepConfigError
from src.core.modal import Verdict, eigen_analysis, loci_rows, sensitivity_sweep, stock_scenarios
from src.core.model import TECH_PRESETS, apply_tech_preset, load_case, validate_case
from src.core.powerflow import build_admittance, solve_power_flow
from src.core.simulate import (
    Perturbation,
    PerturbationKind,
    compute_metrics,
    default_perturbation,
    screen_generators,
    simulate_response,
    suggest_time_step,
)
from src.reports.csv_writer import write_heatmap_csv, write_matrix_csv, write_records_csv, write_rows
from src.reports.excel_report import save_sweep_workbook
from src.utils.config import (
    DAMPING_HI,
    DEFAULT_HORIZON,
    DEFAULT_LOAD_SCALE_RANGE,
    DEFAULT_PERTURBATION_KIND,
    DEFAULT_PERTURBATION_MAGNITUDE,
    DEFAULT_PERTURBATION_START,
    DEFAULT_SCENARIOS,
    DEFAULT_SEED,
    DEFAULT_TECH_MIX,
    HEATMAP_BINS,
    INERTIA_HI,
    LOG_FORMAT,
    MAX_WORKERS,
    OUTPUT_DIR,
    POWERFLOW_MAX_ITER,
    POWERFLOW_TOLERANCE,
    RANGE_LO_FRACTION,
    STOCK_CASE_9BUS,
    SWEEP_PERTURBATION_KIND,
    SWEEP_PERTURBATION_MAGNITUDE,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2
EXIT_NO_EVENT = 3


class UsageError(Exception):
    """Raised instead of argparse's own exit so bad flags map to exit code 1"""
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def setup_logging(verbose: bool = False, log_file: Optional[str] = None):
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def emit(payload):
    print(dumps(payload))


def emit_error(error: BaseException):
    payload = {'error': str(error), 'type': type(error).__name__}
    if isinstance(error, CaseParseError) and error.line is not None:
        payload['line'] = error.line
    emit(payload)


def parse_range(text: str, name: str) -> Tuple[float, float]:
    """'lo:hi' -> (lo, hi) with 0 <= lo <= hi."""
    try:
        lo, hi = (float(part) for part in text.split(':'))
    except ValueError:
        raise SweepConfigError(f"--{name} expects lo:hi, got '{text}'")
    if not 0 <= lo <= hi:
        raise SweepConfigError(f"--{name} needs 0 <= lo <= hi, got {text}")
    return lo, hi


# ============================================================================
# COMMON HELPERS
# ============================================================================

def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args, strict: bool = True):
    case = load_case(args.case, dyn=args.dyn, strict=strict)
    if getattr(args, 'preset', None):
        case = apply_tech_preset(case, args.preset)
    return case


def _manifest(args) -> RunManifest:
    manifest = RunManifest.start(args.argv, seed=args.seed)
    manifest.add_input(args.case)
    manifest.add_input(args.dyn)
    return manifest


def _write_table(rows, out_dir: Path, stem: str, fmt: str, fieldnames=None) -> Path:
    if fmt == 'json':
        return write_json(rows, out_dir / f"{stem}.json")
    return write_rows(rows, out_dir / f"{stem}.csv", fieldnames)


def _study(args):
    return build_study(_load(args), reference=args.reference, tol=args.tol, max_iter=args.max_iter)


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_validate(args) -> int:
    case = _load(args, strict=False)
    report = validate_case(case)
    emit({'case': str(args.case), **report.to_dict()})
    return EXIT_OK if report.is_empty else EXIT_ERROR


def cmd_powerflow(args) -> int:
    case = _load(args)
    Y = build_admittance(case)
    solution = solve_power_flow(case, Y, tol=args.tol, max_iter=args.max_iter)

    out = _out_dir(args)
    manifest = _manifest(args)
    manifest.add_output(_write_table(solution.rows(), out, 'powerflow', args.format,
                                     ['bus', 'vm', 'va', 'P', 'Q']))
    manifest.finish(out)

    emit(powerflow_report(solution))
    return EXIT_OK if solution.converged else EXIT_ERROR


def cmd_reduce(args) -> int:
    study = _study(args)
    out = _out_dir(args)
    manifest = _manifest(args)
    manifest.add_output(write_json(study.reduced.to_dict(), out / 'reduced.json'))
    manifest.finish(out)

    emit(study.reduced.to_dict())
    return EXIT_OK


def cmd_analyze(args) -> int:
    study = _study(args)
    modal = eigen_analysis(study.model)
    runs = sensitivity_sweep(study.model, stock_scenarios(), max_workers=args.workers) if args.scenarios else None
    report = modal_report(study, modal, runs)

    out = _out_dir(args)
    manifest = _manifest(args)
    manifest.add_output(write_json(report, out / 'analyze.json'))
    manifest.add_output(write_json(study.model.to_dict(), out / 'state_matrix.json'))
    manifest.add_output(write_matrix_csv(study.model.A, study.model.state_labels, out / 'state_matrix.csv'))
    if runs is not None:
        manifest.add_output(_write_table(
            loci_rows(runs), out, 'loci', args.format,
            ['scenario', 'scenario_name', 'eig_index', 'real', 'imag', 'class', 'zeta', 'omega_n'],
        ))
    manifest.finish(out)

    emit(report)
    if modal.verdict == Verdict.UNSTABLE:
        return EXIT_UNSTABLE
    if modal.verdict == Verdict.MARGINAL:
        logger.warning("Marginally stable: an eigenvalue lies on the imaginary axis within tolerance")
    return EXIT_OK


def cmd_simulate(args) -> int:
    study = _study(args)
    model = study.model
    modal = eigen_analysis(model)
    if modal.verdict == Verdict.UNSTABLE and not args.allow_unstable:
        emit({'error': 'Model is unstable (use --allow-unstable to simulate anyway)',
              'type': 'UnstableModel', 'max_real': modal.max_real})
        return EXIT_UNSTABLE

    if args.target is None:
        pert = default_perturbation(model, magnitude=args.magnitude, start_time=args.start, kind=args.kind)
    else:
        pert = Perturbation(args.kind, args.target, args.magnitude, args.start)
    dt = args.dt or suggest_time_step(model)
    trace = simulate_response(model, pert, horizon=args.horizon, dt=dt)

    out = _out_dir(args)
    manifest = _manifest(args)
    manifest.add_output(_write_table(trace.rows(), out, 'trace', args.format))

    if args.compare:
        rows = compare_presets(_load(args), args.compare.split(','), perturbation=pert,
                               horizon=args.horizon, dt=args.dt)
        manifest.add_output(_write_table(rows, out, 'presets', args.format,
                                         ['preset', 'verdict', 'max_re_lambda', 'nadir_p', 't_r',
                                          't_p', 't_s', 'dt', 'error']))

    try:
        metrics = compute_metrics(trace)
    except NoEventError:
        manifest.finish(out)
        raise

    report = simulation_report(model, pert, metrics, args.horizon, dt)
    manifest.add_output(write_json(report, out / 'metrics.json'))
    manifest.finish(out)
    emit(report)
    return EXIT_OK


def cmd_screen(args) -> int:
    study = _study(args)
    results = screen_generators(study.model, magnitude=args.magnitude, horizon=args.horizon, dt=args.dt)
    report = screening_report(study.model, results, args.magnitude, args.horizon)

    out = _out_dir(args)
    manifest = _manifest(args)
    manifest.add_output(_write_table(report['generators'], out, 'screening', args.format,
                                     ['gen_id', 'bounded', 'decayed', 'passed', 'max_abs_speed', 'final_abs_speed']))
    manifest.finish(out)

    emit(report)
    return EXIT_OK if report['all_passed'] else EXIT_UNSTABLE


def cmd_sweep(args) -> int:
    cfg = SweepConfig(
        case=_load(args),
        n_scenarios=args.n,
        seed=args.seed,
        inertia_range=parse_range(args.h_range, 'h-range'),
        damping_range=parse_range(args.d_range, 'd-range'),
        load_scale_range=parse_range(args.load_range, 'load-range'),
        tech_mix=args.tech_mix,
        load_mode=args.load_mode,
        perturbation_kind=args.event_kind,
        magnitude=args.event_magnitude,
        horizon=args.horizon,
        dt=args.dt,
    )
    records = run_sweep(cfg, max_workers=args.workers, progress=not args.quiet)
    heatmap = emit_heatmap(records)
    summary = summarize(records)
    trend = spearman_trend(records)

    out = _out_dir(args)
    manifest = _manifest(args)
    manifest.add_output(write_records_csv(records, args.out or out / 'records.csv'))
    manifest.add_output(write_heatmap_csv(heatmap, out / 'heatmap.csv'))
    grid = bin_heatmap(records, args.bins) if heatmap else None
    if grid is not None:
        manifest.add_output(write_rows(grid.rows(), out / 'heatmap_grid.csv',
                                       ['D_lo', 'D_hi', 'H_lo', 'H_hi', 'count', 'mean_nadir']))
    if args.excel:
        manifest.add_output(save_sweep_workbook(records, summary, out / 'sweep.xlsx', grid, trend))
    manifest.finish(out)

    emit({'summary': summary, 'trend': trend, 'quadrants': quadrant_means(records)})
    return EXIT_OK


def cmd_verify(args) -> int:
    study = _study(args)
    reports = run_oracles(study)
    payload = oracle_report(reports)

    out = _out_dir(args)
    manifest = _manifest(args)
    manifest.add_output(write_json(payload, out / 'verify.json'))
    manifest.finish(out)

    emit(payload)
    return EXIT_OK if payload['all_passed'] else EXIT_ERROR


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument('--case', default=str(STOCK_CASE_9BUS), help='Case file (.json or MATPOWER .m)')
    common.add_argument('--dyn', help='Dynamic-data sidecar for MATPOWER cases')
    common.add_argument('--out-dir', default=str(OUTPUT_DIR), help='Directory for output files')
    common.add_argument('--seed', type=int, default=DEFAULT_SEED, help='Random seed (sweep)')
    common.add_argument('--format', choices=['json', 'csv'], default='csv', help='Format of table outputs')
    common.add_argument('--preset', choices=sorted(TECH_PRESETS), help='Apply a technology preset first')
    common.add_argument('--reference', type=int, help='Reference generator id (default: slack generator)')
    common.add_argument('--tol', type=float, default=POWERFLOW_TOLERANCE, help='Power-flow tolerance (p.u.)')
    common.add_argument('--max-iter', type=int, default=POWERFLOW_MAX_ITER, help='Power-flow iteration cap')
    common.add_argument('--workers', type=int, default=MAX_WORKERS, help='Parallel workers')
    common.add_argument('--verbose', action='store_true', help='Debug logging')
    common.add_argument('--log-file', help='Also write logs to this file')

    parser = ArgumentParser(description='GridSync Screener: small-signal synchronization stability screening')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('validate', parents=[common], help='Validate a case file')
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser('powerflow', parents=[common], help='Solve the AC power flow')
    p.set_defaults(handler=cmd_powerflow)

    p = sub.add_parser('reduce', parents=[common], help='Kron-reduce to the dynamic generator buses')
    p.set_defaults(handler=cmd_reduce)

    p = sub.add_parser('analyze', parents=[common], help='Modal analysis and stability verdict')
    p.add_argument('--scenarios', action='store_true', help='Also run the stock sensitivity scenarios')
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser('simulate', parents=[common], help='Frequency response to a small perturbation')
    p.add_argument('--kind', choices=[k.value for k in PerturbationKind], default=DEFAULT_PERTURBATION_KIND)
    p.add_argument('--target', type=int, help='Target generator id (default: largest non-reference)')
    p.add_argument('--magnitude', type=float, default=DEFAULT_PERTURBATION_MAGNITUDE,
                   help='p.u. power (power_step), rad/s (speed_impulse) or rad/s^2 (inertial_step)')
    p.add_argument('--start', type=float, default=DEFAULT_PERTURBATION_START, help='Event time (s)')
    p.add_argument('--horizon', type=float, default=DEFAULT_HORIZON, help='Simulated time (s)')
    p.add_argument('--dt', type=float, help='Time step (s); default resolves the fastest mode')
    p.add_argument('--allow-unstable', action='store_true', help='Simulate unstable models too')
    p.add_argument('--compare', help='Comma-separated technology presets to compare under the same event')
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser('screen', parents=[common], help='Speed kick at every generator in turn')
    p.add_argument('--magnitude', type=float, default=0.01, help='Speed kick (rad/s)')
    p.add_argument('--horizon', type=float, default=DEFAULT_HORIZON, help='Simulated time per kick (s)')
    p.add_argument('--dt', type=float, help='Time step (s); default resolves the fastest mode')
    p.set_defaults(handler=cmd_screen)

    p = sub.add_parser('sweep', parents=[common], help='Monte Carlo screening')
    p.add_argument('--n', type=int, default=DEFAULT_SCENARIOS, help='Number of scenarios')
    p.add_argument('--out', help='Records CSV path (default: <out-dir>/records.csv)')
    p.add_argument('--tech-mix', default=DEFAULT_TECH_MIX,
                   help='all_sg | all_gfm_vsm | all_gfm_droop | gfl_fraction:<f> | mixed')
    p.add_argument('--h-range', default=f"{RANGE_LO_FRACTION * INERTIA_HI:g}:{INERTIA_HI:g}",
                   help='Inertia constant range lo:hi (s, machine rating)')
    p.add_argument('--d-range', default=f"{RANGE_LO_FRACTION * DAMPING_HI:g}:{DAMPING_HI:g}",
                   help='Damping range lo:hi (p.u. on machine rating)')
    p.add_argument('--load-range', default=f"{DEFAULT_LOAD_SCALE_RANGE[0]:g}:{DEFAULT_LOAD_SCALE_RANGE[1]:g}",
                   help='Load scale range lo:hi')
    p.add_argument('--load-mode', choices=['global', 'per_load'], default='global')
    p.add_argument('--event-kind', choices=[k.value for k in PerturbationKind], default=SWEEP_PERTURBATION_KIND,
                   help='Frequency event applied to every scenario')
    p.add_argument('--event-magnitude', type=float, default=SWEEP_PERTURBATION_MAGNITUDE,
                   help='Event size in the units of --event-kind')
    p.add_argument('--horizon', type=float, default=DEFAULT_HORIZON, help='Simulated time per scenario (s)')
    p.add_argument('--dt', type=float, help='Time step (s); default resolves the fastest mode')
    p.add_argument('--bins', type=int, default=HEATMAP_BINS, help='Heatmap bins per axis')
    p.add_argument('--excel', action='store_true', help='Also write sweep.xlsx')
    p.add_argument('--quiet', action='store_true', help='No progress bar')
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser('verify', parents=[common], help='Run the verification oracles')
    p.set_defaults(handler=cmd_verify)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        emit_error(e)
        return EXIT_ERROR
    args.argv = argv
    setup_logging(args.verbose, args.log_file)

    try:
        return args.handler(args)
    except NoEventError as e:
        logger.error(str(e))
        emit_error(e)
        return EXIT_NO_EVENT
    except (GridSyncError, OSError, ValueError, KeyError) as e:
        logger.error(f"{args.command} failed: {e}")
        emit_error(e)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
