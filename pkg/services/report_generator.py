"""
Report generation service: JSON payloads for power-flow, reduction, modal,
simulation, screening and verification results
"""

import json
import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.utils.config import FLOAT_DIGITS


def round_float(value: float) -> Optional[float]:
    """FLOAT_DIGITS significant digits; NaN/inf become None (JSON has no NaN)."""
    if not math.isfinite(value):
        return None
    return float(f"{value:.{FLOAT_DIGITS}g}")


def to_jsonable(obj):
    """Recursively convert numpy types, complex numbers, enums and tuples for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return [round_float(obj.real), round_float(obj.imag)]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(payload) -> str:
    return json.dumps(to_jsonable(payload), indent=2)


def write_json(payload, output_file) -> Path:
    output_file = Path(output_file)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    with open(output_file, 'w', encoding='utf-8') as f:
        f.write(dumps(payload))
        f.write('\n')
    return output_file


def powerflow_report(solution) -> Dict:
    return {
        'converged': solution.converged,
        'iterations': solution.iterations,
        'max_mismatch': solution.max_mismatch,
        'buses': solution.rows(),
    }


def modal_report(study, modal, runs: Optional[Sequence] = None) -> Dict:
    """Verdict, classified spectrum and (optionally) sensitivity scenarios for one case."""
    model = study.model
    report = {
        'case': study.case.name,
        'n_generators': model.n,
        'reference_gen': model.reference_gen,
        'generator_ids': list(model.generator_ids),
        'state_labels': list(model.state_labels),
        **modal.to_dict(),
    }
    if runs is not None:
        report['scenarios'] = [
            {
                'id': run.scenario.id,
                'name': run.scenario.name,
                'inertia_factor': run.scenario.inertia_factor,
                'damping_factor': run.scenario.damping_factor,
                'verdict': run.result.verdict.value if run.result else None,
                'max_real': run.result.max_real if run.result else None,
                'error': run.error,
            }
            for run in runs
        ]
    return report


def simulation_report(model, perturbation, metrics, horizon: float, dt: float) -> Dict:
    return {
        'perturbation': {
            'kind': perturbation.kind.value,
            'target_gen': perturbation.target_gen,
            'magnitude': perturbation.magnitude,
            'start_time': perturbation.start_time,
        },
        'horizon': horizon,
        'dt': dt,
        'base_freq': model.base_freq,
        'metrics': metrics.to_dict(),
    }


def screening_report(model, results: Sequence, magnitude: float, horizon: float) -> Dict:
    return {
        'magnitude': magnitude,
        'horizon': horizon,
        'reference_gen': model.reference_gen,
        'all_passed': all(r.passed for r in results),
        'generators': [
            {
                'gen_id': r.gen_id,
                'bounded': r.bounded,
                'decayed': r.decayed,
                'passed': r.passed,
                'max_abs_speed': r.max_abs_speed,
                'final_abs_speed': r.final_abs_speed,
            }
            for r in results
        ],
    }


def oracle_report(reports: List) -> Dict:
    applicable = [r for r in reports if r.applicable]
    return {
        'all_passed': all(r.passed for r in applicable),
        'oracles': [r.to_dict() for r in reports],
    }
