#!/usr/bin/env python3
"""
CSV Writer Module
Reusable functions for writing GridSync tables (sweep records, heatmap data,
eigenvalue loci, traces, power-flow solutions, state matrices) to CSV
"""

import csv
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from src.analysis.sweep import HEATMAP_FIELDS, RECORD_FIELDS
from src.utils.config import FLOAT_DIGITS


def format_value(value):
    """Floats to FLOAT_DIGITS significant digits, None/NaN to empty, bools lower-case."""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ''
        return f"{float(value):.{FLOAT_DIGITS}g}"
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def write_rows(rows: Iterable[Dict], output_file, fieldnames: Optional[Sequence[str]] = None) -> Path:
    """
    Write dict rows to CSV.

    Args:
        rows: row dictionaries
        output_file: destination path (parent directories are created)
        fieldnames: column order; defaults to the keys of the first row

    Returns:
        Path of the written file
    """
    rows = list(rows)
    output_file = Path(output_file)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []

    with open(output_file, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction='ignore')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_value(row.get(key)) for key in fieldnames})

    return output_file


def write_records_csv(records, output_file) -> Path:
    return write_rows((r.to_row() for r in records), output_file, RECORD_FIELDS)


def write_heatmap_csv(rows: List[Dict], output_file) -> Path:
    return write_rows(rows, output_file, HEATMAP_FIELDS)


def write_matrix_csv(matrix: np.ndarray, labels: Sequence[str], output_file) -> Path:
    """Square real matrix with a label column and a label header."""
    rows = []
    for label, values in zip(labels, matrix):
        row = {'state': label}
        row.update({col: float(v) for col, v in zip(labels, values)})
        rows.append(row)
    return write_rows(rows, output_file, ['state'] + list(labels))
