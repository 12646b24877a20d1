#!/usr/bin/env python3
"""
Generate an Excel workbook for a screening sweep
Sheets: Summary, Records (one row per scenario), Heatmap (mean nadir per
D_agg x H_agg bin)
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import openpyxl
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter

from src.analysis.sweep import RECORD_FIELDS, HeatmapGrid, SweepRecord
from src.utils.config import FLOAT_DIGITS

logger = logging.getLogger(__name__)

HEADER_FILL = PatternFill(start_color='4F81BD', end_color='4F81BD', fill_type='solid')
HEADER_FONT = Font(bold=True, color='FFFFFF')
UNSTABLE_FILL = PatternFill(start_color='F2DCDB', end_color='F2DCDB', fill_type='solid')


def _cell(value):
    """Cell value: floats rounded to FLOAT_DIGITS significant digits, NaN left blank."""
    if isinstance(value, float):
        if math.isnan(value):
            return None
        return float(f"{value:.{FLOAT_DIGITS}g}")
    return value


def _style_header(ws, headers: Sequence[str], widths: Optional[Dict[str, int]] = None):
    ws.append(list(headers))
    for col_num in range(1, len(headers) + 1):
        cell = ws.cell(row=1, column=col_num)
        cell.fill = HEADER_FILL
        cell.font = HEADER_FONT
        cell.alignment = Alignment(horizontal='center', vertical='center')
    for col_num, header in enumerate(headers, 1):
        width = (widths or {}).get(header, max(12, len(header) + 2))
        ws.column_dimensions[get_column_letter(col_num)].width = width
    # Freeze header row
    ws.freeze_panes = 'A2'


def create_sweep_workbook(records: Sequence[SweepRecord], summary: Dict,
                          grid: Optional[HeatmapGrid] = None, trend: Optional[Dict] = None):
    """Build (but do not save) the workbook."""
    wb = openpyxl.Workbook()
    wb.remove(wb.active)  # Remove default sheet

    ws = wb.create_sheet(title='Summary')
    _style_header(ws, ['Metric', 'Value'], {'Metric': 30, 'Value': 20})
    for key, value in list(summary.items()) + list((trend or {}).items()):
        ws.append([key, _cell(value)])

    ws = wb.create_sheet(title='Records')
    _style_header(ws, RECORD_FIELDS, {'tech_assignment': 40, 'error': 60})
    for record in records:
        row = record.to_row()
        ws.append([_cell(row[key]) for key in RECORD_FIELDS])
        if record.verdict == 'unstable':
            for cell in ws[ws.max_row]:
                cell.fill = UNSTABLE_FILL

    if grid is not None:
        ws = wb.create_sheet(title='Heatmap')
        h_labels = [f"H {grid.h_edges[j]:.3g}-{grid.h_edges[j + 1]:.3g}" for j in range(len(grid.h_edges) - 1)]
        _style_header(ws, ['D_agg bin'] + h_labels, {'D_agg bin': 22})
        for i in range(len(grid.d_edges) - 1):
            label = f"D {grid.d_edges[i]:.3g}-{grid.d_edges[i + 1]:.3g}"
            values = [_cell(float(v)) if grid.counts[i, j] else None
                      for j, v in enumerate(grid.mean_nadir[i])]
            ws.append([label] + values)

    return wb


def save_sweep_workbook(records, summary, output_file, grid=None, trend=None) -> Path:
    output_file = Path(output_file)
    output_file.parent.mkdir(parents=True, exist_ok=True)
    wb = create_sweep_workbook(records, summary, grid, trend)
    wb.save(str(output_file))
    logger.info(f"Excel workbook written: {output_file} ({len(wb.worksheets)} sheets)")
    return output_file
