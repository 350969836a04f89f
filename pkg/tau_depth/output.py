"""
Output generation for estimation and evaluation runs.

Supports:
- Estimated trajectory CSV (``t_ns,x,y,z``)
- Per-window diagnostics CSV
- Per-sample l2 error CSV
- Per-sequence ATE table as CSV or Excel (XLSX)
"""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from tau_depth.dataset import atomic_write, write_rows
from tau_depth.errors import InputError
from tau_depth.evaluation import SequenceReport
from tau_depth.solver import AXES, WindowResult

try:
    import openpyxl
    from openpyxl.styles import Alignment, Font, PatternFill
    from openpyxl.utils import get_column_letter
    HAS_OPENPYXL = True
except ImportError:
    HAS_OPENPYXL = False

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_AXIS_FIELDS = ("Z0", "g", "detQ", "cond", "residual", "posed", "valid", "gated")
DIAGNOSTICS_HEADER = (["t_ns"]
                      + [f"{axis}_{name}" for axis in AXES for name in _AXIS_FIELDS]
                      + ["mode"])


def diagnostics_row(window: WindowResult, mode: Optional[str]) -> List[Any]:
    """
    One diagnostics row: per-axis solution fields, gating flag and observer mode.

    ``mode`` is empty before the observer is initialized.
    """
    row: List[Any] = [int(window.t_now)]
    for sol, gated in zip(window.solutions, window.gated):
        row.extend([sol.Z0, sol.g, sol.detQ, sol.cond, sol.residual,
                    bool(sol.posed), bool(sol.valid), bool(gated)])
    row.append(mode or "")
    return row


def write_diagnostics(path: PathLike, rows: Iterable[Sequence[Any]]) -> Path:
    return write_rows(path, DIAGNOSTICS_HEADER, rows)


def write_errors(path: PathLike, report: SequenceReport) -> Path:
    """
    Per-sample l2 error (m) of every estimate on the shared truth clock.

    Columns: ``t_ns`` followed by one column per estimate name.
    """
    if not report.pairs:
        raise InputError("report holds no aligned estimates")
    names = list(report.pairs)
    t_ns = report.pairs[names[0]].t_ns
    errors = [report.pairs[name].errors_m for name in names]
    rows = ([int(t)] + [float(e[k]) for e in errors] for k, t in enumerate(t_ns))
    return write_rows(path, ["t_ns"] + names, rows)


class TableGenerator:
    """Per-sequence table: one column per sequence, rows duration, path length and ATE."""

    def __init__(self, reports: Dict[str, SequenceReport]):
        """
        Args:
            reports: Sequence name -> SequenceReport, in column order
        """
        if not reports:
            raise InputError("no sequence reports to tabulate")
        self.reports = reports

    def rows(self) -> List[List[Any]]:
        """Table body, first cell of each row is the quantity label."""
        labels: List[str] = []
        for report in self.reports.values():
            for label, _ in report.to_rows():
                if label not in labels:
                    labels.append(label)
        body = []
        for label in labels:
            row: List[Any] = [label]
            for report in self.reports.values():
                values = dict(report.to_rows())
                row.append(values.get(label))
            body.append(row)
        return body

    @property
    def columns(self) -> List[str]:
        return ["quantity"] + list(self.reports)

    def to_csv(self, filepath: PathLike) -> Path:
        return write_rows(filepath, self.columns, self.rows())

    def to_excel(self, filepath: PathLike, include_summary: bool = True) -> Path:
        """
        Export the table to Excel format.

        Args:
            filepath: Output file path
            include_summary: Add a sheet with per-estimate error statistics

        Returns:
            The written path
        """
        if not HAS_OPENPYXL:
            raise ImportError(
                "openpyxl is required for Excel output. "
                "Install with: pip install openpyxl"
            )

        wb = openpyxl.Workbook()
        ws = wb.active
        ws.title = "ATE"

        header_style = Font(bold=True, color="FFFFFF")
        header_fill = PatternFill(start_color="4472C4", fill_type="solid")
        for col_idx, column in enumerate(self.columns, 1):
            cell = ws.cell(row=1, column=col_idx, value=column)
            cell.font = header_style
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal="center")

        body = self.rows()
        for row_idx, row in enumerate(body, 2):
            ws.cell(row=row_idx, column=1, value=row[0])
            for col_idx, value in enumerate(row[1:], 2):
                cell = ws.cell(row=row_idx, column=col_idx, value=value)
                if value is not None:
                    cell.number_format = "0.00"

        self._fit_columns(ws, len(self.columns))
        if include_summary:
            self._add_summary_sheet(wb)

        filepath = Path(filepath)
        with atomic_write(filepath, "wb") as f:
            wb.save(f)
        return filepath

    def _add_summary_sheet(self, wb) -> None:
        """Max and median l2 error per estimate and sequence."""
        summary = wb.create_sheet("Errors")
        header = ["sequence", "estimate", "samples", "median [cm]", "max [cm]"]
        for col_idx, title in enumerate(header, 1):
            summary.cell(row=1, column=col_idx, value=title).font = Font(bold=True)
        row_idx = 2
        for seq, report in self.reports.items():
            for name, pair in report.pairs.items():
                errors = pair.errors_m * 100.0
                values = [seq, name, int(errors.size),
                          float(np.median(errors)) if errors.size else None,
                          float(errors.max()) if errors.size else None]
                for col_idx, value in enumerate(values, 1):
                    cell = summary.cell(row=row_idx, column=col_idx, value=value)
                    if col_idx > 3 and value is not None:
                        cell.number_format = "0.00"
                row_idx += 1
        self._fit_columns(summary, len(header))

    @staticmethod
    def _fit_columns(ws, count: int) -> None:
        for col_idx in range(1, count + 1):
            max_width = 10
            for row in ws.iter_rows(min_col=col_idx, max_col=col_idx):
                for cell in row:
                    if cell.value is not None:
                        max_width = max(max_width, len(str(cell.value)) + 2)
            ws.column_dimensions[get_column_letter(col_idx)].width = min(max_width, 40)


def write_table(reports: Dict[str, SequenceReport], filepath: PathLike) -> Path:
    """
    Write the ATE table; ``.xlsx`` selects Excel, anything else CSV.
    """
    generator = TableGenerator(reports)
    filepath = Path(filepath)
    if filepath.suffix.lower() == ".xlsx":
        path = generator.to_excel(filepath)
    else:
        path = generator.to_csv(filepath)
    logger.info("wrote ATE table %s", path)
    return path
