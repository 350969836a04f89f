"""
Static SVG line plots of error and trajectory CSVs.

Output is deterministic: fixed hash salt, no date metadata, Agg backend.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from tau_depth.core import NS_PER_S  # noqa: E402
from tau_depth.dataset import atomic_write  # noqa: E402
from tau_depth.errors import InputError  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRAJECTORY_COLUMNS = ["x", "y", "z"]
HASH_SALT = "tau-depth"
FIGSIZE = (8.0, 4.5)


@dataclass(frozen=True, eq=False)
class Series:
    """One named column of a CSV against time."""
    label: str
    t_s: np.ndarray
    values: np.ndarray


def read_series_csv(path: PathLike) -> List[Series]:
    """
    Read every column after ``t_ns`` as a series.

    Raises:
        InputError: on a missing file, a missing ``t_ns`` column, non-numeric
            cells or a file without data rows
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"plot input not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0].strip() != "t_ns" or len(header) < 2:
            raise InputError(f"{path.name}: expected a header 't_ns,<column>[,...]'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise InputError(f"{path.name}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise InputError(f"{path.name}:{lineno}: non-numeric cell in {row}") from None
    if not rows:
        raise InputError(f"{path.name}: empty series")
    data = np.array(rows)
    t_s = (data[:, 0] - data[0, 0]) / NS_PER_S
    names = [h.strip() for h in header[1:]]
    return [Series(f"{path.stem}:{name}", t_s, data[:, k + 1]) for k, name in enumerate(names)]


def _is_trajectory(series: Sequence[Series]) -> bool:
    return [s.label.rsplit(":", 1)[1] for s in series] == TRAJECTORY_COLUMNS


def _save_svg(fig, out_path: Path) -> Path:
    with atomic_write(out_path, "wb") as f:
        fig.savefig(f, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def plot_csvs(out_path: PathLike, csv_paths: Sequence[PathLike],
              title: Optional[str] = None) -> Path:
    """
    Plot one or more CSVs into a single SVG.

    Trajectory files (``t_ns,x,y,z``) get one panel per coordinate with one
    line per file; any other file is drawn as lines on a shared error axis.
    Mixing the two kinds is an input error.

    Raises:
        InputError: on malformed or empty inputs
    """
    if not csv_paths:
        raise InputError("no CSV files to plot")
    groups = [read_series_csv(p) for p in csv_paths]
    kinds = {_is_trajectory(g) for g in groups}
    if len(kinds) > 1:
        raise InputError("cannot mix trajectory and error CSVs in one plot")

    with plt.rc_context({"svg.hashsalt": HASH_SALT, "svg.fonttype": "path"}):
        if kinds.pop():
            fig, axes = plt.subplots(3, 1, sharex=True, figsize=(FIGSIZE[0], FIGSIZE[1] * 1.5))
            for k, (ax, coord) in enumerate(zip(axes, TRAJECTORY_COLUMNS)):
                for group in groups:
                    s = group[k]
                    ax.plot(s.t_s, s.values, linewidth=1.0, label=s.label.rsplit(":", 1)[0])
                ax.set_ylabel(f"{coord} [m]")
                ax.grid(True, linewidth=0.3)
            axes[0].legend(loc="best")
            axes[-1].set_xlabel("time [s]")
        else:
            fig, ax = plt.subplots(figsize=FIGSIZE)
            for group in groups:
                for s in group:
                    ax.plot(s.t_s, s.values, linewidth=1.0, label=s.label)
            ax.set_xlabel("time [s]")
            ax.set_ylabel("l2 error [m]")
            ax.grid(True, linewidth=0.3)
            ax.legend(loc="best")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        path = _save_svg(fig, Path(out_path))

    logger.info("wrote plot %s", path)
    return path
