"""
Dataset directory layout: reading and writing sensor streams, frames,
ground truth and the simulator's oracle files.

Layout::

    <dataset>/
      intrinsics.txt        fx fy cx cy width height
      gyro.csv              t_ns,gx,gy,gz,ax,ay,az
      accel.csv             t_ns,gx,gy,gz,ax,ay,az
      frames.csv            t_ns,filename
      frames/NNNNNN.pgm
      groundtruth.csv       t_ns,x,y,z
      scenario.json         (simulated only)
      oracle_foc.csv        t_ns,fx,fy,fz
      oracle_warp.csv       t_ns,w1,w2,w3,w4,w5,w6
      oracle_point.csv      t_ns,x,y

Every file is written to a temporary sibling and renamed into place.
"""

import csv
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

from tau_depth.core import (
    NS_PER_S,
    CameraIntrinsics,
    FocStream,
    SampleStream,
    Timestamp,
    Trajectory,
    TrajectoryFrame,
)
from tau_depth.errors import DatasetError, InputError
from tau_depth.tracking.flow import AffineWarp

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

INTRINSICS_FILE = "intrinsics.txt"
GYRO_FILE = "gyro.csv"
ACCEL_FILE = "accel.csv"
FRAMES_INDEX = "frames.csv"
FRAMES_DIR = "frames"
GROUNDTRUTH_FILE = "groundtruth.csv"
SCENARIO_FILE = "scenario.json"
ORACLE_FOC_FILE = "oracle_foc.csv"
ORACLE_WARP_FILE = "oracle_warp.csv"
ORACLE_POINT_FILE = "oracle_point.csv"

IMU_HEADER = ["t_ns", "gx", "gy", "gz", "ax", "ay", "az"]
IMU_COLUMNS = {"gyro": ["gx", "gy", "gz"], "accel": ["ax", "ay", "az"]}
TRAJECTORY_HEADER = ["t_ns", "x", "y", "z"]
FOC_HEADER = ["t_ns", "fx", "fy", "fz"]
WARP_HEADER = ["t_ns", "w1", "w2", "w3", "w4", "w5", "w6"]
POINT_HEADER = ["t_ns", "x", "y"]


class DatasetKind(Enum):
    """What a dataset directory holds."""
    SIMULATED = "simulated"    # sensor files plus oracle files
    RECORDED = "recorded"      # sensor files only
    UNKNOWN = "unknown"        # required sensor files missing


REQUIRED_FILES = (INTRINSICS_FILE, GYRO_FILE, ACCEL_FILE, FRAMES_INDEX)
ORACLE_FILES = (ORACLE_FOC_FILE, ORACLE_POINT_FILE)


def detect_dataset_kind(root: PathLike) -> DatasetKind:
    """Classify a dataset directory by the files present."""
    root = Path(root)
    if not root.is_dir() or not all((root / name).is_file() for name in REQUIRED_FILES):
        return DatasetKind.UNKNOWN
    if all((root / name).is_file() for name in ORACLE_FILES):
        return DatasetKind.SIMULATED
    return DatasetKind.RECORDED


# ---------------------------------------------------------------------------
# atomic writes and number formatting
# ---------------------------------------------------------------------------

@contextmanager
def atomic_write(path: PathLike, mode: str = "w") -> Iterator[Any]:
    """
    Open a temporary sibling of ``path`` for writing; rename it over ``path`` on success.

    The temporary file is removed if the body raises.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        if "b" in mode:
            handle = os.fdopen(fd, mode)
        else:
            handle = os.fdopen(fd, mode, newline="", encoding="utf-8")
        with handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(value: float) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(value))


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_rows(path: PathLike, header: Sequence[str], rows) -> Path:
    """Write a CSV with ``header`` and already-ordered ``rows``."""
    path = Path(path)
    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def write_table(path: PathLike, header: Sequence[str], t_ns: np.ndarray,
                values: np.ndarray) -> Path:
    """Write ``t_ns`` followed by the columns of ``values``."""
    values = np.asarray(values, dtype=np.float64).reshape(len(t_ns), -1)
    rows = ([int(t)] + [format_float(v) for v in row] for t, row in zip(t_ns, values))
    return write_rows(path, header, rows)


# ---------------------------------------------------------------------------
# reading
# ---------------------------------------------------------------------------

def _require(path: Path) -> Path:
    if not path.is_file():
        raise DatasetError(f"missing dataset file: {path}")
    return path


def read_table(path: PathLike, columns: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read ``t_ns`` and the named float ``columns`` from a CSV with a header row.

    Extra columns are ignored.

    Raises:
        DatasetError: if the file or a column is missing, or a cell is malformed
    """
    path = _require(Path(path))
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in ["t_ns", *columns] if c not in header]
        if missing:
            raise DatasetError(f"{path.name}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        t_ns: List[int] = []
        values: List[List[float]] = []
        for lineno, row in enumerate(reader, start=2):
            try:
                t_ns.append(int(row["t_ns"]))
                values.append([float(row[c]) for c in columns])
            except (TypeError, ValueError):
                raise DatasetError(f"{path.name}:{lineno}: malformed row {row}") from None
    return (np.array(t_ns, dtype=np.int64),
            np.array(values, dtype=np.float64).reshape(len(t_ns), len(columns)))


def read_intrinsics(path: PathLike) -> CameraIntrinsics:
    """Parse ``fx fy cx cy width height`` from one line of text."""
    path = _require(Path(path))
    fields = path.read_text(encoding="utf-8").split()
    if len(fields) != 6:
        raise DatasetError(f"{path.name}: expected 'fx fy cx cy width height', got {len(fields)} fields")
    try:
        fx, fy, cx, cy = (float(v) for v in fields[:4])
        width, height = int(fields[4]), int(fields[5])
        return CameraIntrinsics(fx, fy, cx, cy, width, height)
    except ValueError as err:
        raise DatasetError(f"{path.name}: {err}") from err


def write_intrinsics(path: PathLike, intrinsics: CameraIntrinsics) -> Path:
    path = Path(path)
    text = " ".join([format_float(intrinsics.fx), format_float(intrinsics.fy),
                     format_float(intrinsics.cx), format_float(intrinsics.cy),
                     str(intrinsics.width), str(intrinsics.height)])
    with atomic_write(path) as f:
        f.write(text + "\n")
    return path


def read_imu(path: PathLike, which: str) -> SampleStream:
    """
    Read the gyro or accel columns of an IMU CSV.

    Accepts the full ``t_ns,gx,gy,gz,ax,ay,az`` header or the reduced one
    holding only the requested channel.
    """
    if which not in IMU_COLUMNS:
        raise InputError(f"unknown IMU channel {which!r}")
    t_ns, values = read_table(path, IMU_COLUMNS[which])
    try:
        return SampleStream(t_ns, values, which)
    except InputError as err:
        raise DatasetError(f"{Path(path).name}: {err}") from err


def write_imu(path: PathLike, stream: SampleStream, which: str) -> Path:
    """Write one IMU channel with the full header; the other channel's cells stay empty."""
    if which not in IMU_COLUMNS:
        raise InputError(f"unknown IMU channel {which!r}")
    blank = ["", "", ""]

    def rows():
        for t, v in zip(stream.t_ns, stream.values):
            cells = [format_float(x) for x in v]
            yield [int(t)] + (cells + blank if which == "gyro" else blank + cells)

    return write_rows(path, IMU_HEADER, rows())


def read_trajectory(path: PathLike,
                    frame: TrajectoryFrame = TrajectoryFrame.ESTIMATE) -> Trajectory:
    """Read a ``t_ns,x,y,z`` trajectory file."""
    path = Path(path)
    t_ns, pos = read_table(path, TRAJECTORY_HEADER[1:])
    try:
        return Trajectory(t_ns, pos, frame, path.stem)
    except InputError as err:
        raise DatasetError(f"{path.name}: {err}") from err


def write_trajectory(path: PathLike, trajectory: Trajectory) -> Path:
    return write_table(path, TRAJECTORY_HEADER, trajectory.t_ns, trajectory.positions)


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------

def frame_filename(index: int) -> str:
    return f"{index:06d}.pgm"


def read_frame(path: PathLike) -> np.ndarray:
    """Read an 8-bit grayscale frame."""
    path = _require(Path(path))
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise DatasetError(f"cannot decode image {path}")
    return img


def write_frame(path: PathLike, image: np.ndarray) -> Path:
    """Encode ``image`` as binary PGM and write it atomically."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 2:
        raise InputError(f"frames must be 2-D uint8, got {image.dtype} {image.shape}")
    ok, buf = cv2.imencode(".pgm", image)
    if not ok:
        raise DatasetError(f"cannot encode frame {path}")
    with atomic_write(path, "wb") as f:
        f.write(buf.tobytes())
    return Path(path)


class FrameSequence:
    """
    Frames listed in ``frames.csv``, decoded lazily on iteration.

    Iterating yields ``(t_ns, image)`` pairs in timestamp order.
    """

    def __init__(self, root: PathLike):
        self.root = Path(root)
        index = _require(self.root / FRAMES_INDEX)
        t_ns: List[int] = []
        names: List[str] = []
        with open(index, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if not reader.fieldnames or {"t_ns", "filename"} - set(reader.fieldnames):
                raise DatasetError(f"{FRAMES_INDEX}: expected header 't_ns,filename'")
            for lineno, row in enumerate(reader, start=2):
                try:
                    t_ns.append(int(row["t_ns"]))
                except (TypeError, ValueError):
                    raise DatasetError(f"{FRAMES_INDEX}:{lineno}: bad timestamp {row['t_ns']!r}") from None
                names.append(row["filename"])
        self.t_ns = np.array(t_ns, dtype=np.int64)
        if np.any(np.diff(self.t_ns) <= 0):
            raise DatasetError(f"{FRAMES_INDEX}: timestamps must be strictly increasing")
        self.filenames = names

    def __len__(self) -> int:
        return len(self.filenames)

    def __iter__(self) -> Iterator[Tuple[Timestamp, np.ndarray]]:
        for t, name in zip(self.t_ns, self.filenames):
            yield int(t), read_frame(self.path(name))

    def path(self, name: str) -> Path:
        return self.root / FRAMES_DIR / name

    def missing(self) -> List[str]:
        """Listed frames whose files do not exist."""
        return [name for name in self.filenames if not self.path(name).is_file()]

    @property
    def frame_rate(self) -> float:
        """Median frame rate (Hz)."""
        if len(self) < 2:
            raise DatasetError("need at least two frames to determine the frame rate")
        return float(NS_PER_S / np.median(np.diff(self.t_ns)))


def write_frames(root: PathLike, frames: Sequence[Tuple[Timestamp, np.ndarray]]) -> Path:
    """Write ``frames/NNNNNN.pgm`` and the ``frames.csv`` index."""
    root = Path(root)
    (root / FRAMES_DIR).mkdir(parents=True, exist_ok=True)
    rows = []
    for k, (t, img) in enumerate(frames):
        name = frame_filename(k)
        write_frame(root / FRAMES_DIR / name, img)
        rows.append([int(t), name])
    return write_rows(root / FRAMES_INDEX, ["t_ns", "filename"], rows)


# ---------------------------------------------------------------------------
# oracle files
# ---------------------------------------------------------------------------

def read_oracle_foc(root: PathLike) -> FocStream:
    """Combine ``oracle_foc.csv`` and ``oracle_point.csv`` into a FocStream."""
    root = Path(root)
    t_foc, F = read_table(root / ORACLE_FOC_FILE, FOC_HEADER[1:])
    t_pt, points = read_table(root / ORACLE_POINT_FILE, POINT_HEADER[1:])
    if not np.array_equal(t_foc, t_pt):
        raise DatasetError(f"{ORACLE_FOC_FILE} and {ORACLE_POINT_FILE} have different timestamps")
    try:
        return FocStream(t_foc, F, points)
    except InputError as err:
        raise DatasetError(f"oracle files: {err}") from err


def read_oracle_warps(root: PathLike) -> List[AffineWarp]:
    t_ns, w = read_table(Path(root) / ORACLE_WARP_FILE, WARP_HEADER[1:])
    return [AffineWarp(row, int(t)) for t, row in zip(t_ns, w)]


# ---------------------------------------------------------------------------
# whole datasets
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """A dataset directory opened for estimation."""
    root: Path
    kind: DatasetKind
    intrinsics: CameraIntrinsics
    gyro: SampleStream
    accel: SampleStream
    frames: FrameSequence

    @property
    def groundtruth_path(self) -> Path:
        return self.root / GROUNDTRUTH_FILE

    def groundtruth(self) -> Optional[Trajectory]:
        if not self.groundtruth_path.is_file():
            return None
        return read_trajectory(self.groundtruth_path, TrajectoryFrame.GROUND_TRUTH)

    def oracle_foc(self) -> FocStream:
        """
        Raises:
            DatasetError: if the dataset holds no oracle files
        """
        if self.kind is not DatasetKind.SIMULATED:
            raise DatasetError(f"{self.root} has no oracle frequency-of-contact files")
        return read_oracle_foc(self.root)

    def scenario(self) -> Optional[Dict[str, Any]]:
        path = self.root / SCENARIO_FILE
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))


def load_dataset(root: PathLike) -> Dataset:
    """
    Open a dataset directory; frames are decoded lazily.

    Raises:
        DatasetError: if the directory or a required file is missing or malformed
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    for name in REQUIRED_FILES:
        _require(root / name)
    dataset = Dataset(
        root=root,
        kind=detect_dataset_kind(root),
        intrinsics=read_intrinsics(root / INTRINSICS_FILE),
        gyro=read_imu(root / GYRO_FILE, "gyro"),
        accel=read_imu(root / ACCEL_FILE, "accel"),
        frames=FrameSequence(root),
    )
    logger.debug("opened %s dataset %s: %d frames, %d gyro, %d accel samples",
                 dataset.kind.value, root, len(dataset.frames), len(dataset.gyro),
                 len(dataset.accel))
    return dataset


def write_dataset(root: PathLike, sequence, scenario: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write a simulated sequence in the dataset layout.

    Args:
        root: Output directory (created if needed)
        sequence: SimulatedSequence
        scenario: JSON form of the generating scenario, copied to ``scenario.json``
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    oracle = sequence.oracle
    write_intrinsics(root / INTRINSICS_FILE, sequence.intrinsics)
    write_imu(root / GYRO_FILE, sequence.gyro, "gyro")
    write_imu(root / ACCEL_FILE, sequence.accel, "accel")
    write_frames(root, sequence.frames)
    write_trajectory(root / GROUNDTRUTH_FILE, oracle.trajectory)
    write_table(root / ORACLE_FOC_FILE, FOC_HEADER, oracle.t_ns, oracle.F)
    write_table(root / ORACLE_WARP_FILE, WARP_HEADER, oracle.t_ns,
                np.array([w.params for w in oracle.warps]))
    write_table(root / ORACLE_POINT_FILE, POINT_HEADER, oracle.t_ns, oracle.points)
    if scenario is not None:
        with atomic_write(root / SCENARIO_FILE) as f:
            f.write(json.dumps(scenario, indent=2, sort_keys=True) + "\n")
    logger.info("wrote dataset %s (%d frames)", root, len(sequence.frames))
    return root
