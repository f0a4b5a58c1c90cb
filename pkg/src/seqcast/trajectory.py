"""Ingestion of NGSIM-style vehicle trajectory files.

The raw input is delimiter-separated text where each row describes one
vehicle at one camera frame. Only three columns are retained: vehicle id,
frame number and speed. Frames are recorded at 10 Hz, so a contiguous run
of frames with stride ``s`` yields a velocity series sampled every
``0.1 * s`` seconds. NGSIM publishes speeds in feet per second; the default
``unit_scale`` of 0.3048 converts them to m/s.

All functions here are pure with respect to their inputs and can be called
from multiple threads.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DuplicateFrame,
    EmptyInput,
    InvalidPeriod,
    MalformedRow,
    UnknownVehicle,
)

logger = logging.getLogger(__name__)

#: NGSIM cameras record at 10 Hz.
FRAME_PERIOD_S = 0.1

#: NGSIM speeds are published in ft/s.
FEET_PER_SECOND_TO_MPS = 0.3048


@dataclass(frozen=True)
class TrajectoryRecord:
    """One parsed data row: a vehicle's speed at one frame (m/s)."""

    vehicle_id: int
    frame_id: int
    velocity: float


@dataclass(frozen=True)
class Trajectory:
    """A uniformly sampled velocity series for one vehicle.

    ``samples`` holds velocities in m/s, one every ``sample_period``
    seconds. Values must be finite and non-negative.
    """

    vehicle_id: int
    sample_period: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", arr)
        if not self.sample_period > 0:
            raise InvalidPeriod(f"sample_period must be > 0, got {self.sample_period}")
        if arr.ndim != 1 or arr.size == 0:
            raise EmptyInput("a trajectory needs at least one sample")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise MalformedRow("trajectory samples must be finite and >= 0")

    def __len__(self) -> int:
        return int(self.samples.size)

    def times(self) -> np.ndarray:
        """Sample times in seconds, starting at 0."""
        return np.arange(self.samples.size) * self.sample_period


@dataclass(frozen=True)
class IngestConfig:
    """Parsing options for raw trajectory text.

    ``column_map`` gives the zero-based column index of each retained
    field. ``has_header``: True/False force the choice, None auto-detects
    by attempting to parse the first row numerically. In strict mode a
    malformed row aborts parsing; otherwise it is logged and skipped.
    """

    column_map: dict[str, int] = field(
        default_factory=lambda: {"vehicle_id": 0, "frame_id": 1, "velocity": 2}
    )
    unit_scale: float = FEET_PER_SECOND_TO_MPS
    max_gap_frames: int = 1
    delimiter: str = ","
    strict: bool = True
    has_header: bool | None = None

    def __post_init__(self) -> None:
        required = {"vehicle_id", "frame_id", "velocity"}
        if set(self.column_map) != required:
            raise ConfigError(f"column_map must have exactly the keys {sorted(required)}")
        indices = list(self.column_map.values())
        if len(set(indices)) != len(indices) or any(i < 0 for i in indices):
            raise ConfigError("column indices must be distinct and non-negative")
        if not self.unit_scale > 0:
            raise ConfigError("unit_scale must be > 0")
        if self.max_gap_frames < 1:
            raise ConfigError("max_gap_frames must be >= 1")


def _cell_float(cells: list[str], index: int, line_no: int) -> float:
    try:
        value = float(cells[index])
    except ValueError:
        raise MalformedRow(
            f"line {line_no}: non-numeric cell {cells[index]!r} in column {index}"
        ) from None
    if not np.isfinite(value):
        raise MalformedRow(f"line {line_no}: non-finite cell in column {index}")
    return value


def _looks_like_header(cells: list[str], config: IngestConfig) -> bool:
    # a header has no numeric cells in the mapped columns; a data row with
    # one bad cell keeps its numeric neighbours and stays a (malformed) row
    for index in config.column_map.values():
        if index < len(cells):
            try:
                float(cells[index])
            except ValueError:
                continue
            return False
    return True


def parse_records(raw_text: str | io.TextIOBase, config: IngestConfig) -> list[TrajectoryRecord]:
    """Parse delimiter-separated rows into velocity records (m/s).

    Raises MalformedRow (strict mode) for a bad row, reporting its line
    number; in lenient mode bad rows are logged and skipped. Raises
    EmptyInput when no records result.
    """
    if hasattr(raw_text, "read"):
        raw_text = raw_text.read()
    rows = list(csv.reader(io.StringIO(raw_text), delimiter=config.delimiter))
    width = max(config.column_map.values()) + 1

    start = 0
    first_data = next((i for i, r in enumerate(rows) if r), None)
    if first_data is not None:
        has_header = config.has_header
        if has_header is None:
            has_header = _looks_like_header(rows[first_data], config)
        if has_header:
            start = first_data + 1

    records: list[TrajectoryRecord] = []
    for i in range(start, len(rows)):
        cells = rows[i]
        if not cells:
            continue
        line_no = i + 1
        try:
            if len(cells) < width:
                raise MalformedRow(
                    f"line {line_no}: expected at least {width} fields, got {len(cells)}"
                )
            vehicle_id = int(_cell_float(cells, config.column_map["vehicle_id"], line_no))
            frame_id = int(_cell_float(cells, config.column_map["frame_id"], line_no))
            velocity = _cell_float(cells, config.column_map["velocity"], line_no)
            velocity *= config.unit_scale
            if velocity < 0:
                raise MalformedRow(f"line {line_no}: negative velocity {velocity!r}")
        except MalformedRow as exc:
            if config.strict:
                raise
            logger.warning("skipping row: %s", exc)
            continue
        records.append(TrajectoryRecord(vehicle_id, frame_id, velocity))

    if not records:
        raise EmptyInput("no data rows found")
    return records


def extract_trajectory(
    records: list[TrajectoryRecord], vehicle_id: int, config: IngestConfig
) -> list[Trajectory]:
    """Build uniformly sampled trajectories for one vehicle.

    Records are sorted by frame. A frame gap larger than
    ``max_gap_frames``, or a change of frame stride, starts a new
    trajectory; splitting never drops or fabricates samples. Each run's
    sample period is 0.1 s times its frame stride.
    """
    mine = sorted(
        (r for r in records if r.vehicle_id == vehicle_id), key=lambda r: r.frame_id
    )
    if not mine:
        raise UnknownVehicle(f"vehicle {vehicle_id} not present")

    runs: list[tuple[list[TrajectoryRecord], int | None]] = []
    current = [mine[0]]
    stride: int | None = None
    for prev, rec in zip(mine, mine[1:]):
        gap = rec.frame_id - prev.frame_id
        if gap == 0:
            raise DuplicateFrame(f"vehicle {vehicle_id}: duplicate frame {rec.frame_id}")
        if gap > config.max_gap_frames or (stride is not None and gap != stride):
            runs.append((current, stride))
            current, stride = [rec], None
        else:
            stride = gap
            current.append(rec)
    runs.append((current, stride))

    return [
        Trajectory(
            vehicle_id=vehicle_id,
            sample_period=FRAME_PERIOD_S * (run_stride or 1),
            samples=np.array([r.velocity for r in run]),
        )
        for run, run_stride in runs
    ]


def vehicle_ids(records: list[TrajectoryRecord]) -> list[int]:
    """Distinct vehicle ids in first-appearance order."""
    seen: dict[int, None] = {}
    for r in records:
        seen.setdefault(r.vehicle_id, None)
    return list(seen)


def resample_uniform(trajectory: Trajectory, period: float) -> Trajectory:
    """Decimate to the integer stride nearest to ``period / sample_period``.

    The first sample is always kept. Raises InvalidPeriod when the target
    period is non-positive or finer than the source.
    """
    if not period > 0 or period < trajectory.sample_period * (1 - 1e-9):
        raise InvalidPeriod(
            f"period {period} must be >= source sample period {trajectory.sample_period}"
        )
    stride = max(1, int(round(period / trajectory.sample_period)))
    return Trajectory(
        vehicle_id=trajectory.vehicle_id,
        sample_period=stride * trajectory.sample_period,
        samples=trajectory.samples[::stride].copy(),
    )


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Write a two-column `t_seconds,velocity_mps` CSV with 6 decimals."""
    lines = ["t_seconds,velocity_mps"]
    for i, v in enumerate(trajectory.samples):
        lines.append(f"{i * trajectory.sample_period:.6f},{v:.6f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_csv(path, vehicle_id: int = 0) -> Trajectory:
    """Read a trajectory previously written by write_trajectory_csv."""
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t_seconds", "velocity_mps"]:
        raise MalformedRow(f"{path}: expected a t_seconds,velocity_mps header")
    if len(rows) < 2:
        raise EmptyInput(f"{path}: no samples")
    times = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([float(r[1]) for r in rows[1:]])
    period = float(times[1] - times[0]) if times.size > 1 else FRAME_PERIOD_S
    return Trajectory(vehicle_id=vehicle_id, sample_period=period, samples=values)
