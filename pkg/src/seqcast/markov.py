"""Nearest-neighborhood predictor over a quantized velocity grid.

Continuous velocities are snapped to their closest grid state; transition
counts between states are accumulated from observed consecutive pairs and
turned into a row-stochastic matrix by maximum likelihood (each row is its
count row divided by the row total). One-step prediction is either the
most probable next state or the expectation over next states; n-step
prediction chains the one-step matrix through matrix powers.

Counts are kept as exact integers and probabilities are always derived on
demand, never stored, so repeated fitting cannot drift. A model accepts a
single writer during fitting; predictions may run concurrently between
fit calls.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidHorizon,
    InvalidRange,
    ModelFormatError,
    NonFiniteInput,
)
from .trajectory import Trajectory

#: Default grid spacing (m/s); matches the 2.5 m/s pitch of the fuzzy sets.
DEFAULT_SPACING = 2.5


class Fallback(enum.Enum):
    """What an unvisited state's probability row should look like."""

    ZERO_ROW = "zero-row"
    HOLD = "hold"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class StateSpace:
    """Ordered discrete velocity grid (strictly increasing, M >= 2)."""

    grid: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.grid, dtype=np.float64)
        object.__setattr__(self, "grid", arr)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidRange("state grid needs at least two points")
        if not np.all(np.isfinite(arr)):
            raise InvalidRange("state grid must be finite")
        if not np.all(np.diff(arr) > 0):
            raise InvalidRange("state grid must be strictly increasing")

    def __len__(self) -> int:
        return int(self.grid.size)


@dataclass
class TransitionModel:
    """State grid plus integer transition counts and a fallback policy."""

    state_space: StateSpace
    counts: np.ndarray = None  # type: ignore[assignment]
    fallback: Fallback = Fallback.ZERO_ROW

    def __post_init__(self) -> None:
        m = len(self.state_space)
        if self.counts is None:
            self.counts = np.zeros((m, m), dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (m, m):
                raise InvalidRange(f"counts must be {m}x{m}")
            if np.any(self.counts < 0):
                raise InvalidRange("counts must be non-negative")

    @property
    def n_states(self) -> int:
        return len(self.state_space)


def build_state_space(v_min: float, v_max: float, spacing: float = DEFAULT_SPACING) -> StateSpace:
    """Arithmetic grid from v_min upward; the last point covers v_max."""
    if not (np.isfinite(v_min) and np.isfinite(v_max)) or v_max <= v_min or spacing <= 0:
        raise InvalidRange(f"invalid grid range ({v_min}, {v_max}, spacing {spacing})")
    # small slack so an exact multiple does not gain a spurious extra point
    steps = math.ceil((v_max - v_min) / spacing - 1e-9)
    grid = v_min + spacing * np.arange(steps + 1)
    if grid[-1] < v_max:
        grid = np.append(grid, grid[-1] + spacing)
    return StateSpace(grid=grid)


def quantize(y: float, space: StateSpace) -> int:
    """Index of the grid state closest to y; ties go to the lower index."""
    if not np.isfinite(y):
        raise NonFiniteInput(f"cannot quantize {y!r}")
    return int(np.argmin(np.abs(space.grid - y)))


def _quantize_bulk(values: np.ndarray, space: StateSpace) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput("cannot quantize non-finite values")
    # argmin returns the first minimum, preserving the tie-to-lower rule
    return np.argmin(np.abs(values[:, None] - space.grid[None, :]), axis=1)


def record_transition(model: TransitionModel, y_from: float, y_to: float) -> None:
    """Count one observed velocity transition."""
    model.counts[quantize(y_from, model.state_space), quantize(y_to, model.state_space)] += 1


def fit_transitions(model: TransitionModel, trajectory: Trajectory) -> TransitionModel:
    """Accumulate counts for every consecutive pair of the trajectory.

    Counts add across calls, which is what makes round-over-round online
    maturation work. A single-sample trajectory contributes nothing.
    """
    idx = _quantize_bulk(trajectory.samples, model.state_space)
    np.add.at(model.counts, (idx[:-1], idx[1:]), 1)
    return model


def _probability_row(model: TransitionModel, i: int) -> np.ndarray:
    row = model.counts[i]
    total = row.sum()
    if total > 0:
        return row / total
    m = model.n_states
    if model.fallback is Fallback.HOLD:
        out = np.zeros(m)
        out[i] = 1.0
        return out
    if model.fallback is Fallback.UNIFORM:
        return np.full(m, 1.0 / m)
    return np.zeros(m)


def transition_matrix(model: TransitionModel) -> np.ndarray:
    """Row-stochastic matrix derived from the counts (fallback for empty rows)."""
    return np.vstack([_probability_row(model, i) for i in range(model.n_states)])


def predict_argmax(model: TransitionModel, current: float) -> float:
    """Most probable next state's value; an all-zero row predicts 0."""
    row = _probability_row(model, quantize(current, model.state_space))
    if not row.any():
        return 0.0
    return float(model.state_space.grid[int(np.argmax(row))])


def predict_expectation(model: TransitionModel, current: float) -> float:
    """Expected next value under the current state's transition row.

    This is the toolkit's default one-step predictor; an all-zero row
    (zero-row fallback before any fitting) predicts 0.
    """
    row = _probability_row(model, quantize(current, model.state_space))
    return float(row @ model.state_space.grid)


def predict_multistep(model: TransitionModel, current: float, n: int) -> np.ndarray:
    """Expected values 1..n steps ahead via repeated matrix products.

    The m-step distribution is the current state's row of the m-th matrix
    power, computed by propagating a one-hot row through the one-step
    matrix m times.
    """
    if n < 1:
        raise InvalidHorizon(f"horizon must be >= 1, got {n}")
    i = quantize(current, model.state_space)
    matrix = transition_matrix(model)
    row = np.zeros(model.n_states)
    row[i] = 1.0
    out = np.empty(n)
    for m in range(n):
        row = row @ matrix
        out[m] = row @ model.state_space.grid
    return out


def write_transition_csv(model: TransitionModel, path) -> None:
    """Persist the grid and the exact integer counts.

    One comment line per state carries the grid value; count rows follow,
    so the maximum-likelihood probabilities are recoverable exactly.
    """
    lines = [
        f"# x_{i + 1}={float(value)!r}" for i, value in enumerate(model.state_space.grid)
    ]
    for row in model.counts:
        lines.append(",".join(str(int(c)) for c in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_transition_csv(path, fallback: Fallback = Fallback.ZERO_ROW) -> TransitionModel:
    """Load a model written by write_transition_csv."""
    grid: list[float] = []
    rows: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                try:
                    grid.append(float(line.split("=", 1)[1]))
                except (IndexError, ValueError):
                    raise ModelFormatError(f"{path}: bad grid line {line!r}") from None
            else:
                rows.append([int(c) for c in next(csv.reader([line]))])
    if not grid or len(rows) != len(grid) or any(len(r) != len(grid) for r in rows):
        raise ModelFormatError(f"{path}: grid/count shape mismatch")
    return TransitionModel(
        state_space=StateSpace(grid=np.array(grid)),
        counts=np.array(rows, dtype=np.int64),
        fallback=fallback,
    )
