"""Deterministic synthetic velocity traces used by tests and experiments.

Every generator takes an explicit seed and draws from numpy's seeded
Generator, so a given call signature always reproduces the same series.
``sample_trace_trajectory`` is the exact source of the NGSIM-format CSV
bundled under ``seqcast/data/``.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .trajectory import FRAME_PERIOD_S, Trajectory

SAMPLE_TRACE_SEED = 20
SAMPLE_TRACE_LENGTH = 900
SAMPLE_TRACE_VEHICLE_ID = 2


def sine_trajectory(
    amplitude: float = 5.0,
    period_s: float = 10.0,
    sample_period: float = FRAME_PERIOD_S,
    n_samples: int = 600,
    offset: float | None = None,
) -> Trajectory:
    """Sinusoidal velocity series, lifted by ``offset`` to stay non-negative."""
    if offset is None:
        offset = amplitude
    t = np.arange(n_samples) * sample_period
    samples = offset + amplitude * np.sin(2.0 * np.pi * t / period_s)
    return Trajectory(vehicle_id=0, sample_period=sample_period, samples=samples)


def _pursuit_profile(
    targets: list[float],
    n_samples: int,
    seed: int,
    gain: float,
    max_accel: float,
    noise: float,
    v0: float = 0.0,
) -> np.ndarray:
    """Acceleration-limited pursuit of a target-speed schedule plus noise."""
    rng = np.random.default_rng(seed)
    segment = n_samples // len(targets)
    v = v0
    out = np.empty(n_samples)
    k = 0
    for j, target in enumerate(targets):
        length = segment if j < len(targets) - 1 else n_samples - segment * (len(targets) - 1)
        for _ in range(length):
            accel = np.clip(gain * (target - v), -max_accel, max_accel)
            accel += rng.normal(0.0, noise)
            v = max(0.0, v + accel * FRAME_PERIOD_S)
            out[k] = v
            k += 1
    return out


def stop_and_go_trajectory(n_samples: int, seed: int) -> Trajectory:
    """Urban-style stop-and-go cycle: 0..15 m/s with repeated stops."""
    targets = [0.0, 9.0, 4.0, 13.0, 6.0, 15.0, 2.0, 11.0, 5.0, 0.0]
    samples = _pursuit_profile(
        targets, n_samples, seed, gain=0.8, max_accel=2.5, noise=0.4
    )
    return Trajectory(vehicle_id=0, sample_period=FRAME_PERIOD_S, samples=samples)


def highway_trajectory(n_samples: int, seed: int) -> Trajectory:
    """Highway-style cruise: 24..33 m/s with mild speed adjustments."""
    targets = [27.0, 31.0, 25.0, 29.0, 33.0, 26.0, 30.0, 28.0]
    samples = _pursuit_profile(
        targets, n_samples, seed, gain=0.5, max_accel=1.5, noise=0.25, v0=27.0
    )
    return Trajectory(vehicle_id=0, sample_period=FRAME_PERIOD_S, samples=samples)


def sample_trace_trajectory() -> Trajectory:
    """The trace behind the bundled CSV (m/s, before ft/s quantization)."""
    base = stop_and_go_trajectory(SAMPLE_TRACE_LENGTH, SAMPLE_TRACE_SEED)
    return Trajectory(
        vehicle_id=SAMPLE_TRACE_VEHICLE_ID,
        sample_period=FRAME_PERIOD_S,
        samples=base.samples,
    )


def write_ngsim_csv(trajectory: Trajectory, path, unit_scale: float = 0.3048) -> None:
    """Write a minimal NGSIM-format CSV: Vehicle_ID, Frame_ID, v_Vel.

    Speeds are stored in the dataset's native unit (ft/s by default, two
    decimals, like the published files), so ingesting with the default
    unit scale recovers m/s.
    """
    lines = ["Vehicle_ID,Frame_ID,v_Vel"]
    for i, v in enumerate(trajectory.samples):
        lines.append(f"{trajectory.vehicle_id},{i + 1},{v / unit_scale:.2f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def sample_trace_path():
    """Filesystem path of the bundled NGSIM-format sample trace."""
    return resources.files("seqcast").joinpath("data/sample_trace.csv")
