"""Fuzzy-coding predictor over overlapping Gaussian velocity sets.

Instead of snapping a velocity to one discrete state, fuzzy coding grades
its membership in every set with a Gaussian bump and normalizes those
degrees into a probability vector. Transitions are counted softly (outer
product of the two probability vectors), so a single observed transition
updates the whole count matrix at once. The one-step prediction is a
ratio of membership moments: the transition-weighted first moments of the
destination sets over their transition-weighted areas, which collapses
the fuzzy mass to one crisp value.

Set centers sit at 2.5*i - 1.25 m/s for i = 1..M. Membership moments are
integrated once per partition with the trapezoid rule and cached, keeping
each prediction O(M^2). Fitting takes a single writer; predictions may
run concurrently between fit calls.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZeroPossibility,
    InvalidRange,
    ModelFormatError,
    NonFiniteInput,
    OutOfDomain,
    UnfittedModel,
)
from .trajectory import Trajectory

#: Spacing between set centers (m/s).
CENTER_SPACING = 2.5

#: Default domain margin beyond the outermost centers, in sigmas. Six keeps
#: the truncation bias of the edge sets' centroids near 1e-8; five would
#: already leave ~1.5e-6, visible against the moment identities.
DOMAIN_MARGIN_SIGMAS = 6.0

#: The domain must cover every center by at least this many sigmas.
MIN_MARGIN_SIGMAS = 5.0


@dataclass(frozen=True)
class FuzzyPartition:
    """Family of M Gaussian membership functions on a bounded domain.

    The domain must extend at least ``5 * sigma`` beyond the outermost
    centers; the Gaussian tail mass beyond that (< 3e-7 of a set's area)
    is accepted as truncation error.
    """

    set_count: int
    sigma: float = 1.0
    domain: tuple[float, float] | None = None
    quad_step: float = 0.01

    def __post_init__(self) -> None:
        if self.set_count < 2:
            raise InvalidRange("a fuzzy partition needs at least two sets")
        if not self.sigma > 0 or not self.quad_step > 0:
            raise InvalidRange("sigma and quad_step must be > 0")
        centers = self.centers
        if self.domain is None:
            margin = DOMAIN_MARGIN_SIGMAS * self.sigma
            object.__setattr__(
                self, "domain", (float(centers[0] - margin), float(centers[-1] + margin))
            )
        else:
            a, b = self.domain
            needed = MIN_MARGIN_SIGMAS * self.sigma
            if a > centers[0] - needed or b < centers[-1] + needed:
                raise InvalidRange(
                    f"domain [{a}, {b}] must cover all centers by >= {needed}"
                )

    @property
    def centers(self) -> np.ndarray:
        return CENTER_SPACING * np.arange(1, self.set_count + 1) - 1.25

    def contains(self, y: float) -> bool:
        a, b = self.domain
        return a <= y <= b


def partition_for_range(
    v_max: float, sigma: float = 1.0, quad_step: float = 0.01
) -> FuzzyPartition:
    """Smallest default partition whose outermost center reaches v_max."""
    if not np.isfinite(v_max) or v_max <= 0:
        raise InvalidRange(f"v_max must be positive, got {v_max}")
    count = max(2, math.ceil((v_max + 1.25) / CENTER_SPACING - 1e-9))
    return FuzzyPartition(set_count=count, sigma=sigma, quad_step=quad_step)


def _check_domain(partition: FuzzyPartition, y: float, clamp: bool) -> float:
    if not np.isfinite(y):
        raise NonFiniteInput(f"query value {y!r}")
    if partition.contains(y):
        return y
    if clamp:
        a, b = partition.domain
        return min(max(y, a), b)
    raise OutOfDomain(f"{y} outside domain {partition.domain}")


def possibility_vector(
    partition: FuzzyPartition, y: float, clamp: bool = False
) -> np.ndarray:
    """Raw membership degrees of y in every set (need not sum to 1)."""
    y = _check_domain(partition, y, clamp)
    d = y - partition.centers
    return np.exp(-(d * d) / (2.0 * partition.sigma**2))


def probability_vector(possibility: np.ndarray) -> np.ndarray:
    """Normalize membership degrees to unit sum."""
    possibility = np.asarray(possibility, dtype=np.float64)
    total = possibility.sum()
    if not total > 0:
        raise AllZeroPossibility("no set has positive membership")
    return possibility / total


def compute_moments(partition: FuzzyPartition) -> tuple[np.ndarray, np.ndarray]:
    """Area and first moment of each membership function over the domain.

    Trapezoid rule on a uniform grid no coarser than ``quad_step``. These
    depend only on the partition, so models cache them.
    """
    a, b = partition.domain
    n = math.ceil((b - a) / partition.quad_step) + 1
    xs = np.linspace(a, b, n)
    mu = np.exp(
        -((xs[None, :] - partition.centers[:, None]) ** 2) / (2.0 * partition.sigma**2)
    )
    areas = np.trapezoid(mu, xs, axis=1)
    first_moments = np.trapezoid(mu * xs[None, :], xs, axis=1)
    return areas, first_moments


@dataclass
class FuzzyTransitionModel:
    """Partition plus soft transition counts and cached membership moments."""

    partition: FuzzyPartition
    counts: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        m = self.partition.set_count
        if self.counts is None:
            self.counts = np.zeros((m, m), dtype=np.float64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.float64)
            if self.counts.shape != (m, m):
                raise InvalidRange(f"counts must be {m}x{m}")
            if np.any(self.counts < 0):
                raise InvalidRange("counts must be non-negative")
        areas, first_moments = compute_moments(self.partition)
        self.set_areas = areas
        self.set_first_moments = first_moments

    @property
    def fitted(self) -> bool:
        return bool(self.counts.sum() > 0)


def _theta_rows(model: FuzzyTransitionModel, values: np.ndarray) -> np.ndarray:
    part = model.partition
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput("trajectory contains non-finite values")
    a, b = part.domain
    if np.any(values < a) or np.any(values > b):
        raise OutOfDomain(f"values outside domain [{a}, {b}]")
    d = values[:, None] - part.centers[None, :]
    mu = np.exp(-(d * d) / (2.0 * part.sigma**2))
    totals = mu.sum(axis=1)
    if np.any(totals <= 0):
        raise AllZeroPossibility("a sample has no positive membership")
    return mu / totals[:, None]


def record_fuzzy_transition(model: FuzzyTransitionModel, y_from: float, y_to: float) -> None:
    """Soft-count one observed transition (adds total mass 1)."""
    theta = _theta_rows(model, np.array([y_from, y_to]))
    model.counts += np.outer(theta[0], theta[1])


def fit_fuzzy_transitions(
    model: FuzzyTransitionModel, trajectory: Trajectory
) -> FuzzyTransitionModel:
    """Accumulate soft counts for every consecutive pair of the trajectory.

    Each pair contributes the outer product of its two probability
    vectors, which reduces to crisp counting when memberships are one-hot.
    Counts add across calls.
    """
    theta = _theta_rows(model, trajectory.samples)
    model.counts += theta[:-1].T @ theta[1:]
    return model


def fuzzy_transition_matrix(model: FuzzyTransitionModel) -> np.ndarray:
    """Row-normalized soft counts.

    With Gaussian memberships every row is positive after one fit call in
    exact arithmetic; a row whose mass underflowed to zero stays a zero
    row, mirroring the crisp predictor's zero-row policy.
    """
    if not model.fitted:
        raise UnfittedModel("no transitions have been fitted")
    totals = model.counts.sum(axis=1, keepdims=True)
    return np.divide(
        model.counts, totals, out=np.zeros_like(model.counts), where=totals > 0
    )


def predict_fc(model: FuzzyTransitionModel, y: float, clamp: bool = False) -> float:
    """One-step fuzzy prediction for the current velocity y.

    Weighs each destination set's area and first moment by the current
    probability vector and the transition matrix, then returns the ratio
    (a membership-weighted centroid, guaranteed inside the domain). A
    degenerate zero denominator predicts 0, matching the crisp
    predictor's zero-information behavior.
    """
    if not model.fitted:
        raise UnfittedModel("no transitions have been fitted")
    theta = probability_vector(possibility_vector(model.partition, y, clamp=clamp))
    matrix = fuzzy_transition_matrix(model)
    weights = theta @ matrix
    denominator = weights @ model.set_areas
    if denominator <= 0:
        return 0.0
    return float(weights @ model.set_first_moments / denominator)


def write_fuzzy_csv(model: FuzzyTransitionModel, path) -> None:
    """Persist the partition shape and soft counts (12 significant digits)."""
    part = model.partition
    a, b = part.domain
    lines = [
        f"# M={part.set_count}",
        f"# sigma={part.sigma!r}",
        "# centers=" + ",".join(repr(float(c)) for c in part.centers),
        f"# domain={a!r},{b!r}",
        f"# quad_step={part.quad_step!r}",
    ]
    for row in model.counts:
        lines.append(",".join(f"{c:.12g}" for c in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_fuzzy_csv(path) -> FuzzyTransitionModel:
    """Load a model written by write_fuzzy_csv."""
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                header[key] = value
            else:
                rows.append([float(c) for c in next(csv.reader([line]))])
    try:
        count = int(header["M"])
        a, b = (float(v) for v in header["domain"].split(","))
        partition = FuzzyPartition(
            set_count=count,
            sigma=float(header["sigma"]),
            domain=(a, b),
            quad_step=float(header["quad_step"]),
        )
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: bad header ({exc})") from None
    if len(rows) != count or any(len(r) != count for r in rows):
        raise ModelFormatError(f"{path}: count matrix shape mismatch")
    return FuzzyTransitionModel(partition=partition, counts=np.array(rows))
