"""Corpus Metrics Module.

Regression metrics over snapshots of corpus runs, plus the closed-form predictions the runs are
compared with. Every metric is a pure function of its inputs; ``write_metrics`` records a
batch of results as JSON lines.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage, optimize, special

from src.morphgen.engine.grid import Grid2D
from src.morphgen.errors import IoError
from src.morphgen.sema.model import NumericRegion

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
LEVEL = 0.5
EIGHT_NEIGHBORS = np.ones((3, 3), dtype=int)


class MetricResult(BaseModel):
    """One measured metric and its acceptance threshold."""

    name: str = Field(..., description="Metric name")
    value: float = Field(..., description="Measured value")
    threshold: float | None = Field(default=None, description="Acceptance threshold")
    passed: bool | None = Field(default=None, description="Whether the threshold was met")

    @classmethod
    def at_least(cls, name: str, value: float, threshold: float) -> MetricResult:
        return cls(name=name, value=value, threshold=threshold, passed=value >= threshold)

    @classmethod
    def within(cls, name: str, value: float, expected: float, tolerance: float) -> MetricResult:
        """Result that passes when ``value`` is within a relative tolerance of ``expected``."""
        error = abs(value - expected) / abs(expected) if expected else abs(value)
        return cls(name=name, value=value, threshold=expected, passed=error <= tolerance)


class SegmentStats(BaseModel):
    """Segments found along the spine band, ordered by x."""

    count: int = Field(..., ge=0, description="Number of segments")
    mean_length: float = Field(..., ge=0, description="Mean segment length along x")
    lengths: list[float] = Field(default_factory=list, description="Lengths in x order")
    starts: list[float] = Field(default_factory=list, description="Left edges in x order")

    @property
    def gaps(self) -> list[float]:
        """Distances between the right edge of each segment and the left edge of the next."""
        return [
            self.starts[i + 1] - (self.starts[i] + self.lengths[i])
            for i in range(self.count - 1)
        ]


def region_mask(grid: Grid2D, region: NumericRegion) -> np.ndarray:
    """Cells whose centers lie in a region."""
    x, y = grid.centers
    return region.contains(x, y)


def metric_path_connectivity(
    path: np.ndarray, grid: Grid2D, origin: NumericRegion, goal: NumericRegion
) -> bool:
    """Whether cells with path density above one half join the origin to the goal.

    Cells connect through edges and corners.
    """
    labels, count = ndimage.label(np.asarray(path) > LEVEL, structure=EIGHT_NEIGHBORS)
    if count == 0:
        return False
    at_origin = set(np.unique(labels[region_mask(grid, origin)])) - {0}
    at_goal = set(np.unique(labels[region_mask(grid, goal)])) - {0}
    connected = bool(at_origin & at_goal)
    logger.debug(f"{count} path components; origin and goal connected: {connected}")
    return connected


def metric_bimodality(path: np.ndarray, low: float = 0.1, high: float = 0.9) -> float:
    """Fraction of cells clearly empty (below ``low``) or clearly full (above ``high``)."""
    values = np.asarray(path, dtype=float)
    if values.size == 0:
        return 1.0
    return float(np.mean((values < low) | (values > high)))


def metric_segments(
    segments: np.ndarray, grid: Grid2D, band: tuple[float, float]
) -> SegmentStats:
    """Connected pieces of segment tissue within a horizontal band.

    Args:
        segments: Segment tissue density grid.
        grid: Grid of the density.
        band: ``(ylo, yhi)`` of the spine band.

    Returns:
        Count, mean length and the length and left edge of each piece, ordered by x.
    """
    _, y = grid.centers
    inside = (y > band[0]) & (y < band[1]) & (np.asarray(segments) > LEVEL)
    labels, count = ndimage.label(inside, structure=EIGHT_NEIGHBORS)
    pieces = []
    for piece in ndimage.find_objects(labels):
        if piece is None:
            continue
        columns = piece[1]
        start = grid.xlo + columns.start * grid.dx
        pieces.append((start, (columns.stop - columns.start) * grid.dx))
    pieces.sort()
    lengths = [length for _, length in pieces]
    return SegmentStats(
        count=count,
        mean_length=float(np.mean(lengths)) if lengths else 0.0,
        lengths=lengths,
        starts=[start for start, _ in pieces],
    )


def metric_corridor_fraction(
    positions: np.ndarray,
    first: tuple[float, float],
    second: tuple[float, float],
    side: float,
    width_factor: float = 1.5,
) -> float:
    """Fraction of agents inside the corridor joining two square centers.

    The corridor holds the points within half its width (``width_factor * side``) of the
    segment between the centers.

    Args:
        positions: ``(2, N)`` agent positions.
        first: Center of the first square.
        second: Center of the second square.
        side: Side length of the squares.
        width_factor: Corridor width in square sides.
    """
    points = np.asarray(positions, dtype=float).reshape(2, -1)
    if points.shape[1] == 0:
        return 0.0
    start = np.asarray(first, dtype=float)[:, None]
    axis = np.asarray(second, dtype=float)[:, None] - start
    length2 = float(np.sum(axis * axis))
    offsets = points - start
    along = np.clip(np.sum(offsets * axis, axis=0) / length2, 0, 1) if length2 else 0.0
    distance = np.hypot(*(offsets - axis * along))
    return float(np.mean(distance <= width_factor * side / 2))


# --- closed-form predictions ---------------------------------------------------------------


def point_source_level(
    distance: float, rate: float, diffusion: float, decay_time: float
) -> float:
    """Steady concentration at a distance from a point source in the plane."""
    scale = math.sqrt(diffusion * decay_time)
    return rate / (2 * math.pi * diffusion) * float(special.k0(distance / scale))


def threshold_distance(
    threshold: float, rate: float, diffusion: float, decay_time: float
) -> float:
    """Distance at which the steady point-source concentration falls to ``threshold``.

    Raises:
        ValueError: A non-positive threshold, rate, diffusion constant or decay time.
    """
    if min(threshold, rate, diffusion, decay_time) <= 0:
        raise ValueError("threshold, rate, diffusion and decay time must be positive")
    scale = math.sqrt(diffusion * decay_time)

    def excess(distance: float) -> float:
        return point_source_level(distance, rate, diffusion, decay_time) - threshold

    hi = scale
    while excess(hi) > 0:
        hi *= 2
    lo = hi / 2
    while excess(lo) < 0:
        lo /= 2
    return float(optimize.brentq(excess, lo, hi, xtol=1e-12 * scale))


def expected_segment_count(
    frequency: float, timer_decay: float, timer_start: float, timer_threshold: float
) -> int:
    """Complete segments formed before the growth timer falls below its threshold."""
    return math.floor(frequency * timer_decay * math.log(timer_start / timer_threshold))


def expected_segment_length(growth_rate: float, frequency: float) -> float:
    return growth_rate / frequency


# --- reports -------------------------------------------------------------------------------


def write_metrics(results: Iterable[MetricResult], path: str | Path) -> Path:
    """Write results as JSON lines, one object per metric.

    Raises:
        IoError: The file cannot be written.
    """
    path = Path(path)
    if path.is_dir():
        path = path / METRICS_FILE
    results = list(results)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for result in results:
                f.write(result.model_dump_json() + "\n")
    except OSError as e:
        raise IoError(f"cannot write metrics {path}: {e}") from e
    failed = [r.name for r in results if r.passed is False]
    logger.info(f"Wrote {len(results)} metrics to {path} ({len(failed)} failed)")
    return path
