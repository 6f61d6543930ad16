"""Motion calibration of sensed self-gradients.

An agent moving through its own emission leaves a trail: the field is stretched behind it and
compressed in front, so even an isolated agent senses a gradient pointing backward. The
calibration runs isolated agents at constant velocities until the self-gradient settles and
stores it per speed in the agent's heading frame; the world subtracts it from every sensed
gradient. Biases are measured for a unit amount of emitted substance and scale with the amount
an agent actually holds in the channel.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.morphgen.engine.grid import Grid2D
from src.morphgen.errors import IoError, NonConvergence
from src.morphgen.sema.model import BoxRegion
from src.morphgen.sph.agents import EAST, NORTH, SOUTH, WEST
from src.morphgen.sph.channels import MorphogenChannel
from src.morphgen.sph.kernels import KernelSpec

logger = logging.getLogger(__name__)

HEADER = "# speed bias_parallel bias_perpendicular"
DEFAULT_HEADINGS = (0.0, 0.5 * math.pi)


@dataclass(frozen=True)
class CalibrationTable:
    """Self-gradient bias per speed, in the heading frame, interpolated linearly.

    Attributes:
        speeds: Increasing speeds.
        biases: ``(M, 2)`` bias per speed as (along heading, left of heading).
    """

    speeds: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        speeds = np.asarray(self.speeds, dtype=float).reshape(-1)
        biases = np.asarray(self.biases, dtype=float).reshape(-1, 2)
        if speeds.size == 0 or speeds.size != biases.shape[0]:
            raise ValueError("calibration table needs one bias per speed")
        order = np.argsort(speeds, kind="stable")
        object.__setattr__(self, "speeds", speeds[order])
        object.__setattr__(self, "biases", biases[order])

    @classmethod
    def zero(cls) -> CalibrationTable:
        """Table that applies no correction."""
        return cls(speeds=np.zeros(1), biases=np.zeros((1, 2)))

    def bias(self, speed: float | np.ndarray) -> np.ndarray:
        """Heading-frame bias at the given speeds, ``(2,)`` or ``(2, N)``; clamped at the ends."""
        return np.stack(
            [
                np.interp(speed, self.speeds, self.biases[:, 0]),
                np.interp(speed, self.speeds, self.biases[:, 1]),
            ]
        )

    def bias_world(self, velocities: np.ndarray) -> np.ndarray:
        """``(2, N)`` bias rotated from each agent's heading frame into world axes."""
        velocities = np.asarray(velocities, dtype=float).reshape(2, -1)
        speeds = np.hypot(velocities[0], velocities[1])
        along, left = self.bias(speeds)
        safe = np.where(speeds > 0, speeds, 1.0)
        ux = np.where(speeds > 0, velocities[0] / safe, 0.0)
        uy = np.where(speeds > 0, velocities[1] / safe, 0.0)
        return np.stack([along * ux - left * uy, along * uy + left * ux])

    def write(self, path: str | Path) -> Path:
        """Save as a plain-text table.

        Raises:
            IoError: The file cannot be written.
        """
        path = Path(path)
        rows = np.column_stack([self.speeds, self.biases])
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savetxt(path, rows, fmt="%.17g", header=HEADER[2:], comments="# ")
        except OSError as e:
            raise IoError(f"cannot write calibration table {path}: {e}") from e
        logger.info(f"Wrote calibration table with {len(self.speeds)} speeds to {path}")
        return path

    @classmethod
    def read(cls, path: str | Path) -> CalibrationTable:
        """Load a table written by ``write``.

        Raises:
            IoError: The file is missing or not a three-column table.
        """
        path = Path(path)
        try:
            rows = np.loadtxt(path, comments="#", ndmin=2)
        except (OSError, ValueError) as e:
            raise IoError(f"cannot read calibration table {path}: {e}") from e
        if rows.shape[1] != 3:
            raise IoError(f"calibration table {path} must have three columns")
        return cls(speeds=rows[:, 0], biases=rows[:, 1:])


@dataclass(frozen=True)
class CalibrationSetup:
    """Channel geometry shared by the world and its calibration runs.

    Attributes:
        diameter: Agent body diameter.
        kernel_scale: Smoothing length in diameters.
        decay_step_product: Channel decay rate times step size.
        cells_per_diameter: Channel grid cells per diameter.
        dt: Step size.
    """

    diameter: float
    kernel_scale: float
    decay_step_product: float
    cells_per_diameter: float
    dt: float

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter

    @property
    def dx(self) -> float:
        return self.diameter / self.cells_per_diameter

    def kernel(self) -> KernelSpec:
        k = self.decay_step_product / self.dt
        return KernelSpec.from_length(2, self.kernel_scale * self.diameter, k)


def raw_gradient(readings: np.ndarray, radius: float) -> np.ndarray:
    """``(2, N)`` gradient from ``(4, N)`` east, north, west, south sensor readings."""
    return np.stack(
        [
            (readings[EAST] - readings[WEST]) / (2 * radius),
            (readings[NORTH] - readings[SOUTH]) / (2 * radius),
        ]
    )


def measure_self_gradient(
    setup: CalibrationSetup,
    speed: float,
    heading: float,
    max_steps: int,
    tolerance: float = 0.02,
) -> np.ndarray:
    """Settled self-gradient of an isolated agent, in its heading frame.

    The agent emits one unit of substance at equilibrium. Gradients are averaged over windows
    of one decay time; the run stops when two successive window means agree within
    ``tolerance``.

    Raises:
        NonConvergence: No two windows agreed within ``max_steps`` steps.
    """
    kernel = setup.kernel()
    dt = setup.dt
    travel = speed * dt * max_steps
    # whole cells on each side of the origin keep the stationary run mirror symmetric
    half = setup.dx * math.ceil((0.5 * travel + 6 * kernel.h) / setup.dx)
    grid = Grid2D.for_space(BoxRegion(-half, half, -half, half), setup.dx)
    channel = MorphogenChannel("calibration", grid, kernel, setup.radius)

    direction = np.array([[math.cos(heading)], [math.sin(heading)]])
    position = -0.5 * travel * direction
    window = max(1, math.ceil(1.0 / (kernel.k * dt)))
    floor = 1e-3 / kernel.h**3
    samples: list[np.ndarray] = []
    previous = None
    for _ in range(max_steps):
        channel.emit(position, np.array([kernel.k]), dt)
        channel.advance(dt)
        samples.append(raw_gradient(channel.readings(position), setup.radius)[:, 0])
        position = position + speed * dt * direction
        if len(samples) < window:
            continue
        mean = np.mean(samples, axis=0)
        samples = []
        if previous is not None and np.linalg.norm(mean - previous) <= tolerance * max(
            np.linalg.norm(mean), floor
        ):
            along = mean[0] * direction[0, 0] + mean[1] * direction[1, 0]
            left = -mean[0] * direction[1, 0] + mean[1] * direction[0, 0]
            return np.array([along, left])
        previous = mean
    raise NonConvergence(speed, max_steps)


def calibrate_motion(
    setup: CalibrationSetup,
    speeds: Sequence[float],
    headings: Sequence[float] = DEFAULT_HEADINGS,
    max_steps: int | None = None,
    tolerance: float = 0.02,
) -> CalibrationTable:
    """Measure the self-gradient bias at each speed, averaged over headings.

    Args:
        setup: Channel geometry of the world to calibrate.
        speeds: Speeds to measure; must include 0.
        headings: Headings in radians averaged per speed.
        max_steps: Step budget per run (default: thirty decay times).
        tolerance: Relative agreement of successive window means.

    Raises:
        ValueError: ``speeds`` lacks 0 or ``headings`` is empty.
        NonConvergence: A run did not settle within its budget.
    """
    if not any(s == 0 for s in speeds):
        raise ValueError("calibration speeds must include 0")
    if not headings:
        raise ValueError("calibration needs at least one heading")
    kernel = setup.kernel()
    if max_steps is None:
        max_steps = math.ceil(30.0 / (kernel.k * setup.dt))
    biases = []
    for speed in speeds:
        measured = [
            measure_self_gradient(setup, float(speed), heading, max_steps, tolerance)
            for heading in (headings if speed > 0 else headings[:1])
        ]
        bias = np.mean(measured, axis=0)
        logger.info(
            f"Calibrated speed {speed:g}: bias along {bias[0]:.6g}, across {bias[1]:.6g}"
        )
        biases.append(bias)
    return CalibrationTable(speeds=np.asarray(speeds, dtype=float), biases=np.array(biases))
