"""Agent swarm state and body geometry.

The swarm is held as arrays: positions and velocities are ``(2, N)`` (x row first), per-agent
scalars are ``(N,)``. Every agent carries four sensors on its body circle facing east, north,
west and south, and four production points between them at 45 degree offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from src.morphgen.engine.grid import Grid2D

SENSOR_ANGLES = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)
PRODUCTION_ANGLES = tuple(angle + 0.25 * math.pi for angle in SENSOR_ANGLES)

EAST, NORTH, WEST, SOUTH = range(4)


@dataclass(frozen=True)
class Agent:
    """Snapshot of one agent.

    Attributes:
        id: Agent number.
        position: ``(x, y)``.
        velocity: ``(vx, vy)``.
        radius: Half the body diameter.
        mass: Share of the swarm mass carried by the agent.
        state: Stored field values, plus the local density estimate under the density name.
        g: Transient correction per field.
    """

    id: int
    position: tuple[float, float]
    velocity: tuple[float, float]
    radius: float
    mass: float
    state: dict[str, float]
    g: dict[str, float]


@dataclass
class AgentSwarm:
    """Array state of all agents of a world.

    Attributes:
        positions: ``(2, N)`` body centers.
        velocities: ``(2, N)`` velocities.
        radius: Body radius shared by all agents.
        mass: Mass carried by every agent.
        state: Field name to ``(N,)`` stored values.
        density: ``(N,)`` latest local density estimates.
        corrections: Field name to ``(N,)`` transient corrections.
        previous: Field name to the stored values before the last update.
    """

    positions: np.ndarray
    velocities: np.ndarray
    radius: float
    mass: float
    state: dict[str, np.ndarray] = field(default_factory=dict)
    density: np.ndarray | None = None
    corrections: dict[str, np.ndarray] = field(default_factory=dict)
    previous: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"agent radius must be positive, got {self.radius:g}")
        if self.mass <= 0:
            raise ValueError(f"agent mass must be positive, got {self.mass:g}")
        self.positions = np.asarray(self.positions, dtype=float).reshape(2, -1)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(2, -1)
        if self.density is None:
            self.density = np.zeros(self.count)

    @property
    def count(self) -> int:
        return self.positions.shape[1]

    @property
    def speeds(self) -> np.ndarray:
        return np.hypot(self.velocities[0], self.velocities[1])

    def agent(self, index: int, density_name: str = "rho") -> Agent:
        """Snapshot of the agent at ``index``."""
        state = {name: float(values[index]) for name, values in self.state.items()}
        state[density_name] = float(self.density[index])
        return Agent(
            id=index,
            position=(float(self.positions[0, index]), float(self.positions[1, index])),
            velocity=(float(self.velocities[0, index]), float(self.velocities[1, index])),
            radius=self.radius,
            mass=self.mass,
            state=state,
            g={name: float(values[index]) for name, values in self.corrections.items()},
        )


def _ring(positions: np.ndarray, radius: float, angles: tuple[float, ...]) -> np.ndarray:
    offsets = radius * np.array([[math.cos(a), math.sin(a)] for a in angles])
    return np.asarray(positions)[np.newaxis] + offsets[:, :, np.newaxis]


def sensor_points(positions: np.ndarray, radius: float) -> np.ndarray:
    """``(4, 2, N)`` sensor locations, in east, north, west, south order."""
    return _ring(positions, radius, SENSOR_ANGLES)


def production_points(positions: np.ndarray, radius: float) -> np.ndarray:
    """``(4, 2, N)`` production locations at 45 degree offsets from the sensors."""
    return _ring(positions, radius, PRODUCTION_ANGLES)


def grid_coordinates(grid: Grid2D, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fractional ``(row, column)`` indices of points, cell centers at whole numbers."""
    columns = (points[0] - grid.xlo) / grid.dx - 0.5
    rows = (points[1] - grid.ylo) / grid.dx - 0.5
    return rows, columns


def sample_grid(grid: Grid2D, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear samples of a scalar or vector grid at ``(2, M)`` points.

    Points within half a cell of the edge read the edge value, matching the zero-flux walls.
    """
    rows, columns = grid_coordinates(grid, np.asarray(points, dtype=float).reshape(2, -1))
    if values.ndim == 3:
        return np.stack([sample_grid(grid, component, points) for component in values])
    return ndimage.map_coordinates(values, [rows, columns], order=1, mode="nearest")


def scatter_grid(
    grid: Grid2D, target: np.ndarray, points: np.ndarray, amounts: np.ndarray
) -> None:
    """Add point amounts to a grid with bilinear weights, inverse to ``sample_grid``.

    Amounts are accumulated in point order; ``target`` holds amount per cell.
    """
    rows, columns = grid_coordinates(grid, points)
    rows = np.clip(rows, 0.0, grid.ny - 1.0)
    columns = np.clip(columns, 0.0, grid.nx - 1.0)
    j0 = np.minimum(np.floor(rows).astype(int), grid.ny - 2)
    i0 = np.minimum(np.floor(columns).astype(int), grid.nx - 2)
    fy = rows - j0
    fx = columns - i0
    np.add.at(target, (j0, i0), amounts * (1 - fx) * (1 - fy))
    np.add.at(target, (j0, i0 + 1), amounts * fx * (1 - fy))
    np.add.at(target, (j0 + 1, i0), amounts * (1 - fx) * fy)
    np.add.at(target, (j0 + 1, i0 + 1), amounts * fx * fy)
