"""Morphogen channels agents emit into and sense.

A channel holds one diffusing, decaying substance. ``MorphogenChannel`` integrates it on a grid
with finite differences; ``InstantChannel`` skips diffusion time and evaluates the substance as
the sum of every agent's equilibrium kernel, which makes SPH identities checkable without grid
error.

Emission deposits are scaled so that an agent producing at a constant rate ``r`` settles at
exactly ``r / k`` of substance, measured after the decay of each step.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod

import numpy as np

from src.morphgen.engine.grid import Grid2D
from src.morphgen.sph.agents import production_points, sample_grid, scatter_grid, sensor_points
from src.morphgen.sph.kernels import KernelSpec, kernel_value

logger = logging.getLogger(__name__)

MAX_DIFFUSION_NUMBER = 0.2


class Channel(ABC):
    """A substance agents emit into and sense.

    Args:
        field: Name of the field the channel carries.
        kernel: Kernel of the substance (diffusion and decay rates).
        radius: Radius of the emitting agents' bodies.
    """

    def __init__(self, field: str, kernel: KernelSpec, radius: float):
        self.field = field
        self.kernel = kernel
        self.radius = radius

    @property
    def E(self) -> float:
        return self.kernel.E

    @property
    def k(self) -> float:
        return self.kernel.k

    def describe(self, dt: float) -> str:
        return f"channel for {self.field}: h={self.kernel.h:g} E={self.E:g} k={self.k:g}"

    def step_amount(self, rates: np.ndarray, dt: float) -> np.ndarray:
        """Substance released during one step at the given production rates."""
        return np.asarray(rates, dtype=float) * math.expm1(self.k * dt) / self.k

    def readings(self, positions: np.ndarray) -> np.ndarray:
        """``(4, N)`` sensor readings of agents at ``positions``, east, north, west, south."""
        points = sensor_points(positions, self.radius)
        count = points.shape[2]
        flat = points.transpose(1, 0, 2).reshape(2, -1)
        return self.sample(flat).reshape(4, count)

    @abstractmethod
    def emit(self, positions: np.ndarray, rates: np.ndarray, dt: float) -> None:
        """Queue one step of production by agents at ``(2, N)`` positions."""
        pass

    @abstractmethod
    def advance(self, dt: float) -> None:
        """Apply queued production, then diffuse and decay for one step."""
        pass

    @abstractmethod
    def sample(self, points: np.ndarray) -> np.ndarray:
        """Concentration at ``(2, M)`` points."""
        pass

    @abstractmethod
    def total(self) -> float:
        """Amount of substance in the channel."""
        pass

    @abstractmethod
    def raster(self, grid: Grid2D) -> np.ndarray:
        """Concentration at the cell centers of ``grid``."""
        pass

    def equilibrate(
        self, positions: np.ndarray, rates: np.ndarray, dt: float, tolerance: float = 1e-6
    ) -> int:
        """Run constant production until transients have decayed below ``tolerance``.

        Returns:
            Number of steps taken.
        """
        steps = max(1, math.ceil(math.log(1.0 / tolerance) / (self.k * dt)))
        for _ in range(steps):
            self.emit(positions, rates, dt)
            self.advance(dt)
        return steps


class MorphogenChannel(Channel):
    """Channel integrated on a grid with explicit diffusion and exact decay.

    Each step is split into as many substeps as keep ``E * dt_sub / dx^2`` at or below
    ``max_diffusion_number``.

    Args:
        field: Name of the field the channel carries.
        grid: Channel mesh.
        kernel: Kernel of the substance.
        radius: Radius of the emitting agents' bodies.
        max_diffusion_number: Largest diffusion number of one substep.
    """

    def __init__(
        self,
        field: str,
        grid: Grid2D,
        kernel: KernelSpec,
        radius: float,
        max_diffusion_number: float = MAX_DIFFUSION_NUMBER,
    ):
        super().__init__(field, kernel, radius)
        self.grid = grid
        self.max_diffusion_number = max_diffusion_number
        self.concentration = grid.zeros()
        self.buffer = grid.zeros()

    def substeps(self, dt: float) -> int:
        number = self.E * dt / self.grid.dx**2
        return max(1, math.ceil(round(number / self.max_diffusion_number, 9)))

    def describe(self, dt: float) -> str:
        n = self.substeps(dt)
        number = self.E * dt / n / self.grid.dx**2
        return (
            f"channel for {self.field}: h={self.kernel.h:g} E={self.E:g} k={self.k:g} on "
            f"{self.grid.nx}x{self.grid.ny} cells, {n} substeps at diffusion number {number:.3f}"
        )

    def emit(self, positions: np.ndarray, rates: np.ndarray, dt: float) -> None:
        points = production_points(positions, self.radius)
        per_point = self.step_amount(rates, dt) / len(points)
        # agent-major order keeps accumulation deterministic by agent id
        flat = points.transpose(1, 2, 0).reshape(2, -1)
        amounts = np.repeat(np.broadcast_to(per_point, (points.shape[2],)), len(points))
        scatter_grid(self.grid, self.buffer, flat, amounts / self.grid.dx**2)

    def advance(self, dt: float) -> None:
        self.concentration += self.buffer
        self.buffer.fill(0.0)
        n = self.substeps(dt)
        sub = dt / n
        decay = math.exp(-self.k * sub)
        for _ in range(n):
            diffused = self.concentration + sub * self.E * self.grid.laplacian(self.concentration)
            self.concentration = diffused * decay

    def sample(self, points: np.ndarray) -> np.ndarray:
        return sample_grid(self.grid, self.concentration, points)

    def total(self) -> float:
        return float(self.concentration.sum() * self.grid.dx**2)

    def raster(self, grid: Grid2D) -> np.ndarray:
        if grid == self.grid:
            return self.concentration.copy()
        x, y = grid.centers
        return self.sample(np.stack([x.ravel(), y.ravel()])).reshape(grid.shape)


class InstantChannel(Channel):
    """Channel evaluated as the sum of each agent's kernel weighted by its emitted amount.

    The amount attached to an agent relaxes toward ``rate / k`` at the decay rate; its spatial
    profile is the equilibrium kernel around the agent's current position. Distances are
    clamped to the agent radius.
    """

    def __init__(self, field: str, kernel: KernelSpec, radius: float):
        super().__init__(field, kernel, radius)
        self.sources = np.zeros((2, 0))
        self.amounts = np.zeros(0)
        self._pending: tuple[np.ndarray, np.ndarray] | None = None

    def describe(self, dt: float) -> str:
        return f"instant {super().describe(dt)}"

    def emit(self, positions: np.ndarray, rates: np.ndarray, dt: float) -> None:
        positions = np.asarray(positions, dtype=float).reshape(2, -1)
        rates = np.broadcast_to(np.asarray(rates, dtype=float), (positions.shape[1],))
        self._pending = (positions.copy(), rates.copy())

    def advance(self, dt: float) -> None:
        if self._pending is None:
            self.amounts = self.amounts * math.exp(-self.k * dt)
            return
        positions, rates = self._pending
        self._pending = None
        if self.amounts.shape != rates.shape:
            self.amounts = np.zeros_like(rates)
        q = math.exp(-self.k * dt)
        self.amounts = self.amounts * q + rates * (1.0 - q) / self.k
        self.sources = positions

    def sample(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(2, -1)
        if self.amounts.size == 0:
            return np.zeros(points.shape[1])
        dx = points[0][:, np.newaxis] - self.sources[0][np.newaxis]
        dy = points[1][:, np.newaxis] - self.sources[1][np.newaxis]
        distance = np.maximum(np.hypot(dx, dy), self.radius)
        return kernel_value(self.kernel, distance) @ self.amounts

    def total(self) -> float:
        return float(self.amounts.sum())

    def raster(self, grid: Grid2D) -> np.ndarray:
        x, y = grid.centers
        return self.sample(np.stack([x.ravel(), y.ravel()])).reshape(grid.shape)

    def equilibrate(
        self, positions: np.ndarray, rates: np.ndarray, dt: float, tolerance: float = 1e-6
    ) -> int:
        positions = np.asarray(positions, dtype=float).reshape(2, -1)
        rates = np.broadcast_to(np.asarray(rates, dtype=float), (positions.shape[1],))
        self.sources = positions.copy()
        self.amounts = rates / self.k
        return 0
