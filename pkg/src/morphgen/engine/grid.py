"""Uniform 2D grid and its finite-difference operators.

Scalar grids are ``(ny, nx)`` float64 arrays indexed ``[j, i]`` with ``j`` along y; vector grids
are ``(2, ny, nx)`` with the x component first. Cell ``(i, j)`` is centered at
``(xlo + (i + 1/2) dx, ylo + (j + 1/2) dx)``. The Laplacian mirrors ghost cells at the domain
edge; gradient and divergence switch to one-sided differences there.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from src.morphgen.errors import GridTooSmall
from src.morphgen.sema.model import BoxRegion, CompiledModel

MIN_CELLS = 3


@dataclass(frozen=True)
class Grid2D:
    """Square-cell mesh covering the simulated space.

    Attributes:
        nx: Cells along x.
        ny: Cells along y.
        dx: Cell edge length.
        xlo: Left edge of the space.
        ylo: Bottom edge of the space.
    """

    nx: int
    ny: int
    dx: float
    xlo: float = 0.0
    ylo: float = 0.0

    def __post_init__(self):
        if self.nx < MIN_CELLS or self.ny < MIN_CELLS:
            raise GridTooSmall(
                f"grid of {self.nx}x{self.ny} cells is too small; at least {MIN_CELLS} cells "
                f"are needed along each axis"
            )

    @classmethod
    def for_space(cls, space: BoxRegion, dx: float) -> Grid2D:
        return cls(
            nx=int(round(space.width / dx)),
            ny=int(round(space.height / dx)),
            dx=dx,
            xlo=space.xlo,
            ylo=space.ylo,
        )

    @classmethod
    def for_model(cls, model: CompiledModel) -> Grid2D:
        return cls.for_space(model.space, model.dx)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def xhi(self) -> float:
        return self.xlo + self.nx * self.dx

    @property
    def yhi(self) -> float:
        return self.ylo + self.ny * self.dx

    @cached_property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates ``(X, Y)``, each of grid shape."""
        x = self.xlo + (np.arange(self.nx) + 0.5) * self.dx
        y = self.ylo + (np.arange(self.ny) + 0.5) * self.dx
        return np.meshgrid(x, y)

    def zeros(self, vector: bool = False) -> np.ndarray:
        return np.zeros((2, *self.shape) if vector else self.shape)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Index ``(j, i)`` of the cell containing a point, clamped to the grid."""
        i = int(np.clip(np.floor((x - self.xlo) / self.dx), 0, self.nx - 1))
        j = int(np.clip(np.floor((y - self.ylo) / self.dx), 0, self.ny - 1))
        return j, i

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Central differences inside, one-sided differences on the edge cells."""
        dfdy, dfdx = np.gradient(f, self.dx)
        return np.stack([dfdx, dfdy])

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Five-point stencil with mirrored ghost cells."""
        return ndimage.laplace(f, mode="nearest") / self.dx**2

    def divergence(self, v: np.ndarray) -> np.ndarray:
        """Sum of the component derivatives, differenced the same way as ``gradient``.

        The sum over the grid is zero when ``v`` vanishes on the two outermost rings of cells.
        """
        dvx = np.gradient(v[0], self.dx, axis=1)
        dvy = np.gradient(v[1], self.dx, axis=0)
        return dvx + dvy
