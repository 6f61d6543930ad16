"""Idealized morphogen smoothing kernels.

A substance diffusing at rate ``E`` and decaying at rate ``k`` around a point source settles into
a radial profile whose shape depends only on the smoothing length ``h = sqrt(E / k)``. These
profiles serve as SPH smoothing kernels for agents that emit and sense the substance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from src.morphgen.errors import QuadratureNonConvergence, SingularAtOrigin

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    """Smoothing kernel of a diffusing, decaying morphogen.

    Attributes:
        dimension: Spatial dimension (1, 2 or 3).
        E: Diffusion rate.
        k: Decay rate.
    """

    dimension: int
    E: float
    k: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"kernel dimension must be 1, 2 or 3, not {self.dimension}")
        if self.E <= 0 or self.k <= 0:
            raise ValueError(f"kernel rates must be positive (E={self.E:g}, k={self.k:g})")

    @classmethod
    def from_length(cls, dimension: int, h: float, k: float) -> KernelSpec:
        """Kernel with smoothing length ``h`` at decay rate ``k``."""
        return cls(dimension=dimension, E=k * h * h, k=k)

    @property
    def h(self) -> float:
        return math.sqrt(self.E / self.k)


def radial_weight(dimension: int, r: float | np.ndarray) -> float | np.ndarray:
    """Measure of the shell at distance ``r``: 1, ``2 pi r`` or ``4 pi r^2``."""
    if dimension == 1:
        return np.ones_like(r) if isinstance(r, np.ndarray) else 1.0
    if dimension == 2:
        return 2 * math.pi * r
    return 4 * math.pi * r * r


def kernel_value(spec: KernelSpec, r: float | np.ndarray) -> float | np.ndarray:
    """Kernel density at distance ``r``.

    Args:
        spec: Kernel to evaluate.
        r: Distance (scalar or array), non-negative; positive in 2D and 3D.

    Returns:
        ``exp(-r/h)/h`` in 1D, ``K0(r/h)/(2 pi h^2)`` in 2D, ``exp(-r/h)/(4 pi h^2 r)`` in 3D.

    Raises:
        SingularAtOrigin: ``r`` is zero in 2D or 3D.
    """
    h = spec.h
    distance = np.asarray(r, dtype=float)
    if np.any(distance < 0):
        raise ValueError("kernel distance must be non-negative")
    if spec.dimension > 1 and np.any(distance == 0):
        raise SingularAtOrigin(
            f"{spec.dimension}D kernel is singular at r = 0; sample at least one agent radius away"
        )
    if spec.dimension == 1:
        value = np.exp(-distance / h) / h
    elif spec.dimension == 2:
        value = special.k0(distance / h) / (2 * math.pi * h * h)
    else:
        value = np.exp(-distance / h) / (4 * math.pi * h * h * distance)
    return float(value) if np.ndim(value) == 0 else value


def _radial_integral(spec: KernelSpec, power: int, what: str) -> float:
    """``integral_0^inf r^power W(r) w(r) dr`` by adaptive quadrature over ``r / h``."""
    h = spec.h

    def integrand(u: float) -> float:
        if u == 0.0 and spec.dimension > 1:
            return 0.0
        r = u * h
        return r**power * kernel_value(spec, r) * radial_weight(spec.dimension, r) * h

    value, error, *rest = integrate.quad(integrand, 0.0, np.inf, limit=200, full_output=1)
    if len(rest) > 1:
        raise QuadratureNonConvergence(
            f"{what} of the {spec.dimension}D kernel did not converge: {rest[1]}"
        )
    logger.debug(f"{what} of {spec.dimension}D kernel (h={h:g}): {value:.9g} +- {error:.2g}")
    return value


def kernel_normalization(spec: KernelSpec) -> float:
    """Integral of the kernel over its dimension (1 for a properly normalized kernel).

    Raises:
        QuadratureNonConvergence: The quadrature did not reach its tolerance.
    """
    return _radial_integral(spec, 0, "normalization")


def calibrate_alpha(spec: KernelSpec) -> float:
    """Laplacian constant making the sensed-minus-own estimate exact for quadratic fields.

    ``alpha`` is the second radial moment of the kernel divided by the dimension, so that
    ``(2 / alpha) * (<f> - f)`` returns 2 for ``f = x^2``.

    Raises:
        QuadratureNonConvergence: The quadrature did not reach its tolerance.
    """
    alpha = _radial_integral(spec, 2, "second moment") / spec.dimension
    logger.debug(f"Laplacian constant alpha={alpha:.6g} for h={spec.h:g}")
    return alpha
