"""Per-agent SPH estimate formulas."""

from __future__ import annotations

import numpy as np

from src.morphgen.errors import ZeroDensity


def production_rate(
    k: float, m: float, rho: float | np.ndarray, f: float | np.ndarray
) -> float | np.ndarray:
    """Emission rate ``k m f / rho`` that makes the sensed sum an SPH estimate of ``f``.

    Raises:
        ZeroDensity: Some local density estimate is not positive.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise ZeroDensity(
            f"production rate needs a positive local density, got min {float(np.min(rho)):g}"
        )
    rate = k * m * np.asarray(f, dtype=float) / rho
    return float(rate) if rate.ndim == 0 else rate


def density_rate(k: float, m: float) -> float:
    """Emission rate of the density channel, whose sensed sum estimates the swarm density."""
    return k * m


def estimate_laplacian(
    sensed: float | np.ndarray, own: float | np.ndarray, alpha: float
) -> float | np.ndarray:
    """Derivative-free Laplacian ``(2 / alpha) * (sensed - own)``."""
    if alpha <= 0:
        raise ValueError(f"Laplacian constant must be positive, got {alpha:g}")
    return (2.0 / alpha) * (np.asarray(sensed) - np.asarray(own))


def update_correction(
    g: float | np.ndarray, delta_f: float | np.ndarray, k: float, dt: float
) -> float | np.ndarray:
    """Advance the transient correction: ``g + delta_f - k g dt``.

    A field changing at a constant rate ``a`` drives ``g`` toward ``a / k``, the lag of the
    sensed channel behind the field.
    """
    if dt <= 0:
        raise ValueError(f"step size must be positive, got {dt:g}")
    return g + (delta_f - k * g * dt)
