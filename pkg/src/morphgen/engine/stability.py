"""Stability numbers of the explicit scheme."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.morphgen.frontend.ast import BinOp, Expr, Group, Heaviside, Lapl, Name, Neg, Num
from src.morphgen.sema.model import CompiledModel, StabilityRequest

logger = logging.getLogger(__name__)

DIFFUSION_LIMIT = 0.25
COURANT_LIMIT = 1.0
PECLET_LIMIT = 2.0


def diffusion_number(D: float, dt: float, dx: float) -> float:
    """``D dt / dx^2``."""
    return D * dt / dx**2


def courant_number(vmax: float, dt: float, dx: float) -> float:
    """``vmax dt / dx``."""
    return vmax * dt / dx


def peclet_number(vmax: float, dx: float, D: float) -> float:
    """``vmax dx / D``; infinite (with a warning) when ``D`` is zero."""
    if D == 0:
        logger.warning("Peclet number with zero diffusion coefficient is infinite")
        return math.inf
    return vmax * dx / D


@dataclass(frozen=True)
class StabilityReport:
    """One computed stability number.

    Attributes:
        kind: ``diffusion``, ``Courant`` or ``Peclet``.
        subject: Field name(s) the number was computed for.
        value: The number.
        limit: Threshold above which the scheme is suspect.
    """

    kind: str
    subject: str
    value: float
    limit: float

    @property
    def exceeded(self) -> bool:
        return self.value > self.limit

    def describe(self) -> str:
        status = "WARNING: exceeds" if self.exceeded else "within"
        return (
            f"{self.kind} number for {self.subject} = {self.value:.6g} "
            f"({status} limit {self.limit:g})"
        )


def _terms(expr: Expr, sign: float = 1.0):
    """Yield ``(sign, term)`` for the top-level sum of an expression."""
    if isinstance(expr, BinOp) and expr.op in "+-":
        yield from _terms(expr.left, sign)
        yield from _terms(expr.right, sign if expr.op == "+" else -sign)
    elif isinstance(expr, Neg):
        yield from _terms(expr.operand, -sign)
    elif isinstance(expr, Group):
        yield from _terms(expr.inner, sign)
    else:
        yield sign, expr


def _factors(expr: Expr) -> tuple[float, list[Expr]] | None:
    """Split a product into its constant coefficient and remaining factors.

    Heaviside gates count as a coefficient of 1. Returns ``None`` when a divisor is not constant.
    """
    if isinstance(expr, BinOp) and expr.op == "*":
        left = _factors(expr.left)
        right = _factors(expr.right)
        if left is None or right is None:
            return None
        return left[0] * right[0], left[1] + right[1]
    if isinstance(expr, BinOp) and expr.op == "/":
        left = _factors(expr.left)
        if left is None or not isinstance(expr.right, Num) or expr.right.value == 0:
            return None
        return left[0] / expr.right.value, left[1]
    if isinstance(expr, Neg):
        inner = _factors(expr.operand)
        return None if inner is None else (-inner[0], inner[1])
    if isinstance(expr, Group):
        return _factors(expr.inner)
    if isinstance(expr, Num):
        return expr.value, []
    if isinstance(expr, Heaviside):
        return 1.0, []
    return 1.0, [expr]


def diffusion_coefficient(expr: Expr | None, field: str) -> float:
    """Total coefficient of ``del^2 field`` in a right-hand side.

    Terms whose coefficient depends on fields are ignored.
    """
    if expr is None:
        return 0.0
    total = 0.0
    for sign, term in _terms(expr):
        split = _factors(term)
        if split is None:
            continue
        coefficient, rest = split
        if len(rest) == 1 and rest[0] == Lapl(Name(field)):
            total += sign * coefficient
    return total


def max_speed(velocity: np.ndarray) -> float:
    return float(np.max(np.hypot(velocity[0], velocity[1])))


def report_stability(
    model: CompiledModel,
    requests: tuple[StabilityRequest, ...] | None = None,
    fields: dict[str, np.ndarray] | None = None,
) -> list[StabilityReport]:
    """Compute the requested stability numbers.

    Args:
        model: Compiled model (diffusion coefficients come from its right-hand sides).
        requests: Requests to evaluate; defaults to the model's own.
        fields: State used for maximum speeds; without it speeds read as zero.

    Returns:
        One report per request, in order. Exceeded limits are logged as warnings.
    """
    requests = model.stability if requests is None else requests
    reports = []
    for request in requests:
        if request.kind == "diffusion":
            (name,) = request.operands
            D = diffusion_coefficient(model.effective_rhs(name), name)
            report = StabilityReport(
                "diffusion", name, diffusion_number(D, model.dt, model.dx), DIFFUSION_LIMIT
            )
        elif request.kind == "Courant":
            (name,) = request.operands
            vmax = max_speed(fields[name]) if fields is not None else 0.0
            report = StabilityReport(
                "Courant", name, courant_number(vmax, model.dt, model.dx), COURANT_LIMIT
            )
        else:
            scalar, vector = request.operands
            vmax = max_speed(fields[vector]) if fields is not None else 0.0
            D = diffusion_coefficient(model.effective_rhs(scalar), scalar)
            report = StabilityReport(
                "Peclet", f"{scalar} and {vector}", peclet_number(vmax, model.dx, D), PECLET_LIMIT
            )
        if report.exceeded:
            logger.warning(report.describe())
        else:
            logger.info(report.describe())
        reports.append(report)
    return reports
