"""Resolved model types produced by semantic analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.morphgen.frontend.ast import BinOp, Expr, FieldKind, Neg

FieldValue = float | tuple[float, float]


@dataclass(frozen=True)
class BoxRegion:
    """Open rectangle ``xlo < x < xhi, ylo < y < yhi``."""

    xlo: float
    xhi: float
    ylo: float
    yhi: float

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (self.xlo < x) & (x < self.xhi) & (self.ylo < y) & (y < self.yhi)

    def intersects(self, other: BoxRegion) -> bool:
        return (
            self.xlo < other.xhi
            and other.xlo < self.xhi
            and self.ylo < other.yhi
            and other.ylo < self.yhi
        )

    @property
    def width(self) -> float:
        return self.xhi - self.xlo

    @property
    def height(self) -> float:
        return self.yhi - self.ylo


@dataclass(frozen=True)
class DiscRegion:
    """Closed disc of points within ``radius`` of ``(cx, cy)``."""

    cx: float
    cy: float
    radius: float

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.hypot(x - self.cx, y - self.cy) <= self.radius

    def intersects(self, other: BoxRegion) -> bool:
        nearest_x = min(max(self.cx, other.xlo), other.xhi)
        nearest_y = min(max(self.cy, other.ylo), other.yhi)
        return bool(np.hypot(nearest_x - self.cx, nearest_y - self.cy) <= self.radius)


NumericRegion = BoxRegion | DiscRegion


@dataclass(frozen=True)
class UpdateSpec:
    """Change equations merged for one field.

    Attributes:
        base: Right-hand side of the field's ``D X =`` statement, if any.
        partials: ``(sign, expr)`` pairs from ``D X +=`` (+1) and ``D X -=`` (-1), in source
            order across all substances.
    """

    base: Expr | None = None
    partials: tuple[tuple[int, Expr], ...] = ()

    @property
    def is_static(self) -> bool:
        return self.base is None and not self.partials

    def effective(self) -> Expr | None:
        """Base (or zero) plus the signed partials, or ``None`` for a static field."""
        result = self.base
        for sign, term in self.partials:
            if result is None:
                result = term if sign > 0 else Neg(term, line=term.line, col=term.col)
            else:
                op = "+" if sign > 0 else "-"
                result = BinOp(op, result, term, line=term.line, col=term.col)
        return result


@dataclass(frozen=True)
class Algebraic:
    """Field recomputed from the current state every step (``X = e`` or ``let X = e``)."""

    field: str
    expr: Expr
    substance: str


@dataclass(frozen=True)
class LoweredInit:
    region: NumericRegion
    values: tuple[tuple[str, FieldValue], ...]


@dataclass(frozen=True)
class LoweredBody:
    name: str
    substance: str
    inits: tuple[LoweredInit, ...]


@dataclass(frozen=True)
class DisplayPlan:
    """A running/final display or a movie of one field.

    Attributes:
        time: ``running`` or ``final`` (movies are always ``running``).
        field: Field name.
        kind: ``mesh``, ``contours``, ``colors`` or ``quivers``.
        limits: Fixed color limits, or ``None`` for per-frame min/max.
        pitch: Quiver mesh pitch in space units, or ``None`` for the default.
        options: Opaque options text.
        movie: Movie file name for ``make movie`` commands.
    """

    time: str
    field: str
    kind: str
    limits: tuple[float, float] | None = None
    pitch: float | None = None
    options: str = ""
    movie: str | None = None


@dataclass(frozen=True)
class StabilityRequest:
    kind: str
    operands: tuple[str, ...]


@dataclass(frozen=True)
class FileTransfer:
    fields: tuple[str, ...]
    filename: str


@dataclass
class CompiledModel:
    """Resolved program ready for execution.

    Attributes:
        name: Program name.
        space: Simulated rectangle.
        dx: Cell size (1 / spatial resolution).
        dt: Step size (1 / temporal resolution).
        duration: Simulated time span.
        fields: Field name to kind, in declaration order.
        owners: Field name to declaring substance.
        params: Folded parameter values, in definition order.
        overrides: Parameters whose values came from overrides.
        updates: Field name to merged change equations (every field present).
        algebraic: Algebraic assignments in source order.
        bodies: Bodies lowered to numeric regions and values.
        displays: Display and movie plan.
        stability: Stability report requests.
        saves: Fields written at the end of a run.
        loads: Fields read before the first step.
        log_params: Parameters selected for the run log.
        notes: ``log note`` texts.
    """

    name: str
    space: BoxRegion
    dx: float
    dt: float
    duration: float
    fields: dict[str, FieldKind]
    owners: dict[str, str] = field(default_factory=dict)
    params: dict[str, float] = field(default_factory=dict)
    overrides: dict[str, float] = field(default_factory=dict)
    updates: dict[str, UpdateSpec] = field(default_factory=dict)
    algebraic: tuple[Algebraic, ...] = ()
    bodies: tuple[LoweredBody, ...] = ()
    displays: tuple[DisplayPlan, ...] = ()
    stability: tuple[StabilityRequest, ...] = ()
    saves: tuple[FileTransfer, ...] = ()
    loads: tuple[FileTransfer, ...] = ()
    log_params: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def integrated_fields(self) -> list[str]:
        """Fields with a non-empty change equation."""
        return [name for name, spec in self.updates.items() if not spec.is_static]

    @property
    def algebraic_fields(self) -> list[str]:
        return [a.field for a in self.algebraic]

    def effective_rhs(self, name: str) -> Expr | None:
        return self.updates[name].effective()
