"""Syntax tree for Morphgen programs.

Nodes are frozen dataclasses. Source positions (``line``, ``col``) are carried for diagnostics
but excluded from equality, so two trees compare equal when they have the same structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Union

FieldKind = Literal["scalar", "vector"]
ChangeMode = Literal["assign", "add", "sub"]


def _pos() -> int:
    return field(default=0, compare=False, repr=False)


# --- expressions ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    text: str = field(default="", compare=False, repr=False)
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Name:
    id: str
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Time:
    """The builtin simulated-time symbol ``t``."""

    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Neg:
    operand: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class BinOp:
    op: Literal["+", "-", "*", "/"]
    left: Expr
    right: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Pow:
    base: Expr
    exponent: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Group:
    """Bracket used for grouping, e.g. ``[C * V]``."""

    inner: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Compare:
    op: Literal["<", "<=", ">", ">="]
    left: Expr
    right: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class BoolOp:
    op: Literal["and", "or"]
    left: Cond
    right: Cond
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Heaviside:
    """Bracketed condition evaluating to 1 where it holds and 0 elsewhere."""

    cond: Cond
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Noise:
    """``[M DW^n]``: weight ``M`` (``None`` for unit weight) times ``n`` normal samples."""

    weight: Expr | None
    arity: int
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Grad:
    operand: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Lapl:
    operand: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Divergence:
    operand: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Norm:
    operand: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Expr, ...]
    line: int = _pos()
    col: int = _pos()


Expr = Union[
    Num, Name, Time, Neg, BinOp, Pow, Group, Heaviside, Noise, Grad, Lapl, Divergence, Norm, Call
]
Cond = Union[Compare, BoolOp]


# --- statements ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamDef:
    name: str
    expr: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class LetDef:
    name: str
    expr: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class ChangeStmt:
    """``D X = e`` (assign), ``D X += e`` (add) or ``D X -= e`` (sub)."""

    target: str
    mode: ChangeMode
    rhs: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class AssignStmt:
    """``X = e`` without ``D``: algebraic, recomputed every step."""

    target: str
    rhs: Expr
    line: int = _pos()
    col: int = _pos()


Stmt = Union[ParamDef, LetDef, ChangeStmt, AssignStmt]


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: FieldKind
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class SubstanceAst:
    name: str
    field_decls: tuple[FieldDecl, ...]
    behavior: tuple[Stmt, ...]
    line: int = _pos()
    col: int = _pos()


# --- bodies --------------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """``xlo < x < xhi, ylo < y < yhi``."""

    xlo: Expr
    xhi: Expr
    ylo: Expr
    yhi: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Disc:
    """``(x, y) within radius of (cx, cy)``."""

    cx: Expr
    cy: Expr
    radius: Expr
    line: int = _pos()
    col: int = _pos()


Region = Union[Box, Disc]


@dataclass(frozen=True)
class FieldInit:
    field: str
    expr: Expr
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Init:
    region: Region
    assignments: tuple[FieldInit, ...]
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class BodyAst:
    name: str
    substance: str
    inits: tuple[Init, ...]
    line: int = _pos()
    col: int = _pos()


# --- simulation parameters -----------------------------------------------------------------


@dataclass(frozen=True)
class FileDirective:
    """``save``/``load`` of field names to or from a file."""

    fields: tuple[str, ...]
    filename: str
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class SimParamsAst:
    duration: Expr | None = None
    temporal_resolution: Expr | None = None
    spatial_resolution: Expr | None = None
    space: Box | None = None
    saves: tuple[FileDirective, ...] = ()
    loads: tuple[FileDirective, ...] = ()
    log_params: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()
    params: tuple[ParamDef, ...] = ()
    line: int = _pos()
    col: int = _pos()


# --- visualization -------------------------------------------------------------------------


@dataclass(frozen=True)
class KindSpec:
    """Display kind with its optional limits or quiver mesh pitch."""

    name: Literal["mesh", "contours", "colors", "quivers"]
    limits: tuple[Expr, Expr] | None = None
    pitch: Expr | None = None


@dataclass(frozen=True)
class Display:
    time: Literal["running", "final"]
    field: str
    kind: KindSpec
    options: str = ""
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class Movie:
    filename: str
    field: str
    kind: KindSpec
    options: str = ""
    line: int = _pos()
    col: int = _pos()


@dataclass(frozen=True)
class StabilityReportCmd:
    kind: Literal["diffusion", "Courant", "Peclet"]
    operands: tuple[str, ...]
    line: int = _pos()
    col: int = _pos()


VizCmd = Union[Display, Movie, StabilityReportCmd]


@dataclass(frozen=True)
class ProgramAst:
    name: str
    sim_params: SimParamsAst
    substances: tuple[SubstanceAst, ...]
    bodies: tuple[BodyAst, ...]
    viz: tuple[VizCmd, ...]
    line: int = _pos()
    col: int = _pos()
