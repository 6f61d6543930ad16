"""Canonical source text for syntax trees.

Output reparses to a structurally equal tree: products are written with explicit ``*``,
parentheses are inserted from operator precedence, and comparison chains come out as
``and``-joined comparisons.
"""

from __future__ import annotations

import re

from src.morphgen.frontend.ast import (
    AssignStmt,
    BinOp,
    BodyAst,
    BoolOp,
    Box,
    Call,
    ChangeStmt,
    Compare,
    Cond,
    Disc,
    Display,
    Divergence,
    Expr,
    FieldInit,
    Grad,
    Group,
    Heaviside,
    KindSpec,
    Lapl,
    LetDef,
    Movie,
    Name,
    Neg,
    Noise,
    Norm,
    Num,
    ParamDef,
    Pow,
    ProgramAst,
    SimParamsAst,
    StabilityReportCmd,
    Stmt,
    SubstanceAst,
    Time,
    VizCmd,
)
from src.morphgen.frontend.lexer import KEYWORDS

INDENT = "    "
CHANGE_OPS = {"assign": "=", "add": "+=", "sub": "-="}

_BARE_FILENAME = re.compile(
    r"(?:\.{1,2}/)?(?:[A-Za-z_][\w\-]*/)*[A-Za-z_][\w\-]*\.[A-Za-z][A-Za-z0-9]*"
)

_SUM, _TERM, _UNARY, _POWER, _FIELD_OP, _PRIMARY = range(1, 7)


def _precedence(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _SUM if expr.op in ("+", "-") else _TERM
    if isinstance(expr, Neg):
        return _UNARY
    if isinstance(expr, Num) and expr.value < 0:
        return _UNARY
    if isinstance(expr, Pow):
        return _POWER
    if isinstance(expr, (Grad, Lapl, Divergence)):
        return _FIELD_OP
    return _PRIMARY


def _format_number(num: Num) -> str:
    if num.text:
        return num.text
    if num.value == int(num.value) and abs(num.value) < 1e15:
        return str(int(num.value))
    return repr(num.value)


def format_expr(expr: Expr, context: int = 0) -> str:
    """Render an expression, parenthesized if it binds looser than ``context``."""
    text = _format(expr)
    if _precedence(expr) < context:
        return f"({text})"
    return text


def _format(expr: Expr) -> str:
    match expr:
        case Num():
            return _format_number(expr)
        case Name(id=name):
            return name
        case Time():
            return "t"
        case Neg(operand=operand):
            return f"-{format_expr(operand, _UNARY)}"
        case BinOp(op=op, left=left, right=right) if op in ("+", "-"):
            return f"{format_expr(left, _SUM)} {op} {format_expr(right, _TERM)}"
        case BinOp(op=op, left=left, right=right):
            return f"{format_expr(left, _TERM)} {op} {format_expr(right, _UNARY)}"
        case Pow(base=base, exponent=exponent):
            return f"{format_expr(base, _FIELD_OP)}^{format_expr(exponent, _UNARY)}"
        case Grad(operand=operand):
            return f"del {format_expr(operand, _FIELD_OP)}"
        case Lapl(operand=operand):
            return f"del^2 {format_expr(operand, _FIELD_OP)}"
        case Divergence(operand=operand):
            return f"div {format_expr(operand, _FIELD_OP)}"
        case Group(inner=inner):
            return f"[{format_expr(inner)}]"
        case Heaviside(cond=cond):
            return f"[{format_cond(cond)}]"
        case Noise(weight=weight, arity=arity):
            prefix = f"{format_expr(weight)} " if weight is not None else ""
            return f"[{prefix}DW^{arity}]"
        case Norm(operand=operand):
            return f"||{format_expr(operand)}||"
        case Call(func=func, args=args):
            return f"{func}({', '.join(format_expr(a) for a in args)})"
    raise TypeError(f"not an expression node: {expr!r}")


def format_cond(cond: Cond) -> str:
    if isinstance(cond, Compare):
        return f"{format_expr(cond.left)} {cond.op} {format_expr(cond.right)}"
    left = format_cond(cond.left)
    right = format_cond(cond.right)
    return f"{left} {cond.op} {right}"


def format_filename(name: str) -> str:
    if _BARE_FILENAME.fullmatch(name) or (name.isidentifier() and name not in KEYWORDS):
        return name
    return f'"{name}"'


def format_stmt(stmt: Stmt) -> str:
    match stmt:
        case ParamDef(name=name, expr=expr):
            return f"param {name} = {format_expr(expr)}"
        case LetDef(name=name, expr=expr):
            return f"let {name} = {format_expr(expr)}"
        case ChangeStmt(target=target, mode=mode, rhs=rhs):
            return f"D {target} {CHANGE_OPS[mode]} {format_expr(rhs)}"
        case AssignStmt(target=target, rhs=rhs):
            return f"{target} = {format_expr(rhs)}"
    raise TypeError(f"not a statement: {stmt!r}")


def format_region(region: Box | Disc) -> str:
    if isinstance(region, Disc):
        return (
            f"(x, y) within {format_expr(region.radius)} of "
            f"({format_expr(region.cx)}, {format_expr(region.cy)})"
        )
    return (
        f"{format_expr(region.xlo)} < x < {format_expr(region.xhi)}, "
        f"{format_expr(region.ylo)} < y < {format_expr(region.yhi)}"
    )


def _format_kind(kind: KindSpec) -> str:
    text = kind.name
    if kind.limits is not None:
        lo, hi = kind.limits
        text += f" limits ({format_expr(lo)}, {format_expr(hi)})"
    if kind.pitch is not None:
        text += f" {format_expr(kind.pitch)} mesh"
    return text


def format_viz(cmd: VizCmd) -> str:
    match cmd:
        case Display(time=time, field=field, kind=kind, options=options):
            text = f"display {time} {field} as {_format_kind(kind)}"
        case Movie(filename=filename, field=field, kind=kind, options=options):
            text = f"make movie {format_filename(filename)} of {field} as {_format_kind(kind)}"
        case StabilityReportCmd(kind=kind, operands=operands):
            return f"report {kind} number for {' and '.join(operands)}"
        case _:
            raise TypeError(f"not a visualization command: {cmd!r}")
    return f"{text} {options}" if options else text


def _sim_lines(sim: SimParamsAst) -> list[str]:
    lines = []
    if sim.duration is not None:
        lines.append(f"duration = {format_expr(sim.duration)}")
    if sim.temporal_resolution is not None:
        lines.append(f"temporal resolution = {format_expr(sim.temporal_resolution)}")
    if sim.spatial_resolution is not None:
        lines.append(f"spatial resolution = {format_expr(sim.spatial_resolution)}")
    if sim.space is not None:
        lines.append(f"space {format_region(sim.space)}")
    for verb, preposition, directives in (("save", "to", sim.saves), ("load", "from", sim.loads)):
        for directive in directives:
            names = ", ".join(directive.fields)
            lines.append(f"{verb} {names} {preposition} {format_filename(directive.filename)}")
    if sim.log_params:
        lines.append(f"log params {', '.join(sim.log_params)}")
    lines.extend(f"log note {note}".rstrip() for note in sim.notes)
    lines.extend(format_stmt(p) for p in sim.params)
    return lines


def _substance_lines(substance: SubstanceAst) -> list[str]:
    lines = [f"substance {substance.name}:"]
    lines.extend(f"{INDENT}{d.kind} field {d.name}" for d in substance.field_decls)
    if substance.behavior:
        lines.append(f"{INDENT}behavior:")
        lines.extend(f"{INDENT * 2}{format_stmt(s)}" for s in substance.behavior)
    return lines


def _assignments(assignments: tuple[FieldInit, ...]) -> str:
    return ", ".join(f"{a.field} = {format_expr(a.expr)}" for a in assignments)


def _body_lines(body: BodyAst) -> list[str]:
    lines = [f"body {body.name} of {body.substance}:"]
    lines.extend(
        f"{INDENT}for {format_region(i.region)}: {_assignments(i.assignments)}" for i in body.inits
    )
    return lines


def format_program(program: ProgramAst) -> str:
    """Render a whole program as canonical source text."""
    out = [f"morphogenetic program {program.name}:"]

    def section(lines: list[str]) -> None:
        out.extend(f"{INDENT}{line}" for line in lines)

    sim = _sim_lines(program.sim_params)
    if sim:
        section(["simulation parameters:", *(f"{INDENT}{line}" for line in sim)])
    for substance in program.substances:
        section(_substance_lines(substance))
    for body in program.bodies:
        section(_body_lines(body))
    if program.viz:
        section(["visualization:", *(f"{INDENT}{format_viz(c)}" for c in program.viz)])
    out.append("end program")
    return "\n".join(out) + "\n"
