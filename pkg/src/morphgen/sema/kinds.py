"""Scalar/vector kind checking."""

from __future__ import annotations

import logging
from collections.abc import Mapping

from src.morphgen.errors import KindMismatch
from src.morphgen.frontend.ast import (
    BinOp,
    BoolOp,
    Call,
    Compare,
    Cond,
    Divergence,
    Expr,
    FieldKind,
    Grad,
    Group,
    Heaviside,
    Lapl,
    Name,
    Neg,
    Noise,
    Norm,
    Num,
    Pow,
    Time,
)
from src.morphgen.sema.model import CompiledModel

logger = logging.getLogger(__name__)

SCALAR: FieldKind = "scalar"
VECTOR: FieldKind = "vector"


def _require(kind: str, expected: str, what: str, node) -> None:
    if kind != expected:
        raise KindMismatch(what, expected, kind, node.line, node.col)


def kindcheck(expr: Expr, env: Mapping[str, FieldKind]) -> FieldKind:
    """Infer the kind of an expression.

    Names missing from ``env`` are treated as scalars (folded parameters and constants).

    Args:
        expr: Resolved expression.
        env: Field name to kind.

    Returns:
        ``"scalar"`` or ``"vector"``.

    Raises:
        KindMismatch: An operator receives an operand of the wrong kind.
    """
    match expr:
        case Num() | Time() | Heaviside():
            if isinstance(expr, Heaviside):
                _check_condition(expr.cond, env)
            return SCALAR
        case Name(id=name):
            return env.get(name, SCALAR)
        case Neg(operand=operand) | Group(inner=operand):
            return kindcheck(operand, env)
        case BinOp(op=op, left=left, right=right):
            a = kindcheck(left, env)
            b = kindcheck(right, env)
            if op in "+-":
                _require(b, a, f"operands of '{op}'", expr)
                return a
            if op == "*":
                if a == VECTOR and b == VECTOR:
                    raise KindMismatch(
                        "product of two vectors (use dot)", SCALAR, VECTOR, expr.line, expr.col
                    )
                return VECTOR if VECTOR in (a, b) else SCALAR
            _require(b, SCALAR, "divisor", expr)
            return a
        case Pow(base=base, exponent=exponent):
            _require(kindcheck(base, env), SCALAR, "base of '^'", expr)
            _require(kindcheck(exponent, env), SCALAR, "exponent of '^'", expr)
            return SCALAR
        case Noise(weight=weight, arity=arity):
            weight_kind = SCALAR if weight is None else kindcheck(weight, env)
            if weight_kind == VECTOR:
                return SCALAR if arity == 2 else VECTOR
            return VECTOR if arity == 2 else SCALAR
        case Grad(operand=operand):
            _require(kindcheck(operand, env), SCALAR, "operand of 'del'", expr)
            return VECTOR
        case Lapl(operand=operand):
            return kindcheck(operand, env)
        case Divergence(operand=operand):
            _require(kindcheck(operand, env), VECTOR, "operand of 'div'", expr)
            return SCALAR
        case Norm(operand=operand):
            _require(kindcheck(operand, env), VECTOR, "operand of '||.||'", expr)
            return SCALAR
        case Call():
            return _call_kind(expr, env)
    raise TypeError(f"cannot kind-check {expr!r}")


def _call_kind(expr: Call, env: Mapping[str, FieldKind]) -> FieldKind:
    kinds = [kindcheck(arg, env) for arg in expr.args]
    if expr.func == "sensed":
        return kinds[0]
    if expr.func == "dot":
        for arg, kind in zip(expr.args, kinds, strict=True):
            _require(kind, VECTOR, "argument of 'dot'", arg)
        return SCALAR
    for arg, kind in zip(expr.args, kinds, strict=True):
        _require(kind, SCALAR, f"argument of '{expr.func}'", arg)
    return VECTOR if expr.func == "vec" else SCALAR


def _check_condition(cond: Cond, env: Mapping[str, FieldKind]) -> None:
    if isinstance(cond, BoolOp):
        _check_condition(cond.left, env)
        _check_condition(cond.right, env)
        return
    assert isinstance(cond, Compare)
    _require(kindcheck(cond.left, env), SCALAR, "comparison operand", cond.left)
    _require(kindcheck(cond.right, env), SCALAR, "comparison operand", cond.right)


def check_update_kinds(model: CompiledModel) -> None:
    """Verify every equation produces the kind of the field it updates.

    Raises:
        KindMismatch: Naming the field whose right-hand side has the wrong kind.
    """
    for name, spec in model.updates.items():
        rhs = spec.effective()
        if rhs is None:
            continue
        kind = kindcheck(rhs, model.fields)
        if kind != model.fields[name]:
            raise KindMismatch(
                f"change equation for field '{name}'", model.fields[name], kind, rhs.line, rhs.col
            )
    for assignment in model.algebraic:
        kind = kindcheck(assignment.expr, model.fields)
        if kind != model.fields[assignment.field]:
            raise KindMismatch(
                f"assignment to field '{assignment.field}'",
                model.fields[assignment.field],
                kind,
                assignment.expr.line,
                assignment.expr.col,
            )
    logger.debug(f"Kinds checked for {len(model.updates)} fields")
