"""Expression evaluation shared by every backend.

``Evaluator`` interprets resolved expression trees with numpy arithmetic. Scalars are arrays of
the evaluator's ``shape`` (or plain floats when constant) and vectors carry a leading axis of
length 2. Subclasses supply what a backend means by a field reference, the time symbol, the
spatial operators and noise.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Mapping

import numpy as np

from src.morphgen.errors import NonConstantExpression, UnknownIdentifier
from src.morphgen.frontend.ast import (
    BinOp,
    BoolOp,
    Call,
    Compare,
    Cond,
    Divergence,
    Expr,
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

Value = float | np.ndarray

UNARY_FUNCTIONS: dict[str, Callable[[Value], Value]] = {
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "arccos": np.arccos,
    "abs": np.abs,
}
BINARY_FUNCTIONS: dict[str, Callable[[Value, Value], Value]] = {
    "min": np.minimum,
    "max": np.maximum,
}
BUILTIN_ARITY: dict[str, int] = {
    **{name: 1 for name in UNARY_FUNCTIONS},
    **{name: 2 for name in BINARY_FUNCTIONS},
    "dot": 2,
    "vec": 2,
    "sensed": 1,
}
CONSTANTS: dict[str, float] = {"pi": math.pi}

_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


class Evaluator(ABC):
    """Abstract interpreter for resolved expressions.

    Attributes:
        shape: Shape of one scalar value (``(ny, nx)`` for grids, ``(N,)`` for agents, ``()``
            for constants).
    """

    shape: tuple[int, ...] = ()

    def evaluate(self, expr: Expr) -> Value:
        """Evaluate an expression.

        Args:
            expr: Resolved expression (names are fields; parameters already folded).

        Returns:
            A scalar value or a vector value with a leading component axis.
        """
        match expr:
            case Num(value=value):
                return value
            case Name():
                return self.name(expr)
            case Time():
                return self.time()
            case Neg(operand=operand):
                return -self.evaluate(operand)
            case BinOp(op=op, left=left, right=right):
                a = self.evaluate(left)
                b = self.evaluate(right)
                if op == "+":
                    return a + b
                if op == "-":
                    return a - b
                if op == "*":
                    return a * b
                return a / b
            case Pow(base=base, exponent=exponent):
                return np.power(self.evaluate(base), self.evaluate(exponent))
            case Group(inner=inner):
                return self.evaluate(inner)
            case Heaviside(cond=cond):
                return np.asarray(self.condition(cond), dtype=float) + 0.0
            case Noise(weight=weight, arity=arity):
                weight_value = 1.0 if weight is None else self.evaluate(weight)
                return self.noise(expr, weight_value, arity)
            case Grad(operand=operand):
                return self.gradient(self.evaluate(operand))
            case Lapl(operand=operand):
                value = self.evaluate(operand)
                if np.ndim(value) > len(self.shape):
                    return np.stack([self.laplacian(component) for component in value])
                return self.laplacian(value)
            case Divergence(operand=operand):
                return self.divergence(self.evaluate(operand))
            case Norm(operand=operand):
                value = self.evaluate(operand)
                return np.hypot(value[0], value[1])
            case Call():
                return self.call(expr)
        raise TypeError(f"cannot evaluate {expr!r}")

    def condition(self, cond: Cond) -> Value:
        if isinstance(cond, Compare):
            return _COMPARE[cond.op](self.evaluate(cond.left), self.evaluate(cond.right))
        left = self.condition(cond.left)
        right = self.condition(cond.right)
        if cond.op == "and":
            return np.logical_and(left, right)
        return np.logical_or(left, right)

    def call(self, expr: Call) -> Value:
        func = expr.func
        if func == "sensed":
            return self.sensed(expr.args[0])
        args = [self.evaluate(arg) for arg in expr.args]
        if func in UNARY_FUNCTIONS:
            return UNARY_FUNCTIONS[func](args[0])
        if func in BINARY_FUNCTIONS:
            return BINARY_FUNCTIONS[func](args[0], args[1])
        if func == "dot":
            a, b = args
            return a[0] * b[0] + a[1] * b[1]
        if func == "vec":
            return np.stack([np.broadcast_to(a, self.shape) for a in args]).astype(float)
        raise UnknownIdentifier(f"unknown function '{func}'", expr.line, expr.col)

    def broadcast(self, value: Value, vector: bool = False) -> np.ndarray:
        """Expand a (possibly constant) value to a full scalar or vector array."""
        shape = (2, *self.shape) if vector else self.shape
        return np.array(np.broadcast_to(value, shape), dtype=float)

    @abstractmethod
    def name(self, node: Name) -> Value:
        """Value of a field reference."""
        pass

    @abstractmethod
    def time(self) -> Value:
        """Value of the time symbol."""
        pass

    def sensed(self, node: Expr) -> Value:
        """Locally sensed estimate of a field; identical to the field itself by default."""
        return self.evaluate(node)

    @abstractmethod
    def gradient(self, value: Value) -> Value:
        pass

    @abstractmethod
    def laplacian(self, value: Value) -> Value:
        pass

    @abstractmethod
    def divergence(self, value: Value) -> Value:
        pass

    @abstractmethod
    def noise(self, node: Noise, weight: Value, arity: int) -> Value:
        """Weighted standard-normal samples for one noise term."""
        pass


class ConstantEvaluator(Evaluator):
    """Evaluates expressions that may only use numbers, parameters and builtin constants.

    Args:
        lookup: Resolves a parameter name to its value; returns ``None`` for unknown names.
        fields: Declared field names, reported as non-constant when referenced.
        what: Description of the expression for diagnostics.
    """

    def __init__(
        self,
        lookup: Callable[[str], float | None] | Mapping[str, float],
        fields: Mapping[str, str] | None = None,
        what: str = "expression",
    ):
        self.lookup = lookup.get if isinstance(lookup, Mapping) else lookup
        self.fields = fields or {}
        self.what = what

    def name(self, node: Name) -> Value:
        if node.id in self.fields:
            raise NonConstantExpression(
                f"{self.what} must be constant but refers to field '{node.id}'",
                node.line,
                node.col,
            )
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        value = self.lookup(node.id)
        if value is None:
            raise UnknownIdentifier(f"unknown identifier '{node.id}'", node.line, node.col)
        return value

    def time(self) -> Value:
        raise NonConstantExpression(f"{self.what} must be constant but refers to time 't'")

    def _not_constant(self, what: str) -> NonConstantExpression:
        return NonConstantExpression(f"{self.what} must be constant but applies {what}")

    def gradient(self, value: Value) -> Value:
        raise self._not_constant("'del'")

    def laplacian(self, value: Value) -> Value:
        raise self._not_constant("'del^2'")

    def divergence(self, value: Value) -> Value:
        raise self._not_constant("'div'")

    def noise(self, node: Noise, weight: Value, arity: int) -> Value:
        raise self._not_constant("a noise term")

    def sensed(self, node: Expr) -> Value:
        raise self._not_constant("'sensed'")
