"""Diagnostics for the Morphgen toolchain.

Every error raised by the toolchain derives from ``MorphgenError``. Errors carry an optional
source location and render as ``file:line:col: message``; the CLI maps each family to a stable
exit code (1 usage/IO, 2 parse, 3 semantic/compile, 4 runtime).
"""

from __future__ import annotations

from collections.abc import Iterable


class MorphgenError(Exception):
    """Base class for all toolchain errors.

    Attributes:
        message: Human-readable description without location.
        line: 1-based source line, if known.
        col: 1-based source column, if known.
        file: Source file name, filled in by the caller that knows it.
        exit_code: Process exit code used by the CLI.
    """

    exit_code = 4

    def __init__(
        self,
        message: str,
        line: int | None = None,
        col: int | None = None,
        file: str | None = None,
    ):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.file = file

    def with_file(self, file: str) -> MorphgenError:
        """Attach a file name if none was recorded yet.

        Args:
            file: Path of the source being processed.

        Returns:
            The same error, for re-raising.
        """
        if self.file is None:
            self.file = file
        return self

    def diagnostic(self) -> str:
        """Render the error in ``file:line:col: message`` form."""
        parts = []
        if self.file:
            parts.append(self.file)
        if self.line is not None:
            parts.append(str(self.line))
            if self.col is not None:
                parts.append(str(self.col))
        prefix = ":".join(parts)
        return f"{prefix}: {self.message}" if prefix else self.message

    def __str__(self) -> str:
        return self.diagnostic()


# --- usage / IO (exit 1) -------------------------------------------------------------------


class UsageError(MorphgenError):
    """Invalid command line, configuration or override."""

    exit_code = 1


class IoError(UsageError):
    """A file could not be read or written."""


# --- parse (exit 2) ------------------------------------------------------------------------


class ParseError(MorphgenError):
    """Source text is not a well-formed Morphgen program."""

    exit_code = 2


class LexError(ParseError):
    """Tokenizer failure."""


class MixedIndentation(LexError):
    """Leading whitespace contains a tab."""


class UnterminatedString(LexError):
    """A quoted string runs to the end of its line."""


class UnexpectedCharacter(LexError):
    """A character that cannot start any token."""


class IndentationMismatch(LexError):
    """Indentation that the block structure cannot accept."""


class MorphgenSyntaxError(ParseError):
    """Unexpected token.

    Attributes:
        expected: Token descriptions that would have been accepted.
        found: The offending lexeme.
    """

    def __init__(
        self,
        found: str,
        expected: Iterable[str],
        line: int | None = None,
        col: int | None = None,
    ):
        self.expected = sorted(set(expected))
        self.found = found
        shown = repr(found) if found else "end of input"
        super().__init__(
            f"syntax error: unexpected {shown}, expected one of: {', '.join(self.expected)}",
            line,
            col,
        )


class SectionOrderError(ParseError):
    """Program sections out of the required order."""


class EmptyBracket(ParseError):
    """``[]`` with no content."""


class SubstanceDerivationError(ParseError):
    """``substance X is Y with ...`` is not supported."""


# --- semantic / compile (exit 3) ----------------------------------------------------------


class SemanticError(MorphgenError):
    """Well-formed program with inconsistent meaning."""

    exit_code = 3


class UndeclaredField(SemanticError):
    """A change equation or initialization targets an undeclared field."""


class DuplicateField(SemanticError):
    """A field name is declared twice."""


class DuplicateParameter(SemanticError):
    """A parameter name is defined twice."""


class DuplicateBaseEquation(SemanticError):
    """Two ``D X =`` (or two algebraic) statements target one field."""

    def __init__(self, field: str, line: int | None = None, col: int | None = None):
        self.field = field
        super().__init__(f"field '{field}' has more than one base equation", line, col)


class ConflictingEquations(SemanticError):
    """A field has both an algebraic assignment and change equations."""


class UnknownIdentifier(SemanticError):
    """A name is neither a field, a parameter, a let binding nor a builtin."""


class UnknownFunction(SemanticError):
    """Call of a function that is not a builtin."""


class RecursiveDefinition(SemanticError):
    """Parameters that depend on each other cyclically."""


class NonConstantExpression(SemanticError):
    """An expression that must be constant refers to fields or time."""


class BodyOfUnknownSubstance(SemanticError):
    """A body names a substance that does not exist."""


class InvalidRegion(SemanticError):
    """Region bounds out of order or non-positive radius."""


class InvalidSimulationParameter(SemanticError):
    """Missing or non-positive duration or resolution, or inverted space bounds."""


class KindMismatch(SemanticError):
    """Scalar/vector kinds that do not fit an operator or target.

    Attributes:
        expected: Kind that was required.
        found: Kind that was supplied.
    """

    def __init__(
        self,
        message: str,
        expected: str,
        found: str,
        line: int | None = None,
        col: int | None = None,
    ):
        self.expected = expected
        self.found = found
        super().__init__(f"{message}: expected {expected}, found {found}", line, col)


class NonConservativeDensity(SemanticError):
    """The swarm density field has an explicit change equation."""


class UnsupportedConstruct(SemanticError):
    """A construct with no Lagrangian reading."""


# --- runtime (exit 4) ---------------------------------------------------------------------


class MorphgenRuntimeError(MorphgenError):
    """Failure while executing a simulation or writing its outputs."""

    exit_code = 4


class GridTooSmall(MorphgenRuntimeError):
    """Fewer than three cells along an axis."""


class NonFiniteField(MorphgenRuntimeError):
    """NaN or infinity appeared in a field."""

    def __init__(self, field: str, step: int):
        self.field = field
        self.step = step
        super().__init__(f"field '{field}' became non-finite at step {step}")


class ZeroDensity(MorphgenRuntimeError):
    """Production rate requested with non-positive local density."""


class OutOfDomain(MorphgenRuntimeError):
    """A sample point lies outside the simulated space."""


class SingularAtOrigin(MorphgenRuntimeError):
    """A 2D or 3D kernel evaluated at distance zero."""


class QuadratureNonConvergence(MorphgenRuntimeError):
    """Adaptive quadrature did not reach its tolerance."""


class NonConvergence(MorphgenRuntimeError):
    """A calibration scenario did not reach steady state."""

    def __init__(self, speed: float, steps: int):
        self.speed = speed
        self.steps = steps
        super().__init__(f"self-gradient at speed {speed:g} did not settle within {steps} steps")


class GeometryMismatch(MorphgenRuntimeError):
    """Archive grid differs from the model grid."""


class BadMagic(MorphgenRuntimeError):
    """File is not an MGF1 archive."""


class MissingField(MorphgenRuntimeError):
    """Archive lacks a requested plane."""


class DegenerateLimits(MorphgenRuntimeError):
    """Rendering limits are not finite or not increasing."""
