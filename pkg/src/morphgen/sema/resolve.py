"""Name resolution, equation merging and constant folding."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping

import numpy as np

from src.morphgen.errors import (
    BodyOfUnknownSubstance,
    ConflictingEquations,
    DuplicateBaseEquation,
    DuplicateField,
    DuplicateParameter,
    InvalidRegion,
    InvalidSimulationParameter,
    KindMismatch,
    NonConstantExpression,
    RecursiveDefinition,
    SemanticError,
    UndeclaredField,
    UnknownFunction,
    UnknownIdentifier,
    UsageError,
)
from src.morphgen.frontend.ast import (
    AssignStmt,
    BinOp,
    BodyAst,
    Box,
    Call,
    ChangeStmt,
    Display,
    Expr,
    FieldKind,
    Group,
    LetDef,
    Movie,
    Name,
    Neg,
    Num,
    ParamDef,
    Pow,
    ProgramAst,
    Region,
    StabilityReportCmd,
    Time,
)
from src.morphgen.sema.evaluate import (
    BUILTIN_ARITY,
    CONSTANTS,
    UNARY_FUNCTIONS,
    ConstantEvaluator,
)
from src.morphgen.sema.model import (
    Algebraic,
    BoxRegion,
    CompiledModel,
    DiscRegion,
    DisplayPlan,
    FieldValue,
    FileTransfer,
    LoweredBody,
    LoweredInit,
    NumericRegion,
    StabilityRequest,
    UpdateSpec,
)
from src.morphgen.sema.tree import names, transform, walk

logger = logging.getLogger(__name__)

_FOLD_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
}


class ParameterTable:
    """Parameter definitions folded to numbers on demand.

    Parameters may refer to each other in any order; cycles are rejected.

    Args:
        definitions: Parameter definitions in source order.
        fields: Declared fields (not allowed in parameter expressions).
        overrides: Values replacing the defined expressions before folding.
    """

    def __init__(
        self,
        definitions: list[ParamDef],
        fields: Mapping[str, FieldKind],
        overrides: Mapping[str, float] | None = None,
    ):
        self.definitions: dict[str, ParamDef] = {}
        for definition in definitions:
            if definition.name in self.definitions:
                raise DuplicateParameter(
                    f"parameter '{definition.name}' is defined more than once",
                    definition.line,
                    definition.col,
                )
            if definition.name in fields:
                raise DuplicateParameter(
                    f"parameter '{definition.name}' has the name of a field",
                    definition.line,
                    definition.col,
                )
            self.definitions[definition.name] = definition
        self.fields = fields
        self.overrides = dict(overrides or {})
        unknown = sorted(set(self.overrides) - set(self.definitions))
        if unknown:
            raise UsageError(f"override of unknown parameter(s): {', '.join(unknown)}")
        self.values: dict[str, float] = {}
        self._active: list[str] = []

    def __contains__(self, name: str) -> bool:
        return name in self.definitions

    def value(self, name: str) -> float | None:
        if name not in self.definitions:
            return None
        if name in self.values:
            return self.values[name]
        if name in self.overrides:
            self.values[name] = float(self.overrides[name])
            return self.values[name]
        if name in self._active:
            cycle = " -> ".join([*self._active[self._active.index(name) :], name])
            definition = self.definitions[name]
            raise RecursiveDefinition(
                f"recursive parameter definition: {cycle}", definition.line, definition.col
            )
        self._active.append(name)
        try:
            definition = self.definitions[name]
            evaluator = ConstantEvaluator(self.value, self.fields, f"parameter '{name}'")
            _reject_time(definition.expr, f"parameter '{name}'")
            result = evaluator.evaluate(definition.expr)
        finally:
            self._active.pop()
        if np.ndim(result) != 0:
            raise KindMismatch(
                f"parameter '{name}'", "scalar", "vector", definition.line, definition.col
            )
        self.values[name] = float(result)
        return self.values[name]

    def fold_all(self) -> dict[str, float]:
        """Values of every parameter in definition order."""
        return {name: self.value(name) for name in self.definitions}


def _reject_time(expr: Expr, what: str) -> None:
    for node in walk(expr):
        if isinstance(node, Time):
            raise NonConstantExpression(
                f"{what} must be constant but refers to time 't'", node.line, node.col
            )


def _fold(expr: Expr, params: Mapping[str, float]) -> Expr:
    """Replace parameters and builtin constants by numbers and fold constant arithmetic."""

    def fold(node):
        if isinstance(node, Name):
            if node.id in params:
                return Num(params[node.id], line=node.line, col=node.col)
            if node.id in CONSTANTS:
                return Num(CONSTANTS[node.id], line=node.line, col=node.col)
            return node
        if isinstance(node, Neg) and isinstance(node.operand, Num):
            return Num(-node.operand.value, line=node.line, col=node.col)
        if isinstance(node, Group) and isinstance(node.inner, Num):
            return node.inner
        value = None
        if isinstance(node, BinOp) and isinstance(node.left, Num) and isinstance(node.right, Num):
            if not (node.op == "/" and node.right.value == 0):
                value = _FOLD_BINARY[node.op](node.left.value, node.right.value)
        elif (
            isinstance(node, Pow)
            and isinstance(node.base, Num)
            and isinstance(node.exponent, Num)
        ):
            try:
                value = math.pow(node.base.value, node.exponent.value)
            except (OverflowError, ValueError):
                value = None
        elif (
            isinstance(node, Call)
            and node.func in UNARY_FUNCTIONS
            and all(isinstance(a, Num) for a in node.args)
        ):
            with np.errstate(all="ignore"):
                value = float(UNARY_FUNCTIONS[node.func](node.args[0].value))
        if value is not None and math.isfinite(value):
            return Num(value, line=node.line, col=node.col)
        return node

    return transform(expr, fold)


class Resolver:
    """Turns a ``ProgramAst`` into a ``CompiledModel``.

    Args:
        ast: Parsed program.
        overrides: Parameter values applied before folding.
    """

    def __init__(self, ast: ProgramAst, overrides: Mapping[str, float] | None = None):
        self.ast = ast
        self.overrides = dict(overrides or {})
        self.fields: dict[str, FieldKind] = {}
        self.owners: dict[str, str] = {}
        self.params: ParameterTable | None = None

    def resolve(self) -> CompiledModel:
        self._collect_fields()
        definitions = list(self.ast.sim_params.params)
        for substance in self.ast.substances:
            definitions.extend(s for s in substance.behavior if isinstance(s, ParamDef))
        self.params = ParameterTable(definitions, self.fields, self.overrides)
        values = self.params.fold_all()

        changes, algebraic = self._collect_equations()
        updates = self._merge(changes, algebraic)
        folded_updates = {
            name: UpdateSpec(
                base=_fold(spec.base, values) if spec.base is not None else None,
                partials=tuple((sign, _fold(e, values)) for sign, e in spec.partials),
            )
            for name, spec in updates.items()
        }
        folded_algebraic = tuple(
            Algebraic(a.field, _fold(a.expr, values), a.substance) for a in algebraic
        )

        space, dx, dt, duration = self._simulation_geometry()
        model = CompiledModel(
            name=self.ast.name,
            space=space,
            dx=dx,
            dt=dt,
            duration=duration,
            fields=dict(self.fields),
            owners=dict(self.owners),
            params=values,
            overrides={k: float(v) for k, v in self.overrides.items()},
            updates=folded_updates,
            algebraic=folded_algebraic,
            bodies=tuple(self._lower_body(body, space) for body in self.ast.bodies),
            displays=self._displays(),
            stability=self._stability(),
            saves=self._transfers(self.ast.sim_params.saves),
            loads=self._transfers(self.ast.sim_params.loads),
            log_params=self._log_params(),
            notes=self.ast.sim_params.notes,
        )
        logger.info(
            f"Resolved program '{model.name}': {len(model.fields)} fields, "
            f"{len(model.params)} parameters, {len(model.integrated_fields)} integrated, "
            f"{len(model.algebraic)} algebraic"
        )
        return model

    # --- declarations ----------------------------------------------------------------------

    def _collect_fields(self) -> None:
        for substance in self.ast.substances:
            for decl in substance.field_decls:
                if decl.name in self.fields:
                    raise DuplicateField(
                        f"field '{decl.name}' is already declared by substance "
                        f"'{self.owners[decl.name]}'",
                        decl.line,
                        decl.col,
                    )
                if decl.name in CONSTANTS or decl.name == "t":
                    raise DuplicateField(
                        f"field name '{decl.name}' is reserved", decl.line, decl.col
                    )
                self.fields[decl.name] = decl.kind
                self.owners[decl.name] = substance.name

    def _check_names(self, expr: Expr) -> None:
        for node in walk(expr):
            if isinstance(node, Name):
                if (
                    node.id not in self.fields
                    and node.id not in self.params
                    and node.id not in CONSTANTS
                ):
                    raise UnknownIdentifier(
                        f"unknown identifier '{node.id}'", node.line, node.col
                    )
            elif isinstance(node, Call):
                arity = BUILTIN_ARITY.get(node.func)
                if arity is None:
                    raise UnknownFunction(
                        f"unknown function '{node.func}'", node.line, node.col
                    )
                if len(node.args) != arity:
                    raise SemanticError(
                        f"function '{node.func}' takes {arity} argument(s), "
                        f"got {len(node.args)}",
                        node.line,
                        node.col,
                    )
                if node.func == "sensed" and not (
                    isinstance(node.args[0], Name) and node.args[0].id in self.fields
                ):
                    raise SemanticError(
                        "'sensed' takes a field name", node.line, node.col
                    )

    # --- equations -------------------------------------------------------------------------

    def _collect_equations(self) -> tuple[list[tuple[str, ChangeStmt, Expr]], list[Algebraic]]:
        changes: list[tuple[str, ChangeStmt, Expr]] = []
        algebraic: list[Algebraic] = []
        for substance in self.ast.substances:
            lets: dict[str, Expr] = {}

            def substitute(expr: Expr, env: dict[str, Expr] = lets) -> Expr:
                return transform(
                    expr, lambda n: env[n.id] if isinstance(n, Name) and n.id in env else n
                )

            for stmt in substance.behavior:
                if isinstance(stmt, LetDef):
                    if (
                        stmt.name in names(stmt.expr)
                        and stmt.name not in lets
                        and stmt.name not in self.fields
                        and stmt.name not in self.params
                    ):
                        raise RecursiveDefinition(
                            f"'let {stmt.name}' refers to itself", stmt.line, stmt.col
                        )
                    expr = substitute(stmt.expr)
                    self._check_names(expr)
                    if stmt.name in self.fields:
                        algebraic.append(Algebraic(stmt.name, expr, substance.name))
                    else:
                        lets[stmt.name] = expr
                elif isinstance(stmt, ChangeStmt):
                    self._require_field(stmt.target, stmt)
                    expr = substitute(stmt.rhs)
                    self._check_names(expr)
                    changes.append((substance.name, stmt, expr))
                elif isinstance(stmt, AssignStmt):
                    self._require_field(stmt.target, stmt)
                    expr = substitute(stmt.rhs)
                    self._check_names(expr)
                    algebraic.append(Algebraic(stmt.target, expr, substance.name))
        return changes, algebraic

    def _require_field(self, name: str, node) -> None:
        if name not in self.fields:
            raise UndeclaredField(
                f"equation for undeclared field '{name}'", node.line, node.col
            )

    def _merge(
        self, changes: list[tuple[str, ChangeStmt, Expr]], algebraic: list[Algebraic]
    ) -> dict[str, UpdateSpec]:
        bases: dict[str, Expr] = {}
        partials: dict[str, list[tuple[int, Expr]]] = {name: [] for name in self.fields}
        first_change: dict[str, ChangeStmt] = {}
        for _, stmt, expr in changes:
            first_change.setdefault(stmt.target, stmt)
            if stmt.mode == "assign":
                if stmt.target in bases:
                    raise DuplicateBaseEquation(stmt.target, stmt.line, stmt.col)
                bases[stmt.target] = expr
            else:
                partials[stmt.target].append((1 if stmt.mode == "add" else -1, expr))

        seen: set[str] = set()
        for assignment in algebraic:
            if assignment.field in seen:
                raise DuplicateBaseEquation(assignment.field, assignment.expr.line)
            seen.add(assignment.field)
            if assignment.field in first_change:
                stmt = first_change[assignment.field]
                raise ConflictingEquations(
                    f"field '{assignment.field}' has both an algebraic assignment and "
                    f"change equations",
                    stmt.line,
                    stmt.col,
                )

        return {
            name: UpdateSpec(base=bases.get(name), partials=tuple(partials[name]))
            for name in self.fields
        }

    # --- simulation ------------------------------------------------------------------------

    def _constant(self, expr: Expr, what: str) -> float:
        _reject_time(expr, what)
        evaluator = ConstantEvaluator(self.params.value, self.fields, what)
        value = evaluator.evaluate(expr)
        if np.ndim(value) != 0:
            raise KindMismatch(what, "scalar", "vector", expr.line, expr.col)
        return float(value)

    def _simulation_geometry(self) -> tuple[BoxRegion, float, float, float]:
        sim = self.ast.sim_params
        values = {}
        for key, expr in (
            ("duration", sim.duration),
            ("temporal resolution", sim.temporal_resolution),
            ("spatial resolution", sim.spatial_resolution),
        ):
            if expr is None:
                raise InvalidSimulationParameter(f"missing {key}", sim.line, sim.col)
            value = self._constant(expr, key)
            if not value > 0:
                raise InvalidSimulationParameter(
                    f"{key} must be positive, got {value:g}", expr.line, expr.col
                )
            values[key] = value
        if sim.space is None:
            raise InvalidSimulationParameter("missing space", sim.line, sim.col)
        space = self._numeric_region(sim.space, "space")
        if not isinstance(space, BoxRegion):
            raise InvalidSimulationParameter("space must be a box", sim.line, sim.col)
        return (
            space,
            1.0 / values["spatial resolution"],
            1.0 / values["temporal resolution"],
            values["duration"],
        )

    def _numeric_region(self, region: Region, what: str) -> NumericRegion:
        if isinstance(region, Box):
            box = BoxRegion(
                self._constant(region.xlo, what),
                self._constant(region.xhi, what),
                self._constant(region.ylo, what),
                self._constant(region.yhi, what),
            )
            if not (box.xlo < box.xhi and box.ylo < box.yhi):
                error = InvalidSimulationParameter if what == "space" else InvalidRegion
                raise error(
                    f"{what} bounds out of order: {box.xlo:g} < x < {box.xhi:g}, "
                    f"{box.ylo:g} < y < {box.yhi:g}",
                    region.line,
                    region.col,
                )
            return box
        disc = DiscRegion(
            self._constant(region.cx, what),
            self._constant(region.cy, what),
            self._constant(region.radius, what),
        )
        if not disc.radius > 0:
            raise InvalidRegion(
                f"disc radius must be positive, got {disc.radius:g}", region.line, region.col
            )
        return disc

    # --- bodies ----------------------------------------------------------------------------

    def _lower_body(self, body: BodyAst, space: BoxRegion) -> LoweredBody:
        if body.substance not in {s.name for s in self.ast.substances}:
            raise BodyOfUnknownSubstance(
                f"body '{body.name}' of unknown substance '{body.substance}'",
                body.line,
                body.col,
            )
        inits = []
        for init in body.inits:
            region = self._numeric_region(init.region, f"region of body '{body.name}'")
            if not region.intersects(space):
                logger.warning(
                    f"Region at line {init.line} of body '{body.name}' lies outside the space"
                )
            values: list[tuple[str, FieldValue]] = []
            for assignment in init.assignments:
                self._require_field(assignment.field, assignment)
                values.append((assignment.field, self._init_value(assignment)))
            inits.append(LoweredInit(region, tuple(values)))
        return LoweredBody(body.name, body.substance, tuple(inits))

    def _init_value(self, assignment) -> FieldValue:
        what = f"initial value of '{assignment.field}'"
        _reject_time(assignment.expr, what)
        evaluator = ConstantEvaluator(self.params.value, self.fields, what)
        value = evaluator.evaluate(assignment.expr)
        kind = self.fields[assignment.field]
        found = "vector" if np.ndim(value) else "scalar"
        if found != kind:
            raise KindMismatch(what, kind, found, assignment.line, assignment.col)
        if kind == "vector":
            return (float(value[0]), float(value[1]))
        return float(value)

    # --- visualization ---------------------------------------------------------------------

    def _field_of_kind(self, name: str, kind: str | None, node) -> None:
        if name not in self.fields:
            raise UndeclaredField(f"unknown field '{name}'", node.line, node.col)
        if kind is not None and self.fields[name] != kind:
            raise KindMismatch(f"field '{name}'", kind, self.fields[name], node.line, node.col)

    def _displays(self) -> tuple[DisplayPlan, ...]:
        plans = []
        for cmd in self.ast.viz:
            if not isinstance(cmd, (Display, Movie)):
                continue
            spec = cmd.kind
            self._field_of_kind(cmd.field, "vector" if spec.name == "quivers" else "scalar", cmd)
            limits = None
            if spec.limits is not None:
                limits = (
                    self._constant(spec.limits[0], "display limit"),
                    self._constant(spec.limits[1], "display limit"),
                )
            pitch = None
            if spec.pitch is not None:
                pitch = self._constant(spec.pitch, "quiver mesh pitch")
                if not pitch > 0:
                    raise InvalidRegion(
                        f"quiver mesh pitch must be positive, got {pitch:g}", cmd.line, cmd.col
                    )
            if isinstance(cmd, Display):
                plans.append(
                    DisplayPlan(cmd.time, cmd.field, spec.name, limits, pitch, cmd.options)
                )
            else:
                plans.append(
                    DisplayPlan(
                        "running", cmd.field, spec.name, limits, pitch, cmd.options, cmd.filename
                    )
                )
        return tuple(plans)

    def _stability(self) -> tuple[StabilityRequest, ...]:
        requests = []
        for cmd in self.ast.viz:
            if not isinstance(cmd, StabilityReportCmd):
                continue
            if cmd.kind == "diffusion":
                self._field_of_kind(cmd.operands[0], "scalar", cmd)
                operands = cmd.operands
            elif cmd.kind == "Courant":
                self._field_of_kind(cmd.operands[0], "vector", cmd)
                operands = cmd.operands
            else:
                for name in cmd.operands:
                    self._field_of_kind(name, None, cmd)
                kinds = sorted(self.fields[name] for name in cmd.operands)
                if kinds != ["scalar", "vector"]:
                    raise KindMismatch(
                        "Peclet number operands", "a scalar and a vector field",
                        " and ".join(kinds), cmd.line, cmd.col,
                    )
                operands = tuple(
                    sorted(cmd.operands, key=lambda n: self.fields[n] == "vector")
                )
            requests.append(StabilityRequest(cmd.kind, tuple(operands)))
        return tuple(requests)

    def _transfers(self, directives) -> tuple[FileTransfer, ...]:
        for directive in directives:
            for name in directive.fields:
                self._field_of_kind(name, None, directive)
        return tuple(FileTransfer(d.fields, d.filename) for d in directives)

    def _log_params(self) -> tuple[str, ...]:
        sim = self.ast.sim_params
        for name in sim.log_params:
            if name not in self.params:
                raise UnknownIdentifier(
                    f"'log params' names unknown parameter '{name}'", sim.line, sim.col
                )
        return sim.log_params


def resolve(ast: ProgramAst, overrides: Mapping[str, float] | None = None) -> CompiledModel:
    """Resolve a parsed program into a compiled model.

    Args:
        ast: Parsed program.
        overrides: Parameter values replacing their definitions before folding.

    Returns:
        The compiled model with folded parameters and merged update specs.

    Raises:
        UndeclaredField: An equation or initialization targets an undeclared field.
        DuplicateBaseEquation: Two ``D X =`` statements target one field.
        UnknownIdentifier: A name is neither a field, parameter, let binding nor constant.
        BodyOfUnknownSubstance: A body names a substance that does not exist.
        UsageError: An override names an unknown parameter.
    """
    return Resolver(ast, overrides).resolve()


def compile_program(
    ast: ProgramAst, overrides: Mapping[str, float] | None = None
) -> CompiledModel:
    """Resolve a program and kind-check every equation.

    Args:
        ast: Parsed program.
        overrides: Parameter values replacing their definitions before folding.

    Returns:
        A model whose update and assignment kinds match their fields.
    """
    from src.morphgen.sema.kinds import check_update_kinds

    model = resolve(ast, overrides)
    check_update_kinds(model)
    return model
