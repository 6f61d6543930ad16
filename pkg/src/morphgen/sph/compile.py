"""Compilation of field models to per-agent rules.

The swarm density field is realized by the agents themselves and changes only as they move.
Every other scalar field with an equation becomes agent state backed by its own channel;
scalar fields without equations are environment cues read from their initialized grids.
In agent rules a field name reads the agent's stored value, ``sensed(f)`` the SPH estimate,
``del f`` the sensed gradient and ``del^2 f`` the sensed-minus-own Laplacian estimate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

from src.morphgen.errors import NonConservativeDensity, UnsupportedConstruct
from src.morphgen.frontend.ast import Call, Divergence, Expr, Grad, Lapl, Name
from src.morphgen.sema.model import Algebraic, CompiledModel
from src.morphgen.sema.tree import walk
from src.morphgen.sph.kernels import KernelSpec, calibrate_alpha

logger = logging.getLogger(__name__)

FieldRole = Literal["density", "velocity", "state", "environment"]
VelocityMode = Literal["algebraic", "integrated", "static"]


@dataclass(frozen=True)
class AgentProgram:
    """Lagrangian reading of a model.

    Attributes:
        model: Source model.
        density: Swarm density field.
        velocity: Velocity field driving motion.
        velocity_mode: ``algebraic`` (recomputed each step), ``integrated`` (has a change
            equation) or ``static`` (keeps its initial value).
        roles: Field name to role.
        channels: Emitted field (density first) to channel name.
        updates: Integrated field to its effective right-hand side.
        algebraic: Assignments recomputed every step, in source order.
        alpha: Laplacian constant of the channel kernel, or ``None`` when no kernel was given.
    """

    model: CompiledModel
    density: str
    velocity: str
    velocity_mode: VelocityMode
    roles: dict[str, FieldRole]
    channels: dict[str, str]
    updates: dict[str, Expr]
    algebraic: tuple[Algebraic, ...]
    alpha: float | None = None

    @property
    def state_fields(self) -> list[str]:
        return [name for name, role in self.roles.items() if role == "state"]

    @property
    def environment_fields(self) -> list[str]:
        return [name for name, role in self.roles.items() if role == "environment"]

    def expressions(self) -> list[Expr]:
        return [a.expr for a in self.algebraic] + list(self.updates.values())


def _check_expression(expr: Expr, roles: dict[str, FieldRole], target: str) -> None:
    for node in walk(expr):
        if isinstance(node, Divergence):
            raise UnsupportedConstruct(
                f"'div' in the rule for '{target}' has no agent reading", node.line, node.col
            )
        if isinstance(node, Grad | Lapl):
            operand = node.operand
            op = "del" if isinstance(node, Grad) else "del^2"
            if not isinstance(operand, Name) or roles.get(operand.id) == "velocity":
                raise UnsupportedConstruct(
                    f"'{op}' in the rule for '{target}' must apply to a scalar field name",
                    node.line,
                    node.col,
                )
            if isinstance(node, Lapl) and roles[operand.id] == "density":
                raise UnsupportedConstruct(
                    f"'del^2' of the swarm density in the rule for '{target}' is not sensed",
                    node.line,
                    node.col,
                )
        if isinstance(node, Call) and node.func == "sensed":
            arg = node.args[0]
            if not isinstance(arg, Name) or roles.get(arg.id) == "velocity":
                raise UnsupportedConstruct(
                    f"'sensed' in the rule for '{target}' must apply to a scalar field name",
                    node.line,
                    node.col,
                )


def compile_sph(
    model: CompiledModel,
    density: str = "rho",
    velocity: str = "V",
    kernel: KernelSpec | None = None,
) -> AgentProgram:
    """Compile a model to per-agent rules.

    Args:
        model: Kind-checked model.
        density: Name of the scalar field holding the swarm density.
        velocity: Name of the vector field driving agent motion.
        kernel: Channel kernel; when given, its Laplacian constant is computed.

    Returns:
        The agent program.

    Raises:
        NonConservativeDensity: The density field has a change equation or an assignment.
        UnsupportedConstruct: The swarm fields are missing or of the wrong kind, another vector
            field carries state, or a rule uses an operator with no agent reading.
    """
    if model.fields.get(density) != "scalar":
        raise UnsupportedConstruct(f"model has no scalar field '{density}' for the swarm density")
    if model.fields.get(velocity) != "vector":
        raise UnsupportedConstruct(f"model has no vector field '{velocity}' for agent velocity")

    algebraic_targets = set(model.algebraic_fields)
    if not model.updates[density].is_static or density in algebraic_targets:
        raise NonConservativeDensity(
            f"swarm density '{density}' changes only by agent motion and cannot have its own "
            f"equation"
        )

    roles: dict[str, FieldRole] = {}
    for name, kind in model.fields.items():
        if name == density:
            roles[name] = "density"
        elif name == velocity:
            roles[name] = "velocity"
        elif kind == "vector":
            raise UnsupportedConstruct(
                f"vector field '{name}' cannot be agent state; only '{velocity}' may be a vector"
            )
        elif name in algebraic_targets or not model.updates[name].is_static:
            roles[name] = "state"
        else:
            roles[name] = "environment"

    updates = {name: model.effective_rhs(name) for name in model.integrated_fields}
    for assignment in model.algebraic:
        _check_expression(assignment.expr, roles, assignment.field)
    for name, rhs in updates.items():
        _check_expression(rhs, roles, name)

    if velocity in updates:
        velocity_mode: VelocityMode = "integrated"
    elif velocity in algebraic_targets:
        velocity_mode = "algebraic"
    else:
        velocity_mode = "static"

    emitted = [density] + [name for name, role in roles.items() if role == "state"]
    channels = {name: f"M{index}" for index, name in enumerate(emitted)}
    alpha = calibrate_alpha(kernel) if kernel is not None else None

    program = AgentProgram(
        model=model,
        density=density,
        velocity=velocity,
        velocity_mode=velocity_mode,
        roles=roles,
        channels=channels,
        updates=updates,
        algebraic=model.algebraic,
        alpha=alpha,
    )
    logger.info(
        f"Compiled '{model.name}' for agents: state {program.state_fields or 'none'}, "
        f"environment {program.environment_fields or 'none'}, velocity {velocity_mode}"
    )
    return program
