"""Explicit-Euler execution of a compiled model on a uniform grid."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.morphgen.engine.grid import Grid2D
from src.morphgen.engine.noise import DwInterpretation, NoisePlan
from src.morphgen.errors import NonFiniteField
from src.morphgen.frontend.ast import Expr, Name, Noise
from src.morphgen.sema.evaluate import Evaluator, Value
from src.morphgen.sema.model import CompiledModel, FieldValue, NumericRegion

logger = logging.getLogger(__name__)


@dataclass
class SimState:
    """Eulerian state of one run.

    Attributes:
        model: Model being executed.
        grid: Mesh of the simulated space.
        fields: Field name to grid (scalar ``(ny, nx)``, vector ``(2, ny, nx)``).
        noise: Noise plan seeded for this run.
        step: Completed steps.
        rhs: Effective right-hand side per integrated field, fixed for the run.
    """

    model: CompiledModel
    grid: Grid2D
    fields: dict[str, np.ndarray]
    noise: NoisePlan
    step: int = 0
    rhs: dict[str, Expr] = field(default_factory=dict)

    @property
    def t(self) -> float:
        return self.step * self.model.dt

    @property
    def seed(self) -> int:
        return self.noise.seed


class GridEvaluator(Evaluator):
    """Evaluates expressions over the whole grid of a state."""

    def __init__(self, state: SimState):
        self.state = state
        self.shape = state.grid.shape

    def name(self, node: Name) -> Value:
        return self.state.fields[node.id]

    def time(self) -> Value:
        return self.state.t

    def gradient(self, value: Value) -> Value:
        return self.state.grid.gradient(self.broadcast(value))

    def laplacian(self, value: Value) -> Value:
        return self.state.grid.laplacian(self.broadcast(value))

    def divergence(self, value: Value) -> Value:
        return self.state.grid.divergence(self.broadcast(value, vector=True))

    def noise(self, node: Noise, weight: Value, arity: int) -> Value:
        return self.state.noise.sample(node, self.state.step, weight, self.shape)


def allocate(
    model: CompiledModel, seed: int = 0, interpretation: DwInterpretation = "difference"
) -> SimState:
    """Create the initial state: zero grids, then every body in source order.

    Raises:
        GridTooSmall: The space holds fewer than three cells along an axis.
    """
    grid = Grid2D.for_model(model)
    fields = {name: grid.zeros(kind == "vector") for name, kind in model.fields.items()}
    rhs = {name: model.effective_rhs(name) for name in model.integrated_fields}
    noise = NoisePlan(seed, model.dt, interpretation)
    noise.register([a.expr for a in model.algebraic])
    noise.register(rhs.values())
    state = SimState(model=model, grid=grid, fields=fields, noise=noise, rhs=rhs)
    for body in model.bodies:
        for init in body.inits:
            apply_region(state, init.region, init.values, f"body '{body.name}'")
    logger.info(
        f"Allocated {grid.nx}x{grid.ny} grid (dx={grid.dx:g}) for {len(fields)} fields"
    )
    return state


def apply_region(
    state: SimState,
    region: NumericRegion,
    assignments: Sequence[tuple[str, FieldValue]],
    source: str = "region",
) -> int:
    """Assign constant values to every cell whose center lies in a region.

    Returns:
        The number of cells assigned.
    """
    x, y = state.grid.centers
    mask = region.contains(x, y)
    count = int(mask.sum())
    if count == 0:
        logger.warning(f"{source}: region {region} contains no cell centers; nothing assigned")
        return 0
    for name, value in assignments:
        grid = state.fields[name]
        if grid.ndim == 3:
            grid[0][mask] = value[0]
            grid[1][mask] = value[1]
        else:
            grid[mask] = value
    logger.debug(f"{source}: assigned {count} cells")
    return count


def _check_finite(name: str, value: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(value)):
        raise NonFiniteField(name, step)


def update_algebraic(state: SimState) -> GridEvaluator:
    """Recompute the algebraic fields from the current state, in source order."""
    model = state.model
    evaluator = GridEvaluator(state)
    for assignment in model.algebraic:
        vector = model.fields[assignment.field] == "vector"
        value = evaluator.broadcast(evaluator.evaluate(assignment.expr), vector=vector)
        _check_finite(assignment.field, value, state.step)
        state.fields[assignment.field] = value
    return evaluator


def step(state: SimState, workers: int = 1) -> SimState:
    """Advance the state by one step.

    Algebraic fields are recomputed first, in source order. Every integrated field is then
    updated with ``F + dt * RHS`` where all right-hand sides read the same pre-step state.

    Raises:
        NonFiniteField: A field became NaN or infinite.
    """
    model = state.model
    evaluator = update_algebraic(state)

    names = list(state.rhs)

    def rate(name: str) -> np.ndarray:
        vector = model.fields[name] == "vector"
        return evaluator.broadcast(evaluator.evaluate(state.rhs[name]), vector=vector)

    if workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rates = dict(zip(names, pool.map(rate, names), strict=True))
    else:
        rates = {name: rate(name) for name in names}

    for name in names:
        updated = state.fields[name] + model.dt * rates[name]
        _check_finite(name, updated, state.step + 1)
        state.fields[name] = updated
    state.step += 1
    return state


class Sink(ABC):
    """Observer of a run (displays, movies, progress)."""

    def begin(self, state: SimState) -> None:
        """Called once after initialization and loads."""
        pass

    @abstractmethod
    def record(self, state: SimState) -> None:
        """Called after every step."""
        pass

    def end(self, state: SimState) -> None:
        """Called once after the last step."""
        pass


def step_count(model: CompiledModel) -> int:
    """Number of steps covering the duration."""
    return math.ceil(round(model.duration / model.dt, 9))


def run(
    model: CompiledModel,
    sinks: Iterable[Sink] = (),
    *,
    seed: int = 0,
    interpretation: DwInterpretation = "difference",
    workers: int = 1,
    load_dir: Path | None = None,
    save_dir: Path | None = None,
    steps: int | None = None,
) -> SimState:
    """Execute a model from its bodies to the end of its duration.

    Args:
        model: Kind-checked model.
        sinks: Observers notified at start, after each step and at the end.
        seed: Master noise seed.
        interpretation: Reading of noise terms (``difference`` or ``sde``).
        workers: Threads evaluating right-hand sides within a step.
        load_dir: Directory resolving relative ``load`` file names.
        save_dir: Directory resolving relative ``save`` file names.
        steps: Step count overriding the model duration.

    Returns:
        The final state.
    """
    from src.morphgen.io.archive import load_fields, save_fields

    sinks = list(sinks)
    state = allocate(model, seed, interpretation)
    for transfer in model.loads:
        load_fields(state, transfer.fields, _resolve(transfer.filename, load_dir))
    total = step_count(model) if steps is None else steps
    logger.info(f"Running '{model.name}' for {total} steps (dt={model.dt:g}, seed={seed})")

    for sink in sinks:
        sink.begin(state)
    report_every = max(1, total // 10)
    for _ in range(total):
        step(state, workers)
        for sink in sinks:
            sink.record(state)
        if state.step % report_every == 0:
            logger.info(f"Step {state.step}/{total} (t={state.t:g})")
    for sink in sinks:
        sink.end(state)

    for transfer in model.saves:
        save_fields(state, transfer.fields, _resolve(transfer.filename, save_dir))
    return state


def _resolve(filename: str, directory: Path | None) -> Path:
    path = Path(filename)
    if directory is None or path.is_absolute():
        return path
    return directory / path
