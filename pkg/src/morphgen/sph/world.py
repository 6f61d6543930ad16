"""Agent world: a swarm moving through its morphogen channels.

One step of the world:

1. every agent emits into each channel at its production rate (density channel at ``k m``,
   state channels at ``k m f / rho``);
2. every channel applies the emissions and diffuses and decays for one step;
3. agents sense values and gradients, recompute assignments, integrate their state, update
   their corrections and move.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from src.morphgen.engine.grid import Grid2D
from src.morphgen.engine.noise import DwInterpretation, NoisePlan
from src.morphgen.engine.simulation import SimState, allocate, step_count
from src.morphgen.errors import IoError, NonFiniteField, OutOfDomain, UnsupportedConstruct
from src.morphgen.frontend.ast import Expr, Grad, Lapl, Name, Noise
from src.morphgen.sema.evaluate import Evaluator, Value
from src.morphgen.sph.agents import AgentSwarm, sample_grid
from src.morphgen.sph.calibration import CalibrationSetup, CalibrationTable, raw_gradient
from src.morphgen.sph.channels import Channel, InstantChannel, MorphogenChannel
from src.morphgen.sph.compile import AgentProgram
from src.morphgen.sph.estimates import (
    density_rate,
    estimate_laplacian,
    production_rate,
    update_correction,
)
from src.morphgen.sph.kernels import calibrate_alpha

logger = logging.getLogger(__name__)

# noise sites reserved for motion and sensing, far above the sites of program noise terms
BROWNIAN_SITE = 1_000_000
SENSOR_SITE = 1_000_001
DEFAULT_SNAPSHOT_TIMES = (0.0, 20.0, 70.0, 270.0)


class WorldSettings(BaseModel):
    """Physical settings of an agent world.

    Attributes:
        agents: Number of agents.
        diameter: Agent body diameter.
        kernel_scale: Channel smoothing length in diameters.
        decay_step_product: Channel decay rate times step size.
        cells_per_diameter: Channel grid cells per diameter.
        brownian: Magnitude of the Brownian position perturbation per square-root time.
        sensor_bias: Offset added to every sensor reading.
        sensor_noise: Standard deviation of sensor reading noise.
        gradient_floor: Sensed gradient magnitudes below this read as zero.
        instant_kernel: Evaluate channels as equilibrium kernel sums instead of grids.
        max_diffusion_number: Largest diffusion number of a channel substep.
    """

    agents: int = Field(default=166, ge=1, description="Number of agents")
    diameter: float = Field(default=0.016, gt=0, description="Agent body diameter")
    kernel_scale: float = Field(default=4.0, gt=0, description="Smoothing length in diameters")
    decay_step_product: float = Field(
        default=0.05, gt=0, le=1, description="Channel decay rate times step size"
    )
    cells_per_diameter: float = Field(
        default=2.0, gt=0, description="Channel grid cells per diameter"
    )
    brownian: float = Field(default=0.0, ge=0, description="Brownian perturbation magnitude")
    sensor_bias: float = Field(default=0.0, description="Sensor reading offset")
    sensor_noise: float = Field(default=0.0, ge=0, description="Sensor noise deviation")
    gradient_floor: float = Field(default=1e-6, ge=0, description="Smallest sensed gradient")
    instant_kernel: bool = Field(default=False, description="Skip channel diffusion time")
    max_diffusion_number: float = Field(
        default=0.2, gt=0, le=0.25, description="Largest diffusion number per substep"
    )

    def setup(self, dt: float) -> CalibrationSetup:
        return CalibrationSetup(
            diameter=self.diameter,
            kernel_scale=self.kernel_scale,
            decay_step_product=self.decay_step_product,
            cells_per_diameter=self.cells_per_diameter,
            dt=dt,
        )


class AgentEvaluator(Evaluator):
    """Evaluates agent rules for every agent at once; scalars are ``(N,)`` arrays.

    Field names read the agent's stored value, ``sensed`` its SPH estimate, ``del`` the sensed
    gradient and ``del^2`` the Laplacian estimate.
    """

    def __init__(self, world: AgentWorld):
        self.world = world
        self.shape = (world.swarm.count,)

    def evaluate(self, expr: Expr) -> Value:
        match expr:
            case Grad(operand=Name(id=name)):
                return self.world.gradient_of(name)
            case Lapl(operand=Name(id=name)):
                return self.world.laplacian_of(name)
        return super().evaluate(expr)

    def name(self, node: Name) -> Value:
        return self.world.own_value(node.id)

    def time(self) -> Value:
        return self.world.t

    def sensed(self, node: Expr) -> Value:
        if not isinstance(node, Name):
            raise UnsupportedConstruct("'sensed' must apply to a field name", node.line, node.col)
        return self.world.sensed_value(node.id)

    def _unsupported(self, what: str) -> UnsupportedConstruct:
        return UnsupportedConstruct(f"{what} of an expression has no agent reading")

    def gradient(self, value: Value) -> Value:
        raise self._unsupported("'del'")

    def laplacian(self, value: Value) -> Value:
        raise self._unsupported("'del^2'")

    def divergence(self, value: Value) -> Value:
        raise self._unsupported("'div'")

    def noise(self, node: Noise, weight: Value, arity: int) -> Value:
        return self.world.noise.sample(node, self.world.step_index, weight, self.shape)


class AgentWorld:
    """Swarm, channels and environment of one agent simulation.

    Args:
        program: Compiled agent program.
        settings: Physical world settings.
        calibration: Self-gradient bias table (no correction when omitted).
        seed: Master seed for placement, noise and sensing.
        interpretation: Reading of ``DW`` noise terms.
    """

    def __init__(
        self,
        program: AgentProgram,
        settings: WorldSettings | None = None,
        calibration: CalibrationTable | None = None,
        seed: int = 0,
        interpretation: DwInterpretation = "difference",
    ):
        self.program = program
        self.settings = settings or WorldSettings()
        self.calibration = calibration or CalibrationTable.zero()
        self.seed = int(seed)
        model = program.model
        self.dt = model.dt
        self.step_index = 0

        setup = self.settings.setup(self.dt)
        self.radius = setup.radius
        self.kernel = setup.kernel()
        self.alpha = program.alpha
        if self.alpha is None:
            self.alpha = calibrate_alpha(self.kernel)

        self.environment: SimState = allocate(model, seed, interpretation)
        self.space = model.space
        self.channel_grid = (
            None
            if self.settings.instant_kernel
            else Grid2D.for_space(model.space, setup.dx)
        )
        self.channels: dict[str, Channel] = {}
        for name in program.channels:
            if self.channel_grid is None:
                channel: Channel = InstantChannel(name, self.kernel, self.radius)
            else:
                channel = MorphogenChannel(
                    name,
                    self.channel_grid,
                    self.kernel,
                    self.radius,
                    self.settings.max_diffusion_number,
                )
            logger.info(f"Agent world {channel.describe(self.dt)}")
            self.channels[name] = channel

        self.noise = NoisePlan(seed, self.dt, interpretation)
        self.noise.register(program.expressions())
        self.swarm: AgentSwarm | None = None
        self.last_sensed: dict[str, np.ndarray] = {}
        self._gradients: dict[str, np.ndarray] = {}
        self._clamp_warned = False

    @property
    def t(self) -> float:
        return self.step_index * self.dt

    # --- placement -------------------------------------------------------------------------

    def seed_agents(self, count: int | None = None) -> AgentSwarm:
        """Place agents in cells of positive initial density, weighted by it.

        Each agent carries the total initial density mass divided by the agent count.

        Raises:
            UnsupportedConstruct: The initial density is nowhere positive.
        """
        count = count or self.settings.agents
        grid = self.environment.grid
        density = np.clip(self.environment.fields[self.program.density], 0.0, None)
        total = float(density.sum()) * grid.dx**2
        if total <= 0:
            raise UnsupportedConstruct(
                f"initial swarm density '{self.program.density}' is nowhere positive"
            )
        rng = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(0,)))
        weights = density.ravel() / density.sum()
        cells = rng.choice(weights.size, size=count, p=weights)
        j, i = np.unravel_index(cells, grid.shape)
        x = grid.xlo + (i + rng.random(count)) * grid.dx
        y = grid.ylo + (j + rng.random(count)) * grid.dx
        return self.place(np.stack([x, y]), mass=total / count)

    def place(self, positions: np.ndarray, mass: float | None = None) -> AgentSwarm:
        """Put agents at explicit ``(2, N)`` positions and equilibrate the channels.

        Agent state is read from the initialized grids at each position. The mass defaults to
        the total initial density mass divided by the agent count.
        """
        positions = np.asarray(positions, dtype=float).reshape(2, -1)
        count = positions.shape[1]
        grid = self.environment.grid
        if mass is None:
            density = np.clip(self.environment.fields[self.program.density], 0.0, None)
            mass = float(density.sum()) * grid.dx**2 / count
        positions = self._clamp(positions)
        state = {
            name: sample_grid(grid, self.environment.fields[name], positions)
            for name in self.program.state_fields
        }
        velocities = sample_grid(grid, self.environment.fields[self.program.velocity], positions)
        self.swarm = AgentSwarm(
            positions=positions,
            velocities=velocities,
            radius=self.radius,
            mass=mass,
            state=state,
            corrections={name: np.zeros(count) for name in self.program.state_fields},
        )
        self._equilibrate()
        logger.info(
            f"Placed {count} agents of diameter {2 * self.radius:g} and mass {mass:.4g}"
        )
        return self.swarm

    def _equilibrate(self) -> None:
        swarm = self.swarm
        density = self.program.density
        channel = self.channels[density]
        steps = channel.equilibrate(swarm.positions, self._rates(density), self.dt)
        swarm.density = self._sense_channel(density)
        for name in self.program.state_fields:
            self.channels[name].equilibrate(swarm.positions, self._rates(name), self.dt)
        logger.debug(f"Channels equilibrated in {steps} steps each")

    # --- sensing ---------------------------------------------------------------------------

    def _rates(self, name: str) -> np.ndarray:
        swarm = self.swarm
        k = self.kernel.k
        if name == self.program.density:
            return np.full(swarm.count, density_rate(k, swarm.mass))
        return production_rate(k, swarm.mass, swarm.density, swarm.state[name])

    def _readings(self, name: str) -> np.ndarray:
        swarm = self.swarm
        lo_x, hi_x = self.space.xlo, self.space.xhi
        lo_y, hi_y = self.space.ylo, self.space.yhi
        slack = 1e-9 * max(self.space.width, self.space.height)
        x, y = swarm.positions
        outside = (
            (x - self.radius < lo_x - slack)
            | (x + self.radius > hi_x + slack)
            | (y - self.radius < lo_y - slack)
            | (y + self.radius > hi_y + slack)
        )
        if np.any(outside):
            index = int(np.argmax(outside))
            raise OutOfDomain(
                f"agent {index} at ({x[index]:g}, {y[index]:g}) senses outside the space"
            )
        readings = self.channels[name].readings(swarm.positions)
        settings = self.settings
        if settings.sensor_bias:
            readings = readings + settings.sensor_bias
        if settings.sensor_noise:
            site = SENSOR_SITE + 2 * list(self.channels).index(name)
            readings = readings + settings.sensor_noise * self.noise.samples(
                site, self.step_index, readings.shape
            )
        return readings

    def _sense_channel(self, name: str) -> np.ndarray:
        return self._readings(name).mean(axis=0)

    def _own_amount(self, name: str) -> np.ndarray:
        swarm = self.swarm
        if name == self.program.density:
            return np.full(swarm.count, swarm.mass)
        return swarm.mass * swarm.state[name] / swarm.density

    def sense(self, name: str) -> np.ndarray:
        """SPH estimate of a state field: channel reading plus correction."""
        return self._sense_channel(name) + self.swarm.corrections[name]

    def sense_gradient(self, name: str) -> np.ndarray:
        """``(2, N)`` sensed gradient of a channel, corrected for motion bias and floored."""
        swarm = self.swarm
        gradient = raw_gradient(self._readings(name), self.radius)
        bias = self.calibration.bias_world(swarm.velocities) * self._own_amount(name)
        gradient = gradient - bias
        magnitude = np.hypot(gradient[0], gradient[1])
        return np.where(magnitude < self.settings.gradient_floor, 0.0, gradient)

    def own_value(self, name: str) -> Value:
        program = self.program
        role = program.roles[name]
        if role == "density":
            return self.swarm.density
        if role == "velocity":
            return self.swarm.velocities
        if role == "state":
            return self.swarm.state[name]
        return sample_grid(
            self.environment.grid, self.environment.fields[name], self.swarm.positions
        )

    def sensed_value(self, name: str) -> np.ndarray:
        if name not in self.last_sensed:
            if self.program.roles[name] == "state":
                self.last_sensed[name] = self.sense(name)
            else:
                self.last_sensed[name] = np.asarray(self.own_value(name))
        return self.last_sensed[name]

    def gradient_of(self, name: str) -> np.ndarray:
        if name not in self._gradients:
            if name in self.channels:
                self._gradients[name] = self.sense_gradient(name)
            else:
                grid = self.environment.grid
                gradient = grid.gradient(self.environment.fields[name])
                self._gradients[name] = sample_grid(grid, gradient, self.swarm.positions)
        return self._gradients[name]

    def laplacian_of(self, name: str) -> np.ndarray:
        if name in self.channels:
            own = self.swarm.state[name]
            return estimate_laplacian(self.sensed_value(name), own, self.alpha)
        grid = self.environment.grid
        laplacian = grid.laplacian(self.environment.fields[name])
        return sample_grid(grid, laplacian, self.swarm.positions)

    # --- stepping --------------------------------------------------------------------------

    def _clamp(self, positions: np.ndarray) -> np.ndarray:
        space = self.space
        r = self.radius
        clamped = np.stack(
            [
                np.clip(positions[0], space.xlo + r, space.xhi - r),
                np.clip(positions[1], space.ylo + r, space.yhi - r),
            ]
        )
        moved = int(np.count_nonzero(np.any(clamped != positions, axis=0)))
        if moved:
            message = f"{moved} agents clamped to the space at step {self.step_index}"
            if self._clamp_warned:
                logger.debug(message)
            else:
                logger.warning(f"{message}; further clamps are logged at debug level")
                self._clamp_warned = True
        return clamped

    def _check(self, name: str, value: np.ndarray) -> None:
        if not np.all(np.isfinite(value)):
            raise NonFiniteField(name, self.step_index + 1)

    def step(self) -> None:
        """Advance the world by one step.

        Raises:
            NonFiniteField: An agent value became NaN or infinite.
            ZeroDensity: A state channel needs a production rate at non-positive density.
            OutOfDomain: An agent senses outside the space.
        """
        if self.swarm is None:
            self.seed_agents()
        program = self.program
        swarm = self.swarm
        dt = self.dt

        for name, channel in self.channels.items():
            channel.emit(swarm.positions, self._rates(name), dt)
        for channel in self.channels.values():
            channel.advance(dt)

        self.last_sensed = {}
        self._gradients = {}
        swarm.density = self._sense_channel(program.density)
        self._check(program.density, swarm.density)
        evaluator = AgentEvaluator(self)
        swarm.previous = {name: values.copy() for name, values in swarm.state.items()}

        for assignment in program.algebraic:
            target = assignment.field
            vector = target == program.velocity
            value = evaluator.broadcast(evaluator.evaluate(assignment.expr), vector=vector)
            self._check(target, value)
            if vector:
                swarm.velocities = value
            else:
                swarm.state[target] = value

        rates = {
            name: evaluator.broadcast(
                evaluator.evaluate(rhs), vector=name == program.velocity
            )
            for name, rhs in program.updates.items()
        }
        for name, rate in rates.items():
            if name == program.velocity:
                updated = swarm.velocities + dt * rate
                self._check(name, updated)
                swarm.velocities = updated
            else:
                updated = swarm.state[name] + dt * rate
                self._check(name, updated)
                swarm.state[name] = updated

        for name in program.state_fields:
            delta = swarm.state[name] - swarm.previous[name]
            swarm.corrections[name] = update_correction(
                swarm.corrections[name], delta, self.kernel.k, dt
            )

        displacement = swarm.velocities * dt
        if self.settings.brownian:
            kicks = self.noise.samples(BROWNIAN_SITE, self.step_index, (2, swarm.count))
            displacement = displacement + self.settings.brownian * math.sqrt(dt) * kicks
        swarm.positions = self._clamp(swarm.positions + displacement)
        self.step_index += 1

    # --- output ----------------------------------------------------------------------------

    def snapshot_grid(self) -> Grid2D:
        return self.environment.grid if self.channel_grid is None else self.channel_grid

    def write_snapshot(self, out_dir: str | Path) -> tuple[Path, Path]:
        """Write ``agents_t<time>.csv`` and ``channels_t<time>.mgf`` for the current time.

        Raises:
            IoError: A file cannot be written.
        """
        from src.morphgen.io.archive import write_archive

        out_dir = Path(out_dir)
        label = f"{round(self.t, 9):g}"
        swarm = self.swarm
        columns = ["id", "x", "y", "vx", "vy", self.program.density, *swarm.state]
        rows = np.column_stack(
            [
                np.arange(swarm.count),
                swarm.positions[0],
                swarm.positions[1],
                swarm.velocities[0],
                swarm.velocities[1],
                swarm.density,
                *swarm.state.values(),
            ]
        )
        agents_path = out_dir / f"agents_t{label}.csv"
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            header = ",".join(columns)
            np.savetxt(agents_path, rows, fmt="%.10g", delimiter=",", header=header, comments="")
        except OSError as e:
            raise IoError(f"cannot write agent snapshot {agents_path}: {e}") from e
        grid = self.snapshot_grid()
        planes = {name: channel.raster(grid) for name, channel in self.channels.items()}
        channels_path = write_archive(out_dir / f"channels_t{label}.mgf", grid, planes)
        logger.info(f"Snapshot at t={label}: {swarm.count} agents to {agents_path.name}")
        return agents_path, channels_path


def step_world(world: AgentWorld, steps: int = 1) -> AgentWorld:
    """Advance a world by ``steps`` steps."""
    for _ in range(steps):
        world.step()
    return world


def snapshot_steps(times: Iterable[float], dt: float, total: int) -> dict[int, float]:
    """Step index of each requested snapshot time within a run of ``total`` steps."""
    steps = {}
    for time in times:
        index = int(round(time / dt))
        if 0 <= index <= total:
            steps[index] = time
        else:
            logger.warning(f"Snapshot time {time:g} lies outside the run; skipped")
    return steps


def run_world(
    world: AgentWorld,
    out_dir: str | Path | None = None,
    snapshot_times: Iterable[float] = DEFAULT_SNAPSHOT_TIMES,
    steps: int | None = None,
) -> AgentWorld:
    """Run a world for its model duration, writing snapshots at the requested times.

    Args:
        world: World to run (agents are seeded when none are placed).
        out_dir: Snapshot directory; no snapshots are written when ``None``.
        snapshot_times: Simulated times to snapshot.
        steps: Step count overriding the model duration.

    Returns:
        The world after the last step.
    """
    if world.swarm is None:
        world.seed_agents()
    total = step_count(world.program.model) if steps is None else steps
    pending = snapshot_steps(snapshot_times, world.dt, total) if out_dir is not None else {}
    logger.info(
        f"Running agent world '{world.program.model.name}' for {total} steps "
        f"with {world.swarm.count} agents (seed={world.seed})"
    )
    report_every = max(1, total // 10)
    if 0 in pending:
        world.write_snapshot(out_dir)
    for _ in range(total):
        world.step()
        if world.step_index in pending:
            world.write_snapshot(out_dir)
        if world.step_index % report_every == 0:
            logger.info(f"Agent step {world.step_index}/{total} (t={world.t:g})")
    return world
