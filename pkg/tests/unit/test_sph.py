"""Unit tests for SPH kernels, agent channels, compilation to agents, calibration and the world."""

import logging
import math
from unittest.mock import patch

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.morphgen.engine.grid import Grid2D
from src.morphgen.errors import (
    IoError,
    NonConservativeDensity,
    NonConvergence,
    NonFiniteField,
    OutOfDomain,
    QuadratureNonConvergence,
    SingularAtOrigin,
    UnsupportedConstruct,
    ZeroDensity,
)
from src.morphgen.frontend.parser import parse_source
from src.morphgen.io.archive import read_archive
from src.morphgen.sema.model import BoxRegion
from src.morphgen.sema.resolve import compile_program
from src.morphgen.sph import kernels
from src.morphgen.sph.agents import (
    EAST,
    NORTH,
    SOUTH,
    WEST,
    AgentSwarm,
    production_points,
    sample_grid,
    scatter_grid,
    sensor_points,
)
from src.morphgen.sph.calibration import (
    CalibrationSetup,
    CalibrationTable,
    calibrate_motion,
    measure_self_gradient,
    raw_gradient,
)
from src.morphgen.sph.channels import InstantChannel, MorphogenChannel
from src.morphgen.sph.compile import compile_sph
from src.morphgen.sph.estimates import (
    density_rate,
    estimate_laplacian,
    production_rate,
    update_correction,
)
from src.morphgen.sph.kernels import (
    KernelSpec,
    calibrate_alpha,
    kernel_normalization,
    kernel_value,
)
from src.morphgen.sph.world import (
    AgentWorld,
    WorldSettings,
    run_world,
    snapshot_steps,
    step_world,
)

WORLD = """
substance s:
    scalar fields:
      rho
      F
      A
    vector field V
  behavior:
    D F = 0.5

body Swarm of s:
  for 0 < x < 1, 0 < y < 1: rho = 1, F = 1

body Left of s:
  for 0 < x < 0.5, 0 < y < 1: A = 2
"""

HALF_SWARM = """
substance s:
    scalar fields:
      rho
      F
    vector field V
  behavior:
    D F = -F

body Swarm of s:
  for 0 < x < 0.5, 0 < y < 1: rho = 1, F = 1
"""

DRIFT = """
substance s:
    scalar fields:
      rho
      F
    vector field V
  behavior:
    D F = -F
    V = vec(1, 0)

body Swarm of s:
  for 0 < x < 1, 0 < y < 1: rho = 1, F = 1
"""

# lattice of agents 0.04 apart on 0.1..0.9; agent 220 sits at (0.5, 0.5)
CENTER = 220


def lattice(count: int, spacing: float, origin: float) -> np.ndarray:
    coords = origin + spacing * np.arange(count)
    x, y = np.meshgrid(coords, coords)
    return np.stack([x.ravel(), y.ravel()])


@pytest.fixture
def instant_settings() -> WorldSettings:
    return WorldSettings(diameter=0.04, kernel_scale=1.5, instant_kernel=True)


@pytest.fixture
def grid_settings() -> WorldSettings:
    return WorldSettings(diameter=0.04, kernel_scale=2, cells_per_diameter=1)


@pytest.fixture
def world_program(compile_source):
    """Factory compiling section text to an agent program."""

    def _program(sections: str = WORLD, **kwargs):
        return compile_sph(compile_source(sections), **kwargs)

    return _program


@pytest.fixture
def lattice_world(world_program, instant_settings) -> AgentWorld:
    world = AgentWorld(world_program(), instant_settings)
    world.place(lattice(21, 0.04, 0.1))
    return world


@pytest.fixture
def unit_lattice():
    """81 x 81 agents 0.01 apart around the origin and an instant channel with h = 0.04."""
    spacing = 0.01
    positions = lattice(81, spacing, -0.4)
    spec = KernelSpec.from_length(2, 0.04, 1.0)
    channel = InstantChannel("f", spec, radius=0.005)
    return positions, spacing, spec, channel


class TestKernels:
    """Tests for kernel values, normalization and the Laplacian constant."""

    @pytest.mark.parametrize("dimension", [1, 2, 3])
    def test_normalized(self, dimension):
        """Every kernel integrates to one over its dimension."""
        spec = KernelSpec.from_length(dimension, 0.5, 2.0)

        assert kernel_normalization(spec) == pytest.approx(1.0, rel=1e-6)

    @pytest.mark.parametrize("dimension", [1, 2, 3])
    def test_alpha_is_twice_h_squared(self, dimension):
        """The Laplacian constant equals 2 h^2 in every dimension."""
        spec = KernelSpec.from_length(dimension, 0.3, 1.0)

        assert calibrate_alpha(spec) == pytest.approx(2 * 0.3**2, rel=1e-6)

    def test_from_length(self):
        """E follows from h and k."""
        spec = KernelSpec.from_length(2, 0.1, 4.0)

        assert spec.E == pytest.approx(0.04)
        assert spec.h == pytest.approx(0.1)

    def test_invalid_spec(self):
        """Dimensions other than 1 to 3 and non-positive rates are rejected."""
        with pytest.raises(ValueError):
            KernelSpec(dimension=4, E=1.0, k=1.0)
        with pytest.raises(ValueError):
            KernelSpec(dimension=2, E=1.0, k=0.0)

    def test_values(self):
        """Closed forms in one, two and three dimensions."""
        h = 0.5
        one = KernelSpec.from_length(1, h, 1.0)
        three = KernelSpec.from_length(3, h, 1.0)

        assert kernel_value(one, 0.0) == pytest.approx(1 / h)
        assert kernel_value(one, 1.0) == pytest.approx(math.exp(-2) / h)
        assert kernel_value(three, 1.0) == pytest.approx(math.exp(-2) / (4 * math.pi * h * h))

    def test_two_dimensional_decreasing(self):
        """The 2D kernel falls off monotonically with distance."""
        spec = KernelSpec.from_length(2, 1.0, 1.0)

        values = kernel_value(spec, np.array([0.1, 0.5, 1.0, 2.0, 4.0]))

        assert np.all(np.diff(values) < 0)

    def test_singular_at_origin(self):
        """2D and 3D kernels cannot be sampled at zero distance."""
        with pytest.raises(SingularAtOrigin):
            kernel_value(KernelSpec.from_length(2, 1.0, 1.0), 0.0)
        with pytest.raises(SingularAtOrigin):
            kernel_value(KernelSpec.from_length(3, 1.0, 1.0), np.array([1.0, 0.0]))

    def test_negative_distance(self):
        """Negative distances are rejected."""
        with pytest.raises(ValueError):
            kernel_value(KernelSpec.from_length(1, 1.0, 1.0), -0.1)

    def test_quadrature_failure(self):
        """A quadrature that reports a warning message raises."""
        failed = (1.0, 0.5, {"neval": 21}, "roundoff error detected")

        with patch.object(kernels.integrate, "quad", return_value=failed):
            with pytest.raises(QuadratureNonConvergence, match="roundoff"):
                calibrate_alpha(KernelSpec.from_length(2, 1.0, 1.0))


class TestEstimates:
    """Tests for production rates, the Laplacian estimate and the transient correction."""

    def test_production_rate(self):
        """k m f / rho, elementwise for arrays."""
        assert production_rate(2.0, 0.5, 4.0, 3.0) == pytest.approx(0.75)
        assert_allclose(
            production_rate(1.0, 1.0, np.array([1.0, 2.0]), np.array([2.0, 2.0])), [2.0, 1.0]
        )

    def test_production_rate_zero_density(self):
        """A non-positive density anywhere raises."""
        with pytest.raises(ZeroDensity):
            production_rate(1.0, 1.0, np.array([1.0, 0.0]), 1.0)

    def test_density_rate(self):
        """The density channel is fed at k m."""
        assert density_rate(0.5, 0.2) == pytest.approx(0.1)

    def test_estimate_laplacian(self):
        """(2 / alpha) * (sensed - own)."""
        assert estimate_laplacian(1.5, 1.0, 0.5) == pytest.approx(2.0)

    def test_estimate_laplacian_invalid_alpha(self):
        """alpha must be positive."""
        with pytest.raises(ValueError):
            estimate_laplacian(1.0, 1.0, 0.0)

    def test_correction_follows_linear_growth(self):
        """A field growing at rate a drives g along (a/k)(1 - exp(-k t)) toward a/k."""
        a, k, dt = 0.1, 1.0, 0.01
        g = 0.0
        for step in range(1, 1001):
            g = update_correction(g, a * dt, k, dt)
            if step == 50:
                assert g == pytest.approx((a / k) * (1 - math.exp(-k * 0.5)), abs=1e-3)

        assert g == pytest.approx(a / k, abs=1e-3)

    def test_correction_invalid_step(self):
        """The step size must be positive."""
        with pytest.raises(ValueError):
            update_correction(0.0, 0.0, 1.0, 0.0)


class TestAgents:
    """Tests for agent geometry and grid sampling."""

    def test_sensor_order(self):
        """Sensors face east, north, west and south."""
        points = sensor_points(np.array([[1.0], [2.0]]), 0.5)

        assert_allclose(points[EAST, :, 0], [1.5, 2.0], atol=1e-12)
        assert_allclose(points[NORTH, :, 0], [1.0, 2.5], atol=1e-12)
        assert_allclose(points[WEST, :, 0], [0.5, 2.0], atol=1e-12)
        assert_allclose(points[SOUTH, :, 0], [1.0, 1.5], atol=1e-12)

    def test_production_points_between_sensors(self):
        """Production points sit on the body circle at 45 degrees."""
        points = production_points(np.zeros((2, 3)), 1.0)

        assert points.shape == (4, 2, 3)
        assert_allclose(points[0, :, 0], [math.sqrt(0.5), math.sqrt(0.5)])
        assert_allclose(np.hypot(points[:, 0], points[:, 1]), 1.0)

    def test_sample_linear_field(self):
        """Bilinear sampling is exact for a linear field away from the edges."""
        grid = Grid2D(nx=10, ny=10, dx=0.1)
        x, y = grid.centers

        values = sample_grid(grid, 2 * x + y, np.array([[0.33, 0.61], [0.57, 0.22]]))

        assert_allclose(values, [2 * 0.33 + 0.57, 2 * 0.61 + 0.22])

    def test_sample_vector_field(self):
        """Vector grids are sampled per component."""
        grid = Grid2D(nx=5, ny=5, dx=0.2)
        field = grid.zeros(vector=True)
        field[0] = 1.0
        field[1] = -2.0

        values = sample_grid(grid, field, np.array([[0.5], [0.5]]))

        assert values.shape == (2, 1)
        assert_allclose(values[:, 0], [1.0, -2.0])

    def test_scatter_conserves_amounts(self):
        """Scattered amounts add up to what was deposited."""
        grid = Grid2D(nx=8, ny=8, dx=0.125)
        target = grid.zeros()
        points = np.array([[0.2, 0.5, 0.99, 0.01], [0.3, 0.5, 0.5, 0.02]])

        scatter_grid(grid, target, points, np.array([1.0, 2.0, 0.5, 0.25]))

        assert target.sum() == pytest.approx(3.75)

    def test_scatter_at_cell_center(self):
        """A point on a cell center lands in that cell only."""
        grid = Grid2D(nx=4, ny=4, dx=1.0)
        target = grid.zeros()

        scatter_grid(grid, target, np.array([[1.5], [2.5]]), np.array([3.0]))

        assert target[2, 1] == pytest.approx(3.0)
        assert target.sum() == pytest.approx(3.0)

    def test_swarm_validation(self):
        """Radius and mass must be positive."""
        with pytest.raises(ValueError):
            AgentSwarm(positions=np.zeros((2, 1)), velocities=np.zeros((2, 1)), radius=0, mass=1)
        with pytest.raises(ValueError):
            AgentSwarm(positions=np.zeros((2, 1)), velocities=np.zeros((2, 1)), radius=1, mass=0)

    def test_agent_snapshot(self):
        """A snapshot carries stored values, the density and the corrections."""
        swarm = AgentSwarm(
            positions=np.array([[0.1, 0.2], [0.3, 0.4]]),
            velocities=np.zeros((2, 2)),
            radius=0.01,
            mass=0.5,
            state={"F": np.array([1.0, 2.0])},
            density=np.array([3.0, 4.0]),
            corrections={"F": np.array([0.0, 0.1])},
        )

        agent = swarm.agent(1)

        assert agent.id == 1
        assert agent.position == (0.2, 0.4)
        assert agent.state == {"F": 2.0, "rho": 4.0}
        assert agent.g == {"F": 0.1}
        assert swarm.count == 2


class TestChannels:
    """Tests for grid and instant morphogen channels."""

    def test_step_amount(self):
        """Deposits are scaled by (exp(k dt) - 1) / k."""
        channel = InstantChannel("f", KernelSpec.from_length(2, 1.0, 2.0), radius=0.1)

        assert_allclose(channel.step_amount(np.array([1.0]), 0.1), math.expm1(0.2) / 2)

    def test_total_settles_at_rate_over_k(self):
        """Constant production at rate r leaves r / k of substance after decay."""
        grid = Grid2D(nx=40, ny=40, dx=0.05)
        channel = MorphogenChannel("f", grid, KernelSpec.from_length(2, 0.2, 1.0), radius=0.025)

        assert channel.substeps(0.05) == 4
        for _ in range(300):
            channel.emit(np.array([[1.0], [1.0]]), np.array([2.0]), 0.05)
            channel.advance(0.05)

        assert channel.total() == pytest.approx(2.0, rel=1e-5)

    def test_decay_without_emission(self):
        """Diffusion conserves substance; decay removes exp(-k t) of it."""
        grid = Grid2D(nx=10, ny=10, dx=0.1)
        channel = MorphogenChannel("f", grid, KernelSpec.from_length(2, 0.1, 0.5), radius=0.05)
        channel.concentration = grid.zeros() + 1.0
        x, _ = grid.centers
        channel.concentration += x

        initial = channel.total()
        for _ in range(10):
            channel.advance(0.1)

        assert channel.total() == pytest.approx(initial * math.exp(-0.5), rel=1e-9)

    def test_steady_profile_matches_kernel(self):
        """A resting source of unit amount settles into the 2D kernel."""
        spec = KernelSpec.from_length(2, 0.4, 0.5)
        grid = Grid2D.for_space(BoxRegion(-2.4, 2.4, -2.4, 2.4), 0.05)
        channel = MorphogenChannel("f", grid, spec, radius=0.05)
        origin = np.zeros((2, 1))

        steps = channel.equilibrate(origin, np.array([spec.k]), 0.1)
        distances = np.array([0.4, 0.8, 1.2])
        samples = channel.sample(np.stack([distances, np.zeros(3)]))

        assert steps > 0
        assert_allclose(samples, kernel_value(spec, distances), rtol=0.1)

    def test_raster_on_own_grid(self):
        """Rastering onto the channel grid returns a copy of the concentration."""
        grid = Grid2D(nx=6, ny=6, dx=0.1)
        channel = MorphogenChannel("f", grid, KernelSpec.from_length(2, 0.1, 1.0), radius=0.05)
        channel.concentration[2, 3] = 5.0

        raster = channel.raster(grid)
        raster[2, 3] = 0.0

        assert channel.concentration[2, 3] == 5.0

    def test_describe_reports_substeps(self):
        """The description names the mesh and the substep count."""
        grid = Grid2D(nx=40, ny=40, dx=0.05)
        channel = MorphogenChannel("f", grid, KernelSpec.from_length(2, 0.2, 1.0), radius=0.025)

        assert "40x40 cells, 4 substeps" in channel.describe(0.05)

    def test_instant_amounts_relax(self):
        """Per-agent amounts relax toward rate / k."""
        channel = InstantChannel("f", KernelSpec.from_length(2, 0.1, 1.0), radius=0.01)
        position = np.array([[0.0], [0.0]])

        channel.emit(position, np.array([2.0]), 0.1)
        channel.advance(0.1)

        assert_allclose(channel.amounts, [2.0 * (1 - math.exp(-0.1))])
        assert channel.equilibrate(position, np.array([2.0]), 0.1) == 0
        assert_allclose(channel.amounts, [2.0])

    def test_instant_density_of_lattice(self, unit_lattice):
        """Unit amounts on a lattice of spacing s read as a density of 1 / s^2."""
        positions, spacing, spec, channel = unit_lattice
        channel.equilibrate(positions, np.full(positions.shape[1], spec.k), 0.1)

        value = channel.sample(np.zeros((2, 1)))[0]

        assert value == pytest.approx(1 / spacing**2, rel=0.1)

    def test_instant_constant_field(self, unit_lattice):
        """Amounts c s^2 reproduce the constant c."""
        positions, spacing, spec, channel = unit_lattice
        channel.equilibrate(positions, np.full(positions.shape[1], spec.k * 0.7 * spacing**2), 0.1)

        assert channel.sample(np.zeros((2, 1)))[0] == pytest.approx(0.7, rel=0.05)

    def test_instant_laplacian_of_quadratic(self, unit_lattice):
        """The sensed-minus-own estimate recovers del^2 (x^2 + y^2) = 4."""
        positions, spacing, spec, channel = unit_lattice
        f = positions[0] ** 2 + positions[1] ** 2
        channel.equilibrate(positions, spec.k * spacing**2 * f, 0.1)

        sensed = channel.sample(np.zeros((2, 1)))[0]

        assert estimate_laplacian(sensed, 0.0, calibrate_alpha(spec)) == pytest.approx(
            4.0, rel=0.1
        )

    def test_instant_gradient_of_linear_field(self, unit_lattice):
        """Opposite sensors see the slope of a linear field."""
        positions, spacing, spec, channel = unit_lattice
        f = 1 + 2 * positions[0]
        channel.equilibrate(positions, spec.k * spacing**2 * f, 0.1)

        gradient = raw_gradient(channel.readings(np.zeros((2, 1))), channel.radius)[:, 0]

        assert gradient[0] == pytest.approx(2.0, rel=0.1)
        assert gradient[1] == pytest.approx(0.0, abs=1e-6)


class TestCompile:
    """Tests for compile_sph."""

    def test_pathfinding_program(self, corpus_dir):
        """The bundled program compiles to two state channels and an algebraic velocity."""
        text = (corpus_dir / "sph_pathfinding.mg").read_text()
        model = compile_program(parse_source(text))

        program = compile_sph(model)

        assert program.channels == {"rho": "M0", "S": "M1", "T": "M2"}
        assert program.state_fields == ["S", "T"]
        assert program.environment_fields == ["A", "B"]
        assert program.roles["V"] == "velocity"
        assert program.velocity_mode == "algebraic"
        assert set(program.updates) == {"S", "T"}

    def test_density_equation_rejected(self, compile_source):
        """The swarm density may not have its own equation."""
        source = WORLD.replace("D F = 0.5", "D F = 0.5\n    D rho = 5")

        with pytest.raises(NonConservativeDensity, match="'rho'"):
            compile_sph(compile_source(source))

    def test_static_velocity(self, compile_source):
        """Without state or velocity equations, only the density is emitted."""
        source = HALF_SWARM.replace("  behavior:\n    D F = -F\n", "")

        program = compile_sph(compile_source(source))

        assert program.velocity_mode == "static"
        assert program.channels == {"rho": "M0"}
        assert program.environment_fields == ["F"]

    def test_integrated_velocity(self, compile_source):
        """A change equation for the velocity integrates it per agent."""
        source = HALF_SWARM.replace("D F = -F", "D F = -F\n    D V = vec(0, -1)")

        assert compile_sph(compile_source(source)).velocity_mode == "integrated"

    def test_extra_vector_field(self, compile_source):
        """Only the velocity may be a vector field."""
        source = WORLD.replace("vector field V", "vector fields:\n      V\n      U")

        with pytest.raises(UnsupportedConstruct, match="'U'"):
            compile_sph(compile_source(source))

    def test_missing_swarm_fields(self, compile_source):
        """The density and velocity fields must exist with the right kinds."""
        model = compile_source(WORLD)

        with pytest.raises(UnsupportedConstruct, match="'C'"):
            compile_sph(model, density="C")
        with pytest.raises(UnsupportedConstruct, match="vector"):
            compile_sph(model, velocity="F")

    @pytest.mark.parametrize(
        "rhs",
        ["div(V)", "del^2 (F * F)", "dot(del (F * F), V)", "del^2 rho"],
    )
    def test_unsupported_operators(self, compile_source, rhs):
        """Operators without an agent reading are rejected at compile time."""
        source = WORLD.replace("D F = 0.5", f"D F = {rhs}")

        with pytest.raises(UnsupportedConstruct):
            compile_sph(compile_source(source))

    def test_alpha_from_kernel(self, compile_source):
        """Passing a kernel computes its Laplacian constant."""
        kernel = KernelSpec.from_length(2, 0.1, 1.0)

        program = compile_sph(compile_source(WORLD), kernel=kernel)

        assert program.alpha == pytest.approx(0.02, rel=1e-6)


class TestCalibration:
    """Tests for self-gradient calibration."""

    @pytest.fixture
    def setup(self) -> CalibrationSetup:
        return CalibrationSetup(
            diameter=0.1, kernel_scale=2, decay_step_product=0.05, cells_per_diameter=2, dt=0.05
        )

    def test_setup_geometry(self, setup):
        """Radius, cell size and kernel follow the diameter."""
        kernel = setup.kernel()

        assert setup.radius == pytest.approx(0.05)
        assert setup.dx == pytest.approx(0.05)
        assert kernel.h == pytest.approx(0.2)
        assert kernel.k == pytest.approx(1.0)

    def test_self_gradient_trails_motion(self, setup):
        """Moving agents sense their own trail behind them, more strongly at higher speed."""
        table = calibrate_motion(setup, [0.0, 0.1, 0.2], max_steps=300)

        still, slow, fast = table.biases
        assert_allclose(still, 0.0, atol=1e-8)
        assert slow[0] < 0
        assert fast[0] < slow[0]
        assert abs(slow[1]) < 0.05 * abs(slow[0])
        assert abs(fast[1]) < 0.05 * abs(fast[0])

    def test_non_convergence(self, setup):
        """A budget shorter than two averaging windows cannot settle."""
        with pytest.raises(NonConvergence) as excinfo:
            measure_self_gradient(setup, 0.1, 0.0, max_steps=25)

        assert excinfo.value.steps == 25

    def test_speeds_must_include_zero(self, setup):
        """The resting agent anchors the table."""
        with pytest.raises(ValueError):
            calibrate_motion(setup, [0.1, 0.2])

    def test_bias_interpolation(self):
        """Biases interpolate linearly and clamp beyond the last speed."""
        table = CalibrationTable(speeds=np.array([1.0, 0.0]), biases=np.array([[-2, 1], [0, 0]]))

        assert_allclose(table.speeds, [0.0, 1.0])
        assert_allclose(table.bias(0.5), [-1.0, 0.5])
        assert_allclose(table.bias(3.0), [-2.0, 1.0])

    def test_bias_world_rotation(self):
        """Heading-frame biases rotate with the velocity; resting agents get none."""
        table = CalibrationTable(
            speeds=np.array([0.0, 1.0]), biases=np.array([[0.3, 0.3], [-2.0, 0.5]])
        )
        velocities = np.array([[0.0, 0.0], [1.0, 0.0]])

        bias = table.bias_world(velocities)

        assert_allclose(bias[:, 0], [-0.5, -2.0])
        assert_array_equal(bias[:, 1], [0.0, 0.0])

    def test_write_and_read(self, tmp_path):
        """Tables survive a trip through the text format."""
        table = CalibrationTable(speeds=np.array([0.0, 0.5]), biases=np.array([[0, 0], [-1, 0]]))

        path = table.write(tmp_path / "cal" / "table.txt")
        loaded = CalibrationTable.read(path)

        assert path.read_text().startswith("# speed bias_parallel bias_perpendicular")
        assert_allclose(loaded.biases, table.biases)

    def test_read_missing(self, tmp_path):
        """A missing table is an I/O error."""
        with pytest.raises(IoError):
            CalibrationTable.read(tmp_path / "absent.txt")

    def test_mismatched_table(self):
        """Each speed needs exactly one bias."""
        with pytest.raises(ValueError):
            CalibrationTable(speeds=np.array([0.0, 1.0]), biases=np.zeros((3, 2)))


class TestWorld:
    """Tests for AgentWorld."""

    def test_channels_per_emitted_field(self, lattice_world):
        """Density and state fields get channels; environment cues do not."""
        assert list(lattice_world.channels) == ["rho", "F"]
        assert isinstance(lattice_world.channels["F"], InstantChannel)
        assert lattice_world.alpha == pytest.approx(2 * 0.06**2, rel=1e-6)

    def test_senses_uniform_field(self, lattice_world):
        """Agents inside a uniform swarm sense the shared value."""
        assert lattice_world.sense("F")[CENTER] == pytest.approx(1.0, rel=0.02)

    def test_correction_added_to_sensed_value(self, lattice_world):
        """The sensed estimate is the channel reading plus the correction."""
        before = lattice_world.sense("F")
        lattice_world.swarm.corrections["F"][:] = 0.3

        assert_allclose(lattice_world.sense("F") - before, 0.3)

    def test_correction_tracks_growing_field(self, lattice_world):
        """With the correction, the sensed value keeps up with a field growing in time."""
        step_world(lattice_world, 61)

        swarm = lattice_world.swarm
        expected = swarm.previous["F"][CENTER]
        reading = lattice_world.channels["F"].readings(swarm.positions).mean(axis=0)[CENTER]
        assert expected == pytest.approx(4.0)
        assert lattice_world.sense("F")[CENTER] == pytest.approx(expected, rel=0.02)
        assert reading < 0.85 * expected

    def test_gradient_floor(self, lattice_world):
        """The symmetric gradient at the lattice center reads as exactly zero."""
        gradient = lattice_world.sense_gradient("F")

        assert_array_equal(gradient[:, CENTER], [0.0, 0.0])

    def test_motion_bias_removed(self, world_program, instant_settings):
        """The calibrated bias, scaled by the agent's own amount, is subtracted."""
        table = CalibrationTable(
            speeds=np.array([0.0, 1.0]), biases=np.array([[0.0, 0.0], [-2.0, 0.0]])
        )
        world = AgentWorld(world_program(), instant_settings, calibration=table)
        world.place(lattice(21, 0.04, 0.1))
        world.swarm.velocities[0] = 1.0

        gradient = world.sense_gradient("F")[:, CENTER]

        swarm = world.swarm
        own = swarm.mass * swarm.state["F"][CENTER] / swarm.density[CENTER]
        assert_allclose(gradient, [2.0 * own, 0.0], atol=1e-9)

    def test_environment_values(self, lattice_world):
        """Environment cues are read from their initialized grids."""
        values = lattice_world.own_value("A")

        x = lattice_world.swarm.positions[0]
        assert_allclose(values[x < 0.4], 2.0)
        assert_allclose(values[x > 0.6], 0.0, atol=1e-12)

    def test_out_of_domain(self, lattice_world):
        """Sensing past the space boundary raises."""
        lattice_world.swarm.positions[:, 0] = (2.0, 0.5)

        with pytest.raises(OutOfDomain, match="agent 0"):
            lattice_world.sense("F")

    def test_seeding_follows_density(self, world_program, grid_settings):
        """Agents are seeded where the density is positive and share its mass."""
        world = AgentWorld(world_program(HALF_SWARM), grid_settings, seed=3)

        swarm = world.seed_agents(50)

        assert swarm.count == 50
        assert np.all(swarm.positions[0] <= 0.5)
        assert swarm.mass == pytest.approx(0.01)
        assert_allclose(swarm.state["F"][swarm.positions[0] < 0.45], 1.0)
        assert np.all(swarm.density > 0)

    def test_seeded_runs_repeat(self, world_program, grid_settings):
        """Equal seeds give equal trajectories; another seed moves agents differently."""
        settings = grid_settings.model_copy(update={"brownian": 0.05})

        def final_positions(seed: int) -> np.ndarray:
            world = AgentWorld(world_program(HALF_SWARM), settings, seed=seed)
            world.seed_agents(20)
            return step_world(world, 5).swarm.positions

        assert_array_equal(final_positions(7), final_positions(7))
        assert not np.array_equal(final_positions(7), final_positions(8))

    def test_algebraic_velocity_clamped(self, world_program, instant_settings, caplog):
        """Agents pushed into a wall stop at it; the first clamp warns once."""
        world = AgentWorld(world_program(DRIFT), instant_settings)
        world.place(np.array([[0.5, 0.7], [0.5, 0.5]]))

        with caplog.at_level(logging.DEBUG, logger="src.morphgen.sph.world"):
            step_world(world, 10)

        assert_allclose(world.swarm.velocities[0], 1.0)
        assert_allclose(world.swarm.positions[0], 1.0 - world.radius)
        warnings = [
            r
            for r in caplog.records
            if r.name == "src.morphgen.sph.world" and r.levelno == logging.WARNING
        ]
        assert len(warnings) == 1
        assert "clamped" in warnings[0].getMessage()

    def test_state_decays(self, world_program, instant_settings):
        """Agent state integrates its own equation."""
        world = AgentWorld(world_program(DRIFT), instant_settings)
        world.place(np.array([[0.5], [0.5]]))

        step_world(world, 3)

        assert world.swarm.state["F"][0] == pytest.approx(0.9**3)

    def test_non_finite_state(self, world_program, instant_settings):
        """A rule producing infinity stops the run with the field and step."""
        source = WORLD.replace("D F = 0.5", "D F = 1 / (F - F)")
        world = AgentWorld(world_program(source), instant_settings)
        world.place(lattice(3, 0.2, 0.3))

        with pytest.raises(NonFiniteField) as excinfo:
            world.step()

        assert excinfo.value.field == "F"
        assert excinfo.value.step == 1

    def test_snapshot_steps(self):
        """Requested times map to steps; times past the run are skipped."""
        assert snapshot_steps([0, 0.2, 5.0], 0.1, 10) == {0: 0, 2: 0.2}

    def test_run_writes_snapshots(self, world_program, instant_settings, output_dir):
        """Snapshots hold agent tables and rastered channels."""
        world = AgentWorld(world_program(), instant_settings)
        world.place(lattice(5, 0.15, 0.2))

        run_world(world, output_dir, snapshot_times=(0, 0.2), steps=3)

        names = sorted(p.name for p in output_dir.iterdir())
        assert names == ["agents_t0.2.csv", "agents_t0.csv", "channels_t0.2.mgf", "channels_t0.mgf"]
        header = (output_dir / "agents_t0.csv").read_text().splitlines()[0]
        assert header == "id,x,y,vx,vy,rho,F"
        archive = read_archive(output_dir / "channels_t0.2.mgf")
        assert set(archive.fields) == {"rho", "F"}
        assert world.step_index == 3
