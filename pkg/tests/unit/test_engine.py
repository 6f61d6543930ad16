"""Unit tests for the grid operators, the explicit-Euler engine, noise and stability numbers."""

import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.morphgen.engine.grid import Grid2D
from src.morphgen.engine.noise import NoisePlan
from src.morphgen.engine.simulation import allocate, apply_region, run, step, step_count
from src.morphgen.engine.stability import (
    courant_number,
    diffusion_coefficient,
    diffusion_number,
    peclet_number,
    report_stability,
)
from src.morphgen.errors import GridTooSmall, NonFiniteField
from src.morphgen.frontend.ast import Noise
from src.morphgen.frontend.parser import parse_expr_source
from src.morphgen.sema.model import BoxRegion, DiscRegion
from tests.unit.test_frontend import PATH_ROUTING

SPACE = "-1 < x < 1, -1 < y < 1"


def decay_source(statement: str, init: str = "C = 1") -> str:
    return f"""
substance s:
  scalar field C
  behavior:
    param t_C = 10
    {statement}

body Everywhere of s:
  for 0 < x < 1, 0 < y < 1: {init}
"""


@pytest.fixture
def grid() -> Grid2D:
    return Grid2D(nx=12, ny=10, dx=0.1, xlo=-0.6, ylo=-0.5)


class TestGrid:
    """Tests for Grid2D and its operators."""

    def test_for_space(self):
        """Cell counts follow the space extent and the cell size."""
        grid = Grid2D.for_space(BoxRegion(-1, 1, -1, 1), 0.01)

        assert grid.shape == (200, 200)
        assert grid.xhi == pytest.approx(1.0)

    def test_too_small(self):
        """Fewer than three cells along an axis is rejected."""
        with pytest.raises(GridTooSmall):
            Grid2D(nx=2, ny=10, dx=0.1)

    def test_gradient_of_linear_field(self, grid):
        """The gradient of x is (1, 0) everywhere, edges included."""
        x, _ = grid.centers

        result = grid.gradient(x)

        assert_allclose(result[0], 1.0, atol=1e-12)
        assert_allclose(result[1], 0.0, atol=1e-12)

    def test_gradient_of_constant(self, grid):
        """A constant has zero gradient."""
        assert_array_equal(grid.gradient(np.full(grid.shape, 3.0)), 0.0)

    def test_gradient_of_quadratic_interior(self, grid):
        """Central differences of x^2 give exactly 2x inside."""
        x, _ = grid.centers

        result = grid.gradient(x**2)

        assert_allclose(result[0][:, 1:-1], 2 * x[:, 1:-1], atol=1e-12)

    def test_laplacian_of_quadratic(self, grid):
        """The stencil gives 4 for x^2 + y^2 inside."""
        x, y = grid.centers

        result = grid.laplacian(x**2 + y**2)

        assert_allclose(result[1:-1, 1:-1], 4.0, atol=1e-9)

    def test_laplacian_of_constant(self, grid):
        """Mirrored ghosts make the Laplacian of a constant zero on the edge too."""
        assert_allclose(grid.laplacian(np.full(grid.shape, 2.5)), 0.0, atol=1e-12)

    def test_laplacian_of_spike(self):
        """A unit spike gives -4/dx^2 at its cell and 1/dx^2 at its four neighbors."""
        grid = Grid2D(nx=5, ny=5, dx=0.1)
        f = grid.zeros()
        f[2, 2] = 1.0

        result = grid.laplacian(f)

        assert result[2, 2] == pytest.approx(-400.0)
        for j, i in [(1, 2), (3, 2), (2, 1), (2, 3)]:
            assert result[j, i] == pytest.approx(100.0)
        assert result[0, 0] == 0.0

    def test_divergence_of_position(self, grid):
        """div (x, y) is 2 on every cell, edges included."""
        x, y = grid.centers

        result = grid.divergence(np.stack([x, y]))

        assert_allclose(result, 2.0, atol=1e-12)

    def test_divergence_of_constant(self, grid):
        """A uniform vector field has no divergence anywhere, walls included."""
        v = np.stack([np.full(grid.shape, 0.3), np.full(grid.shape, -0.7)])

        assert_allclose(grid.divergence(v), 0.0, atol=1e-12)

    def test_divergence_edges_are_one_sided(self, grid):
        """Edge cells use the same one-sided differences as the gradient."""
        x, y = grid.centers
        v = np.stack([x**2, y**3])

        result = grid.divergence(v)

        dx = grid.dx
        assert_allclose(result[:, 0], grid.gradient(v[0])[0][:, 0] + grid.gradient(v[1])[1][:, 0])
        central_y = (v[1][5, 0] - v[1][3, 0]) / (2 * dx)
        assert_allclose(result[4, 0], (v[0][4, 1] - v[0][4, 0]) / dx + central_y)
        assert_allclose(result[-1, 5], 2 * x[-1, 5] + (v[1][-1, 5] - v[1][-2, 5]) / dx)

    def test_divergence_sums_to_zero_inside_quiet_rim(self, grid):
        """A field that vanishes on the two outer rings moves nothing across the walls."""
        rng = np.random.default_rng(3)
        v = grid.zeros(vector=True)
        v[:, 2:-2, 2:-2] = rng.normal(size=(2, grid.ny - 4, grid.nx - 4))

        assert abs(grid.divergence(v).sum()) < 1e-10

    def test_divergence_of_gradient_matches_laplacian(self, grid):
        """div(del f) equals del^2 f for a quadratic at cells two away from the walls."""
        x, y = grid.centers
        f = 0.5 * x**2 + 2 * y**2 - x * y

        composed = grid.divergence(grid.gradient(f))

        assert_allclose(composed[2:-2, 2:-2], grid.laplacian(f)[2:-2, 2:-2], atol=1e-9)

    def test_cell_of_clamps(self, grid):
        """Points are mapped to their cell and clamped to the grid."""
        assert grid.cell_of(-0.55, -0.45) == (0, 0)
        assert grid.cell_of(10.0, -10.0) == (0, grid.nx - 1)


class TestAllocate:
    """Tests for allocate and apply_region."""

    def test_cohort_box(self, compile_source):
        """The cohort body sets a 10 x 5 block of cells and nothing else."""
        model = compile_source(PATH_ROUTING, space=SPACE, spatial=100)

        state = allocate(model)
        C = state.fields["C"]

        assert C.sum() == 50
        j, i = state.grid.cell_of(0.0, -0.925)
        assert C[j, i] == 1.0
        assert state.fields["G"].sum() == 50

    def test_obstacle_disc_matches_brute_force(self, compile_source):
        """A disc marks exactly the cells whose centers are within its radius."""
        model = compile_source(PATH_ROUTING, space=SPACE, spatial=100)
        state = allocate(model)
        state.fields["P"][:] = 0.0

        count = apply_region(state, DiscRegion(-0.1, 0.225, 0.06), [("P", 1.0)])

        expected = 0
        for j in range(state.grid.ny):
            for i in range(state.grid.nx):
                cx = -1 + (i + 0.5) * 0.01
                cy = -1 + (j + 0.5) * 0.01
                expected += math.hypot(cx + 0.1, cy - 0.225) <= 0.06
        assert count == expected
        assert 100 < count < 125

    def test_no_bodies_is_zero(self, compile_source):
        """Without bodies every grid starts at zero."""
        model = compile_source("substance s:\n  scalar field C\n  vector field V\n")

        state = allocate(model)

        assert_array_equal(state.fields["C"], 0.0)
        assert state.fields["V"].shape == (2, 10, 10)

    def test_later_body_wins(self, compile_source):
        """Overlapping bodies are applied in source order."""
        model = compile_source(
            """
            substance s:
              scalar field P
            body First of s:
              for 0 < x < 0.6, 0 < y < 1: P = 1
            body Second of s:
              for 0.4 < x < 1, 0 < y < 1: P = 2
            """
        )

        P = allocate(model).fields["P"]

        assert P[5, 0] == 1.0
        assert P[5, 5] == 2.0
        assert P[5, 9] == 2.0

    def test_vector_init(self, compile_source):
        """A vector initialization sets both components."""
        model = compile_source(
            "substance s:\n  vector field V\n"
            "body B of s:\n  for 0 < x < 1, 0 < y < 1: V = vec(0.5, -1)\n"
        )

        V = allocate(model).fields["V"]

        assert_array_equal(V[0], 0.5)
        assert_array_equal(V[1], -1.0)

    def test_one_cell_box(self, compile_source):
        """A box exactly one cell wide selects that cell."""
        state = allocate(compile_source("substance s:\n  scalar field C\n"))

        count = apply_region(state, BoxRegion(0.3, 0.4, 0.5, 0.6), [("C", 7.0)])

        assert count == 1
        assert state.fields["C"][5, 3] == 7.0

    def test_region_outside_space_warns(self, compile_source, caplog):
        """A region holding no cell center changes nothing and warns."""
        state = allocate(compile_source("substance s:\n  scalar field C\n"))

        with caplog.at_level(logging.WARNING):
            count = apply_region(state, BoxRegion(5, 6, 5, 6), [("C", 1.0)])

        assert count == 0
        assert_array_equal(state.fields["C"], 0.0)
        assert "contains no cell centers" in caplog.text


class TestStep:
    """Tests for step and run."""

    def test_decay_one_step(self, compile_source):
        """One Euler step of C/t_C decay from 1 gives 0.99."""
        state = allocate(compile_source(decay_source("D C = -C/t_C")))

        step(state)

        assert_allclose(state.fields["C"], 0.99)
        assert state.step == 1
        assert state.t == pytest.approx(0.1)

    def test_zero_rate_is_unchanged(self, compile_source):
        """``D C = 0`` keeps the field fixed."""
        state = allocate(compile_source(decay_source("D C = 0", "C = 0.4")))

        for _ in range(5):
            step(state)

        assert_array_equal(state.fields["C"], 0.4)

    def test_spike_diffusion(self, compile_source):
        """A spike loses 4 D dt/dx^2 and each neighbor gains D dt/dx^2."""
        state = allocate(compile_source(decay_source("D C = 0.01 * del^2 C", "C = 0")))
        state.fields["C"][5, 5] = 1.0

        step(state)
        C = state.fields["C"]

        assert C[5, 5] == pytest.approx(0.6)
        assert C[4, 5] == pytest.approx(0.1)
        assert C[5, 6] == pytest.approx(0.1)
        assert C.sum() == pytest.approx(1.0)

    def test_algebraic_fields_computed_first(self, compile_source):
        """Algebraic assignments see the pre-step state and feed the update."""
        model = compile_source(
            """
            substance s:
              scalar fields:
                C
                B
              behavior:
                B = 2 * C
                D C = B
            body Everywhere of s:
              for 0 < x < 1, 0 < y < 1: C = 1
            """
        )
        state = allocate(model)

        step(state)

        assert_allclose(state.fields["B"], 2.0)
        assert_allclose(state.fields["C"], 1.2)

    def test_jacobi_update(self, compile_source):
        """Every rate reads the pre-step values of the other fields."""
        model = compile_source(
            """
            substance s:
              scalar fields:
                A
                B
              behavior:
                D A = B
                D B = -A
            body Everywhere of s:
              for 0 < x < 1, 0 < y < 1: A = 1
            """
        )
        state = allocate(model)

        step(state)

        assert_allclose(state.fields["A"], 1.0)
        assert_allclose(state.fields["B"], -0.1)

    def test_time_gate(self, compile_source):
        """``[t > 0.05]`` is closed on the first step and open on the second."""
        state = allocate(compile_source(decay_source("D C = [t > 0.05]", "C = 0")))

        step(state)
        assert_array_equal(state.fields["C"], 0.0)
        step(state)
        assert_allclose(state.fields["C"], 0.1)

    def test_non_finite_aborts(self, compile_source):
        """Division by a zero field names the field and the step."""
        state = allocate(compile_source(decay_source("D C = 1/C", "C = 0")))

        with np.errstate(divide="ignore"), pytest.raises(NonFiniteField) as excinfo:
            step(state)

        assert excinfo.value.field == "C"
        assert excinfo.value.step == 1

    def test_step_count(self, compile_source):
        """Duration 1 at dt 0.1 runs exactly ten steps."""
        model = compile_source(decay_source("D C = -C/t_C"))

        assert step_count(model) == 10
        assert run(model).step == 10

    def test_saturation_stays_in_unit_interval(self, compile_source):
        """``k X (1 - X)`` with k dt < 1 keeps values within [0, 1]."""
        model = compile_source(
            """
            substance s:
              scalar field X
              behavior:
                D X = 5 * X * (1 - X)
            body Low of s:
              for 0 < x < 0.5, 0 < y < 1: X = 0.02
            body High of s:
              for 0.5 < x < 1, 0 < y < 1: X = 0.97
            """,
            duration=5,
        )

        X = run(model).fields["X"]

        assert X.min() >= 0.0
        assert X.max() <= 1.0

    def test_advection_conserves_mass(self, compile_source):
        """``D C = -div[C*V]`` keeps the total amount of C over 1000 steps."""
        model = compile_source(
            """
            substance s:
              scalar field C
              vector field V
              behavior:
                D C = -div[C*V]
            body Blob of s:
              for 0.3 < x < 0.7, 0.3 < y < 0.7: C = 1
            body Flow of s:
              for 0.1 < x < 0.9, 0.1 < y < 0.9: V = vec(0.1, 0.05)
            """,
            duration=10,
            temporal=100,
            spatial=20,
        )
        initial = allocate(model).fields["C"].sum()

        final = run(model).fields["C"].sum()

        assert abs(final - initial) / initial < 1e-6

    def test_save_then_load(self, compile_source, tmp_path):
        """A saved field loads back bit for bit in a second run."""
        saving = compile_source(
            decay_source("D C = 0.01 * del^2 C - C/t_C"), extra_sim="save C to c.mgf"
        )
        loading = compile_source(
            decay_source("D C = 0", "C = 0"), extra_sim="load C from c.mgf"
        )

        first = run(saving, save_dir=tmp_path)
        second = run(loading, load_dir=tmp_path, steps=0)

        assert (tmp_path / "c.mgf").exists()
        assert_array_equal(second.fields["C"], first.fields["C"])


class TestNoise:
    """Tests for NoisePlan and noise terms in runs."""

    def test_same_site_and_step_repeat(self):
        """Samples are a pure function of seed, site and step."""
        plan = NoisePlan(seed=11)

        assert_array_equal(plan.samples(0, 4, (6, 6)), plan.samples(0, 4, (6, 6)))
        assert_array_equal(NoisePlan(11).samples(2, 3, (5,)), plan.samples(2, 3, (5,)))

    def test_steps_and_sites_differ(self):
        """Different steps or sites draw different samples."""
        plan = NoisePlan(seed=11)

        assert not np.array_equal(plan.samples(0, 1, (8,)), plan.samples(0, 2, (8,)))
        assert not np.array_equal(plan.samples(0, 1, (8,)), plan.samples(1, 1, (8,)))

    def test_standard_normal_statistics(self):
        """A million draws have mean 0 and variance 1 within tolerance."""
        xi = NoisePlan(seed=5).samples(0, 0, (1_000_000,))

        assert abs(xi.mean()) < 0.005
        assert abs(xi.var() - 1.0) < 0.01

    def test_zero_weight(self):
        """A zero weight yields zeros of the requested kind."""
        plan = NoisePlan(seed=1)

        result = plan.sample(Noise(None, 2), 0, 0.0, (4, 4))

        assert result.shape == (2, 4, 4)
        assert_array_equal(result, 0.0)

    def test_vector_weight_with_two_components_is_scalar(self):
        """A vector weight dotted with two samples gives a scalar grid."""
        plan = NoisePlan(seed=1)

        result = plan.sample(Noise(None, 2), 0, np.ones((2, 4, 4)), (4, 4))

        assert result.shape == (4, 4)

    def test_sde_scaling(self):
        """The sde reading divides samples by sqrt(dt)."""
        assert NoisePlan(1, dt=0.01, interpretation="sde").scale == pytest.approx(10.0)
        assert NoisePlan(1, dt=0.01).scale == 1.0

    def test_unknown_interpretation(self):
        """Only the two readings are accepted."""
        with pytest.raises(ValueError):
            NoisePlan(1, interpretation="ito")

    def test_runs_repeat_across_worker_counts(self, compile_source):
        """Same seed gives bit-identical grids with one or several workers."""
        model = compile_source(
            """
            substance s:
              scalar fields:
                A
                B
              behavior:
                D A = [0.1 DW] - A
                D B = [0.2 DW] + 0.01 * del^2 B
            """
        )

        serial = run(model, seed=42, workers=1)
        threaded = run(model, seed=42, workers=4)
        other = run(model, seed=43)

        assert_array_equal(serial.fields["A"], threaded.fields["A"])
        assert_array_equal(serial.fields["B"], threaded.fields["B"])
        assert not np.array_equal(serial.fields["A"], other.fields["A"])


class TestStability:
    """Tests for the stability numbers and reports."""

    def test_diffusion_number(self):
        """D dt / dx^2."""
        assert diffusion_number(0.03, 0.01, 0.1) == pytest.approx(0.03)

    def test_courant_number(self):
        """vmax dt / dx."""
        assert courant_number(1.0, 0.01, 0.01) == pytest.approx(1.0)

    def test_peclet_number(self):
        """vmax dx / D, infinite without diffusion."""
        assert peclet_number(1.0, 0.01, 0.03) == pytest.approx(1 / 3)
        assert peclet_number(1.0, 0.01, 0.0) == math.inf

    def test_diffusion_coefficient_extraction(self):
        """Coefficients of del^2 F are summed; gates count as one."""
        expr = parse_expr_source("0.03 * del^2 A - A/100 + [A > 0] 0.02 * del^2 A")

        assert diffusion_coefficient(expr, "A") == pytest.approx(0.05)
        assert diffusion_coefficient(expr, "B") == 0.0
        assert diffusion_coefficient(None, "A") == 0.0

    def test_reports_for_path_routing(self, compile_source, caplog):
        """Requested reports come back in order; exceeded limits warn."""
        model = compile_source(PATH_ROUTING, space=SPACE)

        with caplog.at_level(logging.WARNING):
            reports = report_stability(model)

        assert [r.kind for r in reports] == ["diffusion", "Peclet"]
        assert reports[0].value == pytest.approx(0.3)
        assert reports[0].exceeded
        assert "diffusion number for A" in caplog.text
        assert reports[1].subject == "C and V"

    def test_courant_uses_field_speed(self, compile_source):
        """Courant numbers read the peak speed of the supplied state."""
        model = compile_source(
            "substance s:\n  vector field V\n"
            "body B of s:\n  for 0 < x < 1, 0 < y < 1: V = vec(0.3, 0.4)\n"
            "visualization:\n  report Courant number for V\n"
        )
        state = allocate(model)

        (report,) = report_stability(model, fields=state.fields)

        assert report.value == pytest.approx(0.5)
        assert not report.exceeded
