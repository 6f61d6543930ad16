"""Unit tests for the command-line driver and its run configuration."""

import os
from argparse import Namespace
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from src.morphgen.cli.config import RunConfig, parse_overrides
from src.morphgen.cli.main import main
from src.morphgen.engine.grid import Grid2D
from src.morphgen.errors import UsageError
from src.morphgen.io.archive import write_archive
from src.morphgen.sph.calibration import CalibrationTable
from src.shared.config import Settings

DECAY = """
substance s:
    scalar field C
  behavior:
    param k = 1
    D C = -k * C

body B of s:
  for 0 < x < 1, 0 < y < 1: C = 1
"""

SWARM = """
substance s:
    scalar fields:
      rho
      F
    vector field V
  behavior:
    D F = -F

body Swarm of s:
  for 0 < x < 1, 0 < y < 1: rho = 1, F = 1
"""


@pytest.fixture(autouse=True)
def quiet_logging():
    """Keep the CLI from reconfiguring the root logger during tests."""
    with patch("src.morphgen.cli.main.setup_logging"):
        yield


@pytest.fixture
def write_program(tmp_path, program_text):
    """Factory writing section text, wrapped in the program skeleton, to a file."""

    def _write(sections: str, name: str = "test.mg", **sim) -> Path:
        path = tmp_path / name
        path.write_text(program_text(sections, **sim), encoding="utf-8")
        return path

    return _write


class TestParseOverrides:
    """Tests for parse_overrides."""

    def test_entries(self):
        """name=value entries become a mapping of floats."""
        assert parse_overrides(["lambda=0.03", " k = 2"]) == {"lambda": 0.03, "k": 2.0}
        assert parse_overrides(None) == {}

    @pytest.mark.parametrize("entry", ["lambda", "=3", "lambda=fast"])
    def test_malformed(self, entry):
        """Entries without a name or a number are rejected."""
        with pytest.raises(UsageError):
            parse_overrides([entry])

    def test_duplicate(self):
        """A parameter may be overridden once."""
        with pytest.raises(UsageError, match="'k'"):
            parse_overrides(["k=1", "k=2"])


class TestRunConfig:
    """Tests for RunConfig.from_args."""

    def test_seed_from_environment(self):
        """Without a flag the seed comes from MORPHGEN_SEED."""
        with patch.dict(os.environ, {"MORPHGEN_SEED": "42"}):
            config = RunConfig.from_args(Namespace(program=Path("p.mg")), Settings())

        assert config.seed == 42

    def test_flag_beats_environment(self):
        """An explicit seed flag wins."""
        with patch.dict(os.environ, {"MORPHGEN_SEED": "42"}):
            config = RunConfig.from_args(Namespace(program=Path("p.mg"), seed=7), Settings())

        assert config.seed == 7

    def test_world_settings(self):
        """Agent flags and settings combine into the world settings."""
        args = Namespace(program=Path("p.mg"), agents=1186, diameter=0.006, brownian=0.01)

        config = RunConfig.from_args(args, Settings(kernel_scale=3.0))

        assert config.world.agents == 1186
        assert config.world.diameter == 0.006
        assert config.world.kernel_scale == 3.0
        assert config.world.brownian == 0.01
        assert config.snapshot_times == (0.0, 20.0, 70.0, 270.0)

    def test_invalid_agent_count(self):
        """Out-of-range values are usage errors naming the setting."""
        with pytest.raises(UsageError, match="agents"):
            RunConfig.from_args(Namespace(program=Path("p.mg"), agents=0), Settings())


class TestCheck:
    """Tests for the check command."""

    def test_corpus_program(self, corpus_dir, capsys):
        """The bundled agent program checks cleanly."""
        code = main(["check", str(corpus_dir / "sph_pathfinding.mg")])

        assert code == 0
        assert "OK" in capsys.readouterr().out

    def test_kind_mismatch(self, write_program, capsys):
        """A kind error exits 3 and names the field."""
        path = write_program(
            "substance s:\n    scalar field C\n    vector field V\n  behavior:\n"
            "    D C = del^2 V\n"
        )

        code = main(["check", str(path)])

        assert code == 3
        err = capsys.readouterr().err
        assert "'C'" in err
        assert str(path) in err

    def test_parse_error(self, write_program):
        """Malformed source exits 2."""
        path = write_program("substance s:\n    scalar field C\n  behavior:\n    D C = (1\n")

        assert main(["check", str(path)]) == 2

    def test_missing_file(self, tmp_path, capsys):
        """An unreadable file exits 1."""
        assert main(["check", str(tmp_path / "absent.mg")]) == 1
        assert "cannot read program" in capsys.readouterr().err

    def test_usage_error(self):
        """Unknown subcommands exit 1."""
        assert main(["frobnicate"]) == 1

    def test_print_canonical_source(self, write_program, capsys):
        """--print writes the canonical program text."""
        path = write_program(DECAY)

        assert main(["check", str(path), "--print"]) == 0
        assert "morphogenetic program test:" in capsys.readouterr().out

    def test_stability_reports(self, write_program, capsys):
        """Requested stability numbers are printed."""
        path = write_program(
            DECAY.replace("D C = -k * C", "D C = 0.01 * del^2 C")
            + "\nvisualization:\n  report diffusion number for C\n"
        )

        assert main(["check", str(path)]) == 0
        assert "diffusion number for C" in capsys.readouterr().out


class TestRun:
    """Tests for the run command."""

    def test_outputs(self, write_program, output_dir):
        """A run writes its log and report; the log lists overridden parameters."""
        path = write_program(DECAY)

        code = main(
            ["run", str(path), "--out", str(output_dir), "--override", "k=2", "--seed", "3"]
        )

        assert code == 0
        log = (output_dir / "run.log").read_text()
        assert "program:  test" in log
        assert "seed:     3" in log
        assert "k = 2.0  (override)" in log
        assert (output_dir / "report.html").exists()

    def test_unknown_override(self, write_program, output_dir, capsys):
        """Overriding a parameter the program does not define exits 1."""
        path = write_program(DECAY)

        code = main(["run", str(path), "--out", str(output_dir), "--override", "nope=1"])

        assert code == 1
        assert "nope" in capsys.readouterr().err

    def test_duplicate_override(self, write_program, output_dir):
        """Repeating an override exits 1."""
        path = write_program(DECAY)

        code = main(
            ["run", str(path), "--out", str(output_dir), "--override", "k=1", "--override", "k=2"]
        )

        assert code == 1

    def test_runtime_error(self, write_program, output_dir, capsys):
        """A field turning infinite exits 4 and the log records the failure."""
        path = write_program(DECAY.replace("D C = -k * C", "D C = 1 / (C - C)"))

        code = main(["run", str(path), "--out", str(output_dir)])

        assert code == 4
        assert "'C'" in capsys.readouterr().err
        assert "run aborted" in (output_dir / "run.log").read_text()


class TestSph:
    """Tests for the sph command."""

    def test_snapshots(self, write_program, output_dir):
        """An agent run writes snapshots at the requested times."""
        path = write_program(SWARM)

        code = main(
            [
                "sph",
                str(path),
                "--out",
                str(output_dir),
                "--agents",
                "20",
                "--diameter",
                "0.04",
                "--kernel-scale",
                "2",
                "--instant-kernel",
                "--no-calibration",
                "--steps",
                "2",
                "--snapshot-times",
                "0",
                "0.1",
            ]
        )

        assert code == 0
        assert (output_dir / "agents_t0.csv").exists()
        assert (output_dir / "agents_t0.1.csv").exists()
        assert (output_dir / "channels_t0.1.mgf").exists()
        assert "agents:   20" in (output_dir / "run.log").read_text()

    def test_run_log_records_world_settings(self, write_program, output_dir):
        """Every agent-world setting, the gradient floor included, reaches the run log."""
        path = write_program(SWARM)

        code = main(
            [
                "sph",
                str(path),
                "--out",
                str(output_dir),
                "--agents",
                "10",
                "--diameter",
                "0.04",
                "--instant-kernel",
                "--no-calibration",
                "--steps",
                "1",
                "--snapshot-times",
                "0",
            ]
        )

        assert code == 0
        log = (output_dir / "run.log").read_text()
        assert "gradient_floor: 1e-06" in log
        assert "instant_kernel: True" in log
        for name in ("brownian", "sensor_bias", "sensor_noise", "kernel_scale"):
            assert f"{name}:" in log

    def test_zero_agents(self, write_program, output_dir):
        """An agent count of zero is a usage error."""
        path = write_program(SWARM)

        assert main(["sph", str(path), "--out", str(output_dir), "--agents", "0"]) == 1

    def test_density_equation(self, write_program, output_dir, capsys):
        """A density with its own equation cannot be compiled to agents."""
        path = write_program(SWARM.replace("D F = -F", "D F = -F\n    D rho = 5"))

        code = main(["sph", str(path), "--out", str(output_dir)])

        assert code == 3
        assert "'rho'" in capsys.readouterr().err

    def test_loads_calibration(self, write_program, output_dir):
        """An existing calibration table is read instead of measured."""
        path = write_program(SWARM)
        table = output_dir / "cal.txt"
        CalibrationTable.zero().write(table)

        with patch("src.morphgen.cli.main.calibrate_motion") as calibrate:
            code = main(
                [
                    "sph",
                    str(path),
                    "--out",
                    str(output_dir),
                    "--agents",
                    "10",
                    "--diameter",
                    "0.04",
                    "--instant-kernel",
                    "--calibration",
                    str(table),
                    "--steps",
                    "1",
                    "--snapshot-times",
                    "0",
                ]
            )

        assert code == 0
        calibrate.assert_not_called()


class TestCalibrate:
    """Tests for the calibrate command."""

    def test_writes_table(self, write_program, output_dir, capsys):
        """Measured speeds land in the table file."""
        path = write_program(SWARM)
        table_path = output_dir / "table.txt"

        code = main(
            [
                "calibrate",
                str(path),
                "--diameter",
                "0.1",
                "--kernel-scale",
                "2",
                "--speeds",
                "0",
                "0.02",
                "--calibration",
                str(table_path),
            ]
        )

        assert code == 0
        table = CalibrationTable.read(table_path)
        np.testing.assert_allclose(table.speeds, [0.0, 0.02])
        assert "Table written" in capsys.readouterr().out


class TestRender:
    """Tests for the render command."""

    @pytest.fixture
    def archive(self, tmp_path) -> Path:
        grid = Grid2D(nx=8, ny=6, dx=0.125)
        x, _ = grid.centers
        return write_archive(tmp_path / "state.mgf", grid, {"C": x})

    def test_png(self, archive, tmp_path):
        """A plane renders to a PNG file."""
        out = tmp_path / "c.png"

        code = main(
            ["render", str(archive), "--field", "C", "--limits", "0", "1", "--out", str(out)]
        )

        assert code == 0
        assert out.read_bytes()[:4] == b"\x89PNG"

    def test_missing_field(self, archive, capsys):
        """Asking for an absent plane exits 4."""
        assert main(["render", str(archive), "--field", "P"]) == 4
        assert "'P'" in capsys.readouterr().err

    def test_degenerate_limits(self, archive, tmp_path):
        """Inverted limits are rejected."""
        code = main(
            ["render", str(archive), "--limits", "1", "0", "--out", str(tmp_path / "x.png")]
        )

        assert code == 4
