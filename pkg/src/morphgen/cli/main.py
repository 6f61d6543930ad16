"""Morphgen command-line driver.

Subcommands:

- ``check``: parse, resolve and kind-check a program and print its stability reports;
- ``run``: execute a program on the field engine;
- ``sph``: compile a program to agents and run the agent world;
- ``calibrate``: measure the motion bias of sensed self-gradients;
- ``render``: draw one plane of a field archive as a PNG.

Exit codes: 0 success, 1 usage or I/O, 2 parse, 3 semantic or compile, 4 runtime.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from src.morphgen.cli.config import RunConfig
from src.morphgen.engine.simulation import allocate, run
from src.morphgen.engine.stability import StabilityReport, report_stability
from src.morphgen.errors import IoError, MissingField, MorphgenError
from src.morphgen.frontend.parser import parse_source
from src.morphgen.frontend.printer import format_program
from src.morphgen.io.archive import read_archive
from src.morphgen.io.movie import sinks_for_model
from src.morphgen.io.render import render
from src.morphgen.sema.model import CompiledModel
from src.morphgen.sema.resolve import compile_program
from src.morphgen.sph.calibration import CalibrationTable, calibrate_motion
from src.morphgen.sph.compile import compile_sph
from src.morphgen.sph.world import AgentWorld, run_world
from src.shared.config import get_settings
from src.shared.console import print_section, safe_print
from src.shared.html_reporter import generate_report
from src.shared.logger import setup_logging
from src.shared.run_log import RunLog, RunLogHandler

logger = logging.getLogger(__name__)

# calibration speeds in agent diameters per unit time
DEFAULT_CALIBRATION_SPEEDS = (0.0, 0.1, 0.2, 0.4)
CALIBRATION_FILE = "calibration.txt"


def load_program(path: Path, overrides: dict[str, float] | None = None) -> CompiledModel:
    """Read, parse, resolve and kind-check a program file.

    Raises:
        IoError: The file cannot be read.
        ParseError: The source is malformed.
        SemanticError: The program does not resolve or kind-check.
    """
    try:
        source = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read program {path}: {e.strerror or e}") from e
    try:
        return compile_program(parse_source(source), overrides)
    except MorphgenError as e:
        raise e.with_file(str(path))


def _print_stability(reports: list[StabilityReport]) -> None:
    if not reports:
        return
    print_section("Stability")
    for report in reports:
        safe_print(f"  {report.describe()}")


def _start_run_log(model: CompiledModel, command: str, config: RunConfig) -> RunLog:
    run_log = RunLog(program=model.name, command=command, seed=config.seed)
    run_log.parameters(model.params, model.overrides)
    for note in model.notes:
        run_log.note(note)
    if model.log_params:
        selected = ", ".join(f"{name} = {model.params[name]:g}" for name in model.log_params)
        run_log.note(f"logged parameters: {selected}")
    return run_log


def _finish_run_log(run_log: RunLog, out: Path, status: str) -> None:
    run_log.finish(status=status)
    run_log.write(out)
    report = generate_report(run_log, out)
    logger.info(f"Run log and report written to {out} ({report.name})")


class _RunCapture:
    """Copies toolchain warnings into a run log while active."""

    def __init__(self, run_log: RunLog):
        self.handler = RunLogHandler(run_log)

    def __enter__(self) -> _RunCapture:
        logging.getLogger().addHandler(self.handler)
        return self

    def __exit__(self, *exc) -> None:
        logging.getLogger().removeHandler(self.handler)


# --- commands ------------------------------------------------------------------------------


def cmd_check(args: argparse.Namespace) -> int:
    """Check a program without running it."""
    config = RunConfig.from_args(args)
    model = load_program(config.program, config.overrides)
    if args.print:
        source = Path(config.program).read_text(encoding="utf-8")
        safe_print(format_program(parse_source(source)), end="")
    reports = report_stability(model, fields=allocate(model).fields) if model.stability else []
    _print_stability(reports)
    safe_print(
        f"{config.program}: OK ({len(model.fields)} fields, {len(model.params)} parameters)"
    )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    """Execute a program on the field engine."""
    settings = get_settings()
    config = RunConfig.from_args(args, settings)
    model = load_program(config.program, config.overrides)
    out = config.out
    run_log = _start_run_log(model, "run", config)
    status = "failed"
    with _RunCapture(run_log):
        try:
            initial = allocate(model, config.seed, config.dw_interpretation)
            reports = report_stability(model, fields=initial.fields)
            for report in reports:
                run_log.stability(report.describe(), report.exceeded)
            _print_stability(reports)
            sinks = sinks_for_model(
                model.dt,
                model.displays,
                out,
                settings.display_interval_time,
                settings.contour_levels,
                settings.frame_scale,
            )
            state = run(
                model,
                sinks,
                seed=config.seed,
                interpretation=config.dw_interpretation,
                workers=config.workers,
                load_dir=Path(config.program).parent,
                save_dir=out,
                steps=config.steps,
            )
            status = "completed"
        except MorphgenError as e:
            run_log.warning(f"run aborted: {e.diagnostic()}")
            raise
        finally:
            _finish_run_log(run_log, out, status)
    safe_print(f"{model.name}: {state.step} steps to t={state.t:g}; outputs in {out}")
    return 0


def _calibration_for(config: RunConfig, world: AgentWorld) -> CalibrationTable:
    if not config.calibrate:
        return CalibrationTable.zero()
    if config.calibration is not None and Path(config.calibration).exists():
        return CalibrationTable.read(config.calibration)
    setup = config.world.setup(world.dt)
    speeds = [s * config.world.diameter for s in DEFAULT_CALIBRATION_SPEEDS]
    table = calibrate_motion(setup, speeds)
    table.write(config.calibration or config.out / CALIBRATION_FILE)
    return table


def cmd_sph(args: argparse.Namespace) -> int:
    """Compile a program to agents and run the agent world."""
    config = RunConfig.from_args(args)
    model = load_program(config.program, config.overrides)
    kernel = config.world.setup(model.dt).kernel()
    try:
        program = compile_sph(model, config.density, config.velocity, kernel)
    except MorphgenError as e:
        raise e.with_file(str(config.program))
    out = config.out
    run_log = _start_run_log(model, "sph", config)
    run_log.metadata.update(config.world.model_dump())
    status = "failed"
    with _RunCapture(run_log):
        try:
            world = AgentWorld(
                program, config.world, seed=config.seed, interpretation=config.dw_interpretation
            )
            world.calibration = _calibration_for(config, world)
            world.seed_agents(config.world.agents)
            run_world(world, out, config.snapshot_times, config.steps)
            status = "completed"
        except MorphgenError as e:
            run_log.warning(f"agent run aborted: {e.diagnostic()}")
            raise
        finally:
            _finish_run_log(run_log, out, status)
    safe_print(
        f"{model.name}: {world.swarm.count} agents, {world.step_index} steps to "
        f"t={world.t:g}; snapshots in {out}"
    )
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    """Write a calibration table for a program's step size and the given diameter."""
    config = RunConfig.from_args(args)
    model = load_program(config.program, config.overrides)
    setup = config.world.setup(model.dt)
    speeds = args.speeds or [s * config.world.diameter for s in DEFAULT_CALIBRATION_SPEEDS]
    table = calibrate_motion(setup, speeds)
    path = table.write(config.calibration or config.out / CALIBRATION_FILE)
    print_section("Calibration")
    for speed, (along, across) in zip(table.speeds, table.biases, strict=True):
        safe_print(f"  speed {speed:<10.4g} along {along:<12.6g} across {across:.6g}")
    safe_print(f"Table written to {path}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    """Render one archive plane as a PNG."""
    archive = read_archive(args.archive)
    name = args.field or next(iter(archive.fields), None)
    if name is None or name not in archive.fields:
        raise MissingField(f"archive {args.archive} holds no field '{name}'")
    limits = tuple(args.limits) if args.limits else None
    image = render(
        args.style,
        archive.fields[name],
        archive.grid,
        limits=limits,
        levels=args.levels,
        scale=args.scale,
    )
    out = Path(args.out or Path(args.archive).with_suffix(f".{name}.png"))
    try:
        image.save(out)
    except OSError as e:
        raise IoError(f"cannot write image {out}: {e}") from e
    safe_print(f"Rendered {name} as {args.style} to {out}")
    return 0


# --- argument parsing ----------------------------------------------------------------------


def _add_program_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("program", type=Path, help="Morphgen source file")
    parser.add_argument(
        "--override",
        action="append",
        metavar="NAME=VALUE",
        help="Replace a parameter value (repeatable)",
    )


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--seed", type=int, help="Master seed (default: MORPHGEN_SEED or 0)")
    parser.add_argument("--dw", choices=["difference", "sde"], help="Reading of DW terms")
    parser.add_argument("--steps", type=int, help="Step count overriding the duration")


def _add_world_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--agents", type=int, help="Number of agents (default 166)")
    parser.add_argument("--diameter", type=float, help="Agent diameter (default 0.016)")
    parser.add_argument("--kernel-scale", type=float, help="Smoothing length in diameters")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser of the ``morphgen`` command."""
    parser = argparse.ArgumentParser(
        prog="morphgen", description="Morphogenetic programming toolchain"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="Parse, resolve and kind-check a program")
    _add_program_flags(check)
    check.add_argument("--print", action="store_true", help="Print the canonical source")
    check.set_defaults(handler=cmd_check)

    run_cmd = commands.add_parser("run", help="Run a program on the field engine")
    _add_program_flags(run_cmd)
    _add_run_flags(run_cmd)
    run_cmd.add_argument("--workers", type=int, help="Threads per step")
    run_cmd.set_defaults(handler=cmd_run)

    sph = commands.add_parser("sph", help="Run a program as an agent swarm")
    _add_program_flags(sph)
    _add_run_flags(sph)
    _add_world_flags(sph)
    sph.add_argument("--density", help="Swarm density field (default rho)")
    sph.add_argument("--velocity", help="Agent velocity field (default V)")
    sph.add_argument(
        "--snapshot-times", type=float, nargs="+", help="Simulated times of snapshots"
    )
    sph.add_argument("--calibration", type=Path, help="Calibration table to load or create")
    sph.add_argument(
        "--no-calibration", action="store_true", help="Use uncorrected sensed gradients"
    )
    sph.add_argument("--brownian", type=float, help="Brownian perturbation magnitude")
    sph.add_argument("--sensor-bias", type=float, help="Offset added to sensor readings")
    sph.add_argument("--sensor-noise", type=float, help="Sensor noise deviation")
    sph.add_argument(
        "--instant-kernel", action="store_true", help="Evaluate channels as kernel sums"
    )
    sph.set_defaults(handler=cmd_sph)

    calibrate = commands.add_parser("calibrate", help="Measure motion bias of self-gradients")
    _add_program_flags(calibrate)
    _add_world_flags(calibrate)
    calibrate.add_argument("--out", type=Path, help="Output directory")
    calibrate.add_argument("--calibration", type=Path, help="Table file to write")
    calibrate.add_argument("--speeds", type=float, nargs="+", help="Speeds to measure")
    calibrate.set_defaults(handler=cmd_calibrate)

    render_cmd = commands.add_parser("render", help="Render one archive plane as a PNG")
    render_cmd.add_argument("archive", type=Path, help="Field archive (.mgf)")
    render_cmd.add_argument("--field", help="Plane to render (default: first)")
    render_cmd.add_argument(
        "--style", choices=["colors", "contours", "quivers", "mesh"], default="colors"
    )
    render_cmd.add_argument("--limits", type=float, nargs=2, metavar=("LO", "HI"))
    render_cmd.add_argument("--levels", type=int, default=10, help="Contour line count")
    render_cmd.add_argument("--scale", type=int, default=0, help="Pixels per cell")
    render_cmd.add_argument("--out", type=Path, help="PNG file to write")
    render_cmd.set_defaults(handler=cmd_render)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run one ``morphgen`` command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    setup_logging("DEBUG" if args.verbose else None)

    try:
        return args.handler(args)
    except MorphgenError as e:
        safe_print(f"morphgen: {e.diagnostic()}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        safe_print("morphgen: interrupted", file=sys.stderr)
        return 4
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return 4


if __name__ == "__main__":
    sys.exit(main())
