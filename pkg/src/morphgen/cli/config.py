"""Run Configuration.

This module assembles the effective configuration of one command from the toolchain settings
and the command-line flags. Flags take precedence over ``MORPHGEN_`` environment variables,
which take precedence over the defaults.
"""

from __future__ import annotations

from argparse import Namespace
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError

from src.morphgen.errors import UsageError
from src.morphgen.sph.world import DEFAULT_SNAPSHOT_TIMES, WorldSettings
from src.shared.config import Settings, get_settings


def parse_overrides(entries: list[str] | None) -> dict[str, float]:
    """Parse ``name=value`` override entries.

    Raises:
        UsageError: An entry is malformed, its value is not a number, or a name repeats.
    """
    overrides: dict[str, float] = {}
    for entry in entries or []:
        name, sep, text = entry.partition("=")
        name = name.strip()
        if not sep or not name:
            raise UsageError(f"override '{entry}' must have the form name=value")
        try:
            value = float(text)
        except ValueError:
            raise UsageError(f"override '{entry}' does not assign a number") from None
        if name in overrides:
            raise UsageError(f"parameter '{name}' is overridden more than once")
        overrides[name] = value
    return overrides


class RunConfig(BaseModel):
    """Effective configuration of one command."""

    program: Path | None = Field(default=None, description="Morphgen source file")
    out: Path = Field(default=Path("./out"), description="Output directory")
    seed: int = Field(default=0, description="Master seed for noise and agent placement")
    overrides: dict[str, float] = Field(default_factory=dict, description="Parameter overrides")
    dw_interpretation: Literal["difference", "sde"] = Field(
        default="difference", description="Reading of DW noise terms"
    )
    workers: int = Field(default=1, ge=1, description="Threads per field step")
    steps: int | None = Field(default=None, ge=0, description="Step count overriding duration")

    density: str = Field(default="rho", description="Swarm density field")
    velocity: str = Field(default="V", description="Agent velocity field")
    snapshot_times: tuple[float, ...] = Field(
        default=DEFAULT_SNAPSHOT_TIMES, description="Simulated times of agent snapshots"
    )
    calibration: Path | None = Field(default=None, description="Calibration table file")
    calibrate: bool = Field(default=True, description="Correct sensed gradients for motion")
    world: WorldSettings = Field(default_factory=WorldSettings)

    @classmethod
    def from_args(cls, args: Namespace, settings: Settings | None = None) -> RunConfig:
        """Combine parsed flags with the settings.

        Raises:
            UsageError: A flag value is out of range or an override is malformed.
        """
        settings = settings or get_settings()

        def flag(name: str, default):
            value = getattr(args, name, None)
            return default if value is None else value

        try:
            world = WorldSettings(
                agents=flag("agents", 166),
                diameter=flag("diameter", 0.016),
                kernel_scale=flag("kernel_scale", settings.kernel_scale),
                decay_step_product=settings.decay_step_product,
                cells_per_diameter=settings.cells_per_diameter,
                brownian=flag("brownian", settings.brownian),
                sensor_bias=flag("sensor_bias", settings.sensor_bias),
                sensor_noise=flag("sensor_noise", settings.sensor_noise),
                gradient_floor=settings.gradient_floor,
                instant_kernel=bool(getattr(args, "instant_kernel", False)),
            )
            return cls(
                program=getattr(args, "program", None),
                out=Path(flag("out", settings.output_dir)),
                seed=flag("seed", settings.seed),
                overrides=parse_overrides(getattr(args, "override", None)),
                dw_interpretation=flag("dw", settings.dw_interpretation),
                workers=flag("workers", settings.workers),
                steps=getattr(args, "steps", None),
                density=flag("density", "rho"),
                velocity=flag("velocity", "V"),
                snapshot_times=tuple(flag("snapshot_times", DEFAULT_SNAPSHOT_TIMES)),
                calibration=getattr(args, "calibration", None),
                calibrate=not getattr(args, "no_calibration", False),
                world=world,
            )
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in error['loc'])}: {error['msg']}" for error in e.errors()
            )
            raise UsageError(f"invalid configuration: {problems}") from None
