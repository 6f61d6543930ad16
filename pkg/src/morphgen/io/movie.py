"""Display and movie sinks.

Running displays write numbered PNG frames while a run progresses, final displays write one
image at the end, and movies write numbered frames plus a ``manifest.json`` describing them.
Encoding frames into a video file is left to external tools.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.morphgen.engine.grid import Grid2D
from src.morphgen.engine.simulation import SimState, Sink
from src.morphgen.errors import IoError
from src.morphgen.io.render import FrameImage, render
from src.morphgen.sema.model import DisplayPlan

logger = logging.getLogger(__name__)

FRAME_PATTERN = "frame_{:06d}.png"
MANIFEST = "manifest.json"


@dataclass(frozen=True)
class DisplayOptions:
    """Parsed options text of a display or movie command.

    Attributes:
        interval_steps: Steps between frames.
        levels: Contour level count.
    """

    interval_steps: int = 1
    levels: int = 10


def default_interval_steps(dt: float, interval_time: float = 0.1) -> int:
    """Steps covering ``interval_time`` of simulated time (at least one)."""
    return max(1, math.ceil(round(interval_time / dt, 9)))


def parse_display_options(
    options: str, dt: float, default_interval_time: float = 0.1, default_levels: int = 10
) -> DisplayOptions:
    """Read ``interval <time>``, ``every <steps>`` and ``levels <n>`` from options text.

    Words that are not recognized, or lack a valid value, are logged and ignored.
    """
    interval = default_interval_steps(dt, default_interval_time)
    levels = default_levels
    words = options.replace(",", " ").split()
    index = 0
    while index < len(words):
        key = words[index].lower()
        value = words[index + 1] if index + 1 < len(words) else None
        try:
            if key == "interval" and value is not None:
                interval = default_interval_steps(dt, float(value))
                index += 2
                continue
            if key == "every" and value is not None:
                interval = max(1, int(value))
                index += 2
                continue
            if key == "levels" and value is not None:
                levels = max(1, int(value))
                index += 2
                continue
        except ValueError:
            logger.warning(f"Ignoring display option '{key} {value}': value is not a number")
            index += 2
            continue
        logger.warning(f"Ignoring unrecognized display option '{words[index]}'")
        index += 1
    return DisplayOptions(interval_steps=interval, levels=levels)


def render_plan(
    plan: DisplayPlan, state: SimState, levels: int = 10, scale: int = 0
) -> FrameImage:
    """Render the field of a display plan in the current state."""
    return render(
        plan.kind,
        state.fields[plan.field],
        state.grid,
        limits=plan.limits,
        pitch=plan.pitch,
        levels=levels,
        scale=scale,
    )


def _save(image: FrameImage, path: Path) -> Path:
    try:
        return image.save(path)
    except OSError as e:
        raise IoError(f"cannot write frame {path}: {e}") from e


class DisplaySink(Sink):
    """Writes the frames of one ``display`` command.

    Running displays write ``<out>/frames/<field>_<kind>/frame_NNNNNN.png`` every interval and
    the initial state at the start; final displays write ``<out>/<field>_<kind>_final.png``.
    """

    def __init__(
        self,
        plan: DisplayPlan,
        out_dir: str | Path,
        dt: float,
        default_interval_time: float = 0.1,
        default_levels: int = 10,
        scale: int = 0,
    ):
        self.plan = plan
        self.out_dir = Path(out_dir)
        self.options = parse_display_options(
            plan.options, dt, default_interval_time, default_levels
        )
        self.scale = scale
        self.frames: list[Path] = []

    @property
    def directory(self) -> Path:
        return self.out_dir / "frames" / f"{self.plan.field}_{self.plan.kind}"

    def _write(self, state: SimState) -> None:
        image = render_plan(self.plan, state, self.options.levels, self.scale)
        path = self.directory / FRAME_PATTERN.format(len(self.frames) + 1)
        self.frames.append(_save(image, path))

    def begin(self, state: SimState) -> None:
        if self.plan.time == "running":
            self._write(state)

    def record(self, state: SimState) -> None:
        if self.plan.time == "running" and state.step % self.options.interval_steps == 0:
            self._write(state)

    def end(self, state: SimState) -> None:
        if self.plan.time == "final":
            image = render_plan(self.plan, state, self.options.levels, self.scale)
            path = self.out_dir / f"{self.plan.field}_{self.plan.kind}_final.png"
            self.frames.append(_save(image, path))
        logger.info(f"Display of {self.plan.field} as {self.plan.kind}: {len(self.frames)} frames")


class MovieSink(Sink):
    """Writes the numbered frames and manifest of one ``make movie`` command.

    A frame is written after every ``interval_steps``-th step; a run without steps writes the
    initial state as its only frame.
    """

    def __init__(
        self,
        plan: DisplayPlan,
        out_dir: str | Path,
        dt: float,
        default_interval_time: float = 0.1,
        default_levels: int = 10,
        scale: int = 0,
    ):
        self.plan = plan
        self.dt = dt
        self.options = parse_display_options(
            plan.options, dt, default_interval_time, default_levels
        )
        self.scale = scale
        self.directory = Path(out_dir) / Path(plan.movie or plan.field).stem
        self.frames: list[Path] = []

    @property
    def frame_rate(self) -> float:
        return 1.0 / (self.options.interval_steps * self.dt)

    def _write(self, state: SimState) -> None:
        image = render_plan(self.plan, state, self.options.levels, self.scale)
        path = self.directory / FRAME_PATTERN.format(len(self.frames) + 1)
        self.frames.append(_save(image, path))

    def record(self, state: SimState) -> None:
        if state.step % self.options.interval_steps == 0:
            self._write(state)

    def end(self, state: SimState) -> None:
        if not self.frames:
            self._write(state)
        write_manifest(
            self.directory,
            movie=self.plan.movie or "",
            field=self.plan.field,
            kind=self.plan.kind,
            frame_rate=self.frame_rate,
            frames=[p.name for p in self.frames],
        )


def write_manifest(directory: Path, **manifest) -> Path:
    """Write the ``manifest.json`` of a frame directory.

    Raises:
        IoError: The manifest cannot be written.
    """
    path = Path(directory) / MANIFEST
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write movie manifest {path}: {e}") from e
    logger.info(
        f"Movie {manifest.get('movie') or directory.name}: {len(manifest.get('frames', []))} "
        f"frames at {manifest.get('frame_rate', 0):g} fps in {directory}"
    )
    return path


def write_movie_frames(
    frames: list[np.ndarray],
    kind: str,
    directory: str | Path,
    grid: Grid2D,
    frame_rate: float,
    limits: tuple[float, float] | None = None,
) -> Path:
    """Render recorded grids of one field as numbered PNG frames plus a manifest.

    Args:
        frames: Field grids in frame order.
        kind: Display kind.
        directory: Target directory.
        grid: Geometry of the grids.
        frame_rate: Frames per simulated time unit.
        limits: Fixed color limits, or ``None`` for per-frame min/max.

    Returns:
        Path of the manifest.
    """
    directory = Path(directory)
    names = []
    for index, values in enumerate(frames, start=1):
        image = render(kind, values, grid, limits=limits)
        names.append(_save(image, directory / FRAME_PATTERN.format(index)).name)
    return write_manifest(directory, kind=kind, frame_rate=frame_rate, frames=names)


def sinks_for_model(
    dt: float,
    plans: tuple[DisplayPlan, ...],
    out_dir: str | Path,
    default_interval_time: float = 0.1,
    default_levels: int = 10,
    scale: int = 0,
) -> list[Sink]:
    """One sink per display or movie command of a model."""
    sinks: list[Sink] = []
    for plan in plans:
        cls = MovieSink if plan.movie else DisplaySink
        sinks.append(
            cls(plan, out_dir, dt, default_interval_time, default_levels, scale)
        )
    return sinks
