"""Frame rendering: colors, contours and quivers.

Images are rendered with the y axis pointing up, so pixel ``(0, 0)`` is the top-left corner
``(xlo, yhi)`` of the space. Rendering is a pure function of its inputs.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import contourpy
import numpy as np
from matplotlib import colormaps
from PIL import Image, ImageDraw

from src.morphgen.engine.grid import Grid2D
from src.morphgen.errors import DegenerateLimits

logger = logging.getLogger(__name__)

COLORMAP = "viridis"
BACKGROUND = (255, 255, 255)
ARROW_COLOR = (20, 20, 20)
LEGEND_HEIGHT = 14
TARGET_PIXELS = 512


@lru_cache
def colormap_table() -> np.ndarray:
    """256-entry RGB table of the perceptually uniform colormap."""
    table = colormaps[COLORMAP](np.linspace(0.0, 1.0, 256))[:, :3]
    return np.round(table * 255).astype(np.uint8)


@dataclass
class FrameImage:
    """Rendered RGB raster.

    Attributes:
        pixels: ``(height, width, 3)`` uint8 array.
        limits: Value range mapped onto the colormap.
        metadata: Facts about the rendering (contour levels, arrow count).
    """

    pixels: np.ndarray
    limits: tuple[float, float] | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_image(self) -> Image.Image:
        return Image.fromarray(self.pixels)

    def png_bytes(self) -> bytes:
        buffer = io.BytesIO()
        self.to_image().save(buffer, format="PNG")
        return buffer.getvalue()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.png_bytes())
        return path


def auto_scale(nx: int, ny: int) -> int:
    """Pixels per cell bringing the larger side near the target size."""
    return max(1, TARGET_PIXELS // max(nx, ny))


def resolve_limits(
    values: np.ndarray, limits: tuple[float, float] | None
) -> tuple[float, float]:
    """Explicit limits, or the min/max of the values.

    Raises:
        DegenerateLimits: Explicit limits are not finite or not increasing.
    """
    if limits is not None:
        lo, hi = float(limits[0]), float(limits[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DegenerateLimits(
                f"display limits ({lo:g}, {hi:g}) must be finite and increasing"
            )
        return lo, hi
    lo, hi = float(np.min(values)), float(np.max(values))
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DegenerateLimits("field values are not finite")
    if lo == hi:
        return lo, lo + 1.0
    return lo, hi


def _raster(values: np.ndarray, scale: int) -> np.ndarray:
    """Flip rows so y points up and enlarge every cell to ``scale`` pixels."""
    flipped = np.flipud(values)
    return np.repeat(np.repeat(flipped, scale, axis=0), scale, axis=1)


def _color_indices(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    normalized = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return np.round(normalized * 255).astype(np.intp)


def _with_legend(pixels: np.ndarray, lo: float, hi: float) -> np.ndarray:
    width = pixels.shape[1]
    ramp = colormap_table()[np.linspace(0, 255, width).astype(np.intp)]
    strip = np.repeat(ramp[np.newaxis], LEGEND_HEIGHT, axis=0)
    image = Image.fromarray(np.concatenate([pixels, strip], axis=0))
    draw = ImageDraw.Draw(image)
    top = pixels.shape[0] + 1
    draw.text((2, top), f"{lo:.3g}", fill=BACKGROUND)
    label = f"{hi:.3g}"
    draw.text((max(2, width - 6 * len(label) - 2), top), label, fill=BACKGROUND)
    return np.asarray(image)


def render_colors(
    values: np.ndarray,
    limits: tuple[float, float] | None = None,
    scale: int = 0,
    legend: bool = False,
) -> FrameImage:
    """Color-mapped raster of a scalar grid."""
    lo, hi = resolve_limits(values, limits)
    scale = scale or auto_scale(values.shape[1], values.shape[0])
    pixels = colormap_table()[_color_indices(_raster(values, scale), lo, hi)]
    if legend:
        pixels = _with_legend(pixels, lo, hi)
    return FrameImage(pixels=pixels, limits=(lo, hi))


def contour_levels(lo: float, hi: float, count: int = 10) -> np.ndarray:
    """``count`` evenly spaced levels strictly between the limits."""
    return np.linspace(lo, hi, count + 2)[1:-1]


def render_contours(
    values: np.ndarray,
    limits: tuple[float, float] | None = None,
    levels: int = 10,
    scale: int = 0,
    legend: bool = False,
) -> FrameImage:
    """Marching-squares iso-lines of a scalar grid on a white background."""
    lo, hi = resolve_limits(values, limits)
    ny, nx = values.shape
    scale = scale or auto_scale(nx, ny)
    image = Image.new("RGB", (nx * scale, ny * scale), BACKGROUND)
    draw = ImageDraw.Draw(image)
    generator = contourpy.contour_generator(z=values, line_type="Separate")
    table = colormap_table()
    drawn = 0
    for level in contour_levels(lo, hi, levels):
        color = tuple(int(c) for c in table[_color_indices(np.asarray(level), lo, hi)])
        for line in generator.lines(level):
            points = [((x + 0.5) * scale, (ny - y - 0.5) * scale) for x, y in line]
            if len(points) > 1:
                draw.line(points, fill=color, width=1)
                drawn += 1
    pixels = np.asarray(image)
    if legend:
        pixels = _with_legend(pixels, lo, hi)
    return FrameImage(
        pixels=pixels, limits=(lo, hi), metadata={"levels": levels, "lines": drawn}
    )


def quiver_points(
    vectors: np.ndarray, grid: Grid2D, pitch: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrow anchor points on a mesh of the given pitch and the vectors sampled there.

    Returns:
        ``(x, y, v)`` with ``x``, ``y`` of shape ``(m, n)`` and ``v`` of shape ``(2, m, n)``.
    """
    counts_x = max(1, int(math.floor(round((grid.xhi - grid.xlo) / pitch, 9))))
    counts_y = max(1, int(math.floor(round((grid.yhi - grid.ylo) / pitch, 9))))
    xs = grid.xlo + pitch * (np.arange(counts_x) + 0.5)
    ys = grid.ylo + pitch * (np.arange(counts_y) + 0.5)
    x, y = np.meshgrid(xs, ys)
    i = np.clip(((x - grid.xlo) / grid.dx).astype(int), 0, grid.nx - 1)
    j = np.clip(((y - grid.ylo) / grid.dx).astype(int), 0, grid.ny - 1)
    return x, y, vectors[:, j, i]


def render_quivers(
    vectors: np.ndarray, grid: Grid2D, pitch: float | None = None, scale: int = 0
) -> FrameImage:
    """Arrows on a regular mesh, length proportional to magnitude and at most one pitch."""
    pitch = pitch or 10 * grid.dx
    scale = scale or auto_scale(grid.nx, grid.ny)
    image = Image.new("RGB", (grid.nx * scale, grid.ny * scale), BACKGROUND)
    draw = ImageDraw.Draw(image)
    x, y, v = quiver_points(vectors, grid, pitch)
    magnitude = np.hypot(v[0], v[1])
    peak = float(magnitude.max()) if magnitude.size else 0.0
    pixels_per_unit = scale / grid.dx
    arrows = 0
    for px, py, vx, vy, m in zip(
        x.ravel(), y.ravel(), v[0].ravel(), v[1].ravel(), magnitude.ravel(), strict=True
    ):
        if peak == 0 or m == 0:
            continue
        length = pitch * m / peak
        ux, uy = vx / m, vy / m
        x0 = (px - grid.xlo - 0.5 * length * ux) * pixels_per_unit
        y0 = (grid.yhi - py + 0.5 * length * uy) * pixels_per_unit
        x1 = (px - grid.xlo + 0.5 * length * ux) * pixels_per_unit
        y1 = (grid.yhi - py - 0.5 * length * uy) * pixels_per_unit
        draw.line([(x0, y0), (x1, y1)], fill=ARROW_COLOR, width=1)
        head = 0.3 * length * pixels_per_unit
        for angle in (2.6, -2.6):
            hx = ux * math.cos(angle) - uy * math.sin(angle)
            hy = ux * math.sin(angle) + uy * math.cos(angle)
            draw.line([(x1, y1), (x1 + head * hx, y1 - head * hy)], fill=ARROW_COLOR, width=1)
        arrows += 1
    return FrameImage(pixels=np.asarray(image), metadata={"arrows": arrows, "pitch": pitch})


def render(
    kind: str,
    values: np.ndarray,
    grid: Grid2D,
    limits: tuple[float, float] | None = None,
    pitch: float | None = None,
    levels: int = 10,
    scale: int = 0,
    legend: bool = True,
) -> FrameImage:
    """Render one field in a display kind (``mesh`` shares the colors path)."""
    if kind == "quivers":
        return render_quivers(values, grid, pitch, scale)
    if kind == "contours":
        return render_contours(values, limits, levels, scale, legend)
    return render_colors(values, limits, scale, legend)
