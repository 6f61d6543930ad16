"""MGF1 field archives.

Layout: an ASCII header of lines ``MGF1``, ``nx ny dx xlo ylo``, one ``P <name> <kind>`` line per
plane (kind ``scalar``, ``vector-x`` or ``vector-y``) and ``DATA``, followed by every plane as
``nx * ny`` little-endian float64 values, row-major with y ascending.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.morphgen.engine.grid import Grid2D
from src.morphgen.errors import BadMagic, GeometryMismatch, IoError, MissingField

logger = logging.getLogger(__name__)

MAGIC = "MGF1"
DTYPE = np.dtype("<f8")


@dataclass
class FieldArchive:
    """Decoded archive contents.

    Attributes:
        grid: Geometry recorded in the header.
        planes: ``(name, kind)`` per stored plane, in file order.
        fields: Field name to array (vectors reassembled to ``(2, ny, nx)``).
    """

    grid: Grid2D
    planes: list[tuple[str, str]] = field(default_factory=list)
    fields: dict[str, np.ndarray] = field(default_factory=dict)


def encode(grid: Grid2D, fields: Mapping[str, np.ndarray]) -> bytes:
    """Serialize named scalar and vector grids."""
    header = [MAGIC, f"{grid.nx} {grid.ny} {grid.dx!r} {grid.xlo!r} {grid.ylo!r}"]
    payload = []
    for name, values in fields.items():
        if values.ndim == 3:
            header.append(f"P {name} vector-x")
            header.append(f"P {name} vector-y")
            payload.extend([values[0], values[1]])
        else:
            header.append(f"P {name} scalar")
            payload.append(values)
    header.append("DATA")
    body = b"".join(np.ascontiguousarray(p, dtype=DTYPE).tobytes() for p in payload)
    return ("\n".join(header) + "\n").encode("ascii") + body


def decode(data: bytes) -> FieldArchive:
    """Parse archive bytes.

    Raises:
        BadMagic: The data does not start with an MGF1 header.
    """
    lines = []
    offset = 0
    while True:
        end = data.find(b"\n", offset)
        if end < 0:
            raise BadMagic("archive header is not terminated by a DATA line")
        try:
            line = data[offset:end].decode("ascii").strip()
        except UnicodeDecodeError as e:
            raise BadMagic("archive header is not ASCII text") from e
        offset = end + 1
        if not lines and line != MAGIC:
            raise BadMagic(f"not an {MAGIC} archive (first line {line[:16]!r})")
        lines.append(line)
        if line == "DATA":
            break

    try:
        nx, ny, dx, xlo, ylo = lines[1].split()
        grid = Grid2D(int(nx), int(ny), float(dx), float(xlo), float(ylo))
        planes = []
        for line in lines[2:-1]:
            tag, name, kind = line.split()
            if tag != "P" or kind not in ("scalar", "vector-x", "vector-y"):
                raise ValueError(line)
            planes.append((name, kind))
    except (ValueError, IndexError) as e:
        raise BadMagic(f"malformed {MAGIC} header: {e}") from e

    size = grid.nx * grid.ny
    values = np.frombuffer(data, dtype=DTYPE, offset=offset)
    if values.size != size * len(planes):
        raise BadMagic(
            f"archive holds {values.size} values, expected {size * len(planes)} "
            f"for {len(planes)} planes"
        )
    archive = FieldArchive(grid=grid, planes=planes)
    components: dict[str, dict[str, np.ndarray]] = {}
    for index, (name, kind) in enumerate(planes):
        plane = values[index * size : (index + 1) * size].reshape(grid.shape).copy()
        if kind == "scalar":
            archive.fields[name] = plane
        else:
            components.setdefault(name, {})[kind] = plane
    for name, parts in components.items():
        archive.fields[name] = np.stack([parts["vector-x"], parts["vector-y"]])
    return archive


def write_archive(path: str | Path, grid: Grid2D, fields: Mapping[str, np.ndarray]) -> Path:
    """Write named grids to an archive file.

    Raises:
        IoError: The file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode(grid, fields))
    except OSError as e:
        raise IoError(f"cannot write archive {path}: {e}") from e
    logger.info(f"Wrote {len(fields)} field(s) to {path}")
    return path


def read_archive(path: str | Path) -> FieldArchive:
    """Read an archive file.

    Raises:
        IoError: The file cannot be read.
        BadMagic: The file is not an MGF1 archive.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read archive {path}: {e}") from e
    return decode(data)


def same_geometry(a: Grid2D, b: Grid2D) -> bool:
    return (
        a.nx == b.nx
        and a.ny == b.ny
        and math.isclose(a.dx, b.dx, rel_tol=1e-9)
        and math.isclose(a.xlo, b.xlo, rel_tol=1e-9, abs_tol=1e-12)
        and math.isclose(a.ylo, b.ylo, rel_tol=1e-9, abs_tol=1e-12)
    )


def save_fields(state, names: Sequence[str], filename: str | Path) -> Path:
    """Write the named fields of a state to an archive."""
    return write_archive(filename, state.grid, {name: state.fields[name] for name in names})


def load_fields(state, names: Sequence[str], filename: str | Path) -> None:
    """Overwrite the named fields of a state from an archive.

    Raises:
        GeometryMismatch: The archive grid differs from the state grid.
        MissingField: The archive lacks a requested field.
    """
    archive = read_archive(filename)
    if not same_geometry(archive.grid, state.grid):
        raise GeometryMismatch(
            f"archive {filename} has a {archive.grid.nx}x{archive.grid.ny} grid with "
            f"dx={archive.grid.dx:g}; the model grid is {state.grid.nx}x{state.grid.ny} "
            f"with dx={state.grid.dx:g}"
        )
    for name in names:
        if name not in archive.fields:
            raise MissingField(f"archive {filename} has no field '{name}'")
        if archive.fields[name].shape != state.fields[name].shape:
            raise MissingField(f"archive {filename} stores '{name}' with a different kind")
        state.fields[name] = archive.fields[name].copy()
    logger.info(f"Loaded {', '.join(names)} from {filename}")
