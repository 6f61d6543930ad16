"""Pytest configuration file."""

import sys
import textwrap
from pathlib import Path

import pytest

# Add repository root to Python path
root_path = Path(__file__).parent.parent
sys.path.insert(0, str(root_path))


@pytest.fixture(autouse=True)
def reset_settings():
    """Clear cached settings between tests."""
    from src.shared.config import get_settings

    get_settings.cache_clear()

    yield

    get_settings.cache_clear()


@pytest.fixture
def corpus_dir() -> Path:
    """Directory holding the bundled programs."""
    return root_path / "corpus"


@pytest.fixture
def output_dir(tmp_path) -> Path:
    """Empty run output directory."""
    out = tmp_path / "out"
    out.mkdir()
    return out


@pytest.fixture
def program_text():
    """Factory wrapping section text in a program skeleton with small default resolutions."""

    def _wrap(
        sections: str = "",
        *,
        duration: float = 1,
        temporal: float = 10,
        spatial: float = 10,
        space: str = "0 < x < 1, 0 < y < 1",
        extra_sim: str = "",
    ) -> str:
        sim = [
            f"duration = {duration}",
            f"temporal resolution = {temporal}",
            f"spatial resolution = {spatial}",
            f"space {space}",
        ]
        sim.extend(line for line in textwrap.dedent(extra_sim).splitlines() if line.strip())
        header = "morphogenetic program test:\nsimulation parameters:\n"
        body = "".join(f"  {line}\n" for line in sim)
        return header + body + textwrap.dedent(sections).strip("\n") + "\nend program\n"

    return _wrap


@pytest.fixture
def compile_source(program_text):
    """Factory compiling section text (wrapped in the skeleton) to a CompiledModel."""
    from src.morphgen.frontend.parser import parse_source
    from src.morphgen.sema.resolve import resolve

    def _compile(sections: str = "", overrides: dict[str, float] | None = None, **sim):
        return resolve(parse_source(program_text(sections, **sim)), overrides=overrides)

    return _compile
