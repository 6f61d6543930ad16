"""Corpus Library Module.

This module lists and loads the Morphgen programs bundled in the repository's ``corpus``
directory. Programs are addressed by file stem (``path2d`` for ``corpus/path2d.mg``).
"""

import logging
from pathlib import Path

from src.morphgen.errors import IoError, MorphgenError
from src.morphgen.frontend.ast import ProgramAst
from src.morphgen.frontend.parser import parse_source
from src.morphgen.sema.model import CompiledModel
from src.morphgen.sema.resolve import compile_program

logger = logging.getLogger(__name__)

DEFAULT_CORPUS_DIR = Path(__file__).resolve().parents[3] / "corpus"
PROGRAM_SUFFIX = ".mg"


class CorpusLibrary:
    """Access to a directory of Morphgen programs.

    Attributes:
        corpus_dir: Directory holding the ``.mg`` files.
    """

    def __init__(self, corpus_dir: str | Path = DEFAULT_CORPUS_DIR):
        """Initialize the library.

        Args:
            corpus_dir: Directory holding the ``.mg`` files.
        """
        self.corpus_dir = Path(corpus_dir)
        logger.debug(f"CorpusLibrary initialized with dir: {self.corpus_dir}")

    def list_programs(self) -> list[str]:
        """Names of the available programs, sorted.

        Returns:
            Program names (file stems).
        """
        if not self.corpus_dir.exists():
            logger.warning(f"Corpus directory does not exist: {self.corpus_dir}")
            return []
        return sorted(p.stem for p in self.corpus_dir.glob(f"*{PROGRAM_SUFFIX}"))

    def has_program(self, name: str) -> bool:
        return self._file(name).exists()

    def path_of(self, name: str) -> Path:
        """Path of a program file.

        Raises:
            IoError: No program of that name exists.
        """
        if not name or not name.strip():
            raise IoError("program name cannot be empty")
        path = self._file(name)
        if not path.exists():
            available = ", ".join(self.list_programs()) or "none"
            raise IoError(f"no corpus program '{name}'. Available programs: {available}")
        return path

    def source(self, name: str) -> str:
        """Source text of a program.

        Raises:
            IoError: The program does not exist or cannot be read.
        """
        path = self.path_of(name)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise IoError(f"cannot read program {path}: {e}") from e
        logger.debug(f"Read {len(text)} characters from {path.name}")
        return text

    def parse(self, name: str) -> ProgramAst:
        """Parse a program.

        Raises:
            ParseError: The source is malformed; the diagnostic names the file.
        """
        try:
            return parse_source(self.source(name))
        except MorphgenError as e:
            raise e.with_file(str(self._file(name)))

    def load(self, name: str, overrides: dict[str, float] | None = None) -> CompiledModel:
        """Parse, resolve and kind-check a program.

        Args:
            name: Program name.
            overrides: Parameter values replacing their definitions.

        Returns:
            The compiled model.
        """
        ast = self.parse(name)
        try:
            model = compile_program(ast, overrides)
        except MorphgenError as e:
            raise e.with_file(str(self._file(name)))
        logger.info(f"Loaded corpus program '{name}' ({len(model.fields)} fields)")
        return model

    def _file(self, name: str) -> Path:
        return self.corpus_dir / f"{name.strip()}{PROGRAM_SUFFIX}"
