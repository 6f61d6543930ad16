"""Run Log for Simulation Runs.

This module provides a per-run collector of log entries (parameters, stability reports,
warnings, notes, metrics) rendered into the plain-text ``run.log`` of a run directory and
consumed by the HTML run report.
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any

from jinja2 import Template

RUN_LOG_TEMPLATE = """\
Morphgen run log
================
program:  {{ metadata.program|default('unknown') }}
command:  {{ metadata.command|default('run') }}
seed:     {{ metadata.seed|default(0) }}
started:  {{ start_time }}
finished: {{ end_time }}
{% for key, value in extra.items() %}{{ "%-9s"|format(key ~ ":") }} {{ value }}
{% endfor %}
parameters
----------
{% for entry in parameters %}{{ entry.content }} = {{ entry.metadata.value }}\
{% if entry.metadata.overridden %}  (override){% endif %}
{% else %}(none)
{% endfor %}
{% for entry in entries %}[{{ entry.timestamp.strftime('%H:%M:%S') }}] \
{{ "%-9s"|format(entry.kind.value) }} {{ entry.content }}
{% endfor %}"""


class EntryKind(Enum):
    """Types of entries that can be logged."""

    HEADER = "header"
    PARAMETER = "param"
    STABILITY = "stability"
    WARNING = "warning"
    NOTE = "note"
    PROGRESS = "progress"
    METRIC = "metric"
    OUTPUT = "output"


@dataclass
class LogEntry:
    """A single run log entry.

    Attributes:
        kind: Type of the entry.
        content: Human-readable text.
        timestamp: When the entry was recorded.
        metadata: Structured values behind the text.
    """

    kind: EntryKind
    content: str
    timestamp: datetime = field(default_factory=datetime.now)
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization.

        Returns:
            Dictionary representation of the entry.
        """
        return {
            "kind": self.kind.value,
            "content": self.content,
            "timestamp": self.timestamp.isoformat(),
            "metadata": self.metadata,
        }


class RunLog:
    """Collector of the entries of one run.

    Every entry is also forwarded to the ``morphgen.run`` logger, warnings at WARNING level.
    """

    def __init__(self, **metadata):
        self.entries: list[LogEntry] = []
        self.start_time: datetime = datetime.now()
        self.end_time: datetime | None = None
        self.metadata: dict[str, Any] = dict(metadata)
        self._logger = logging.getLogger("morphgen.run")

    def log(self, kind: EntryKind | str, content: str, **metadata) -> LogEntry:
        """Record an entry.

        Args:
            kind: Entry type (enum or its value).
            content: Description of the entry.
            **metadata: Structured values stored with it.

        Returns:
            The recorded entry.
        """
        if isinstance(kind, str):
            kind = EntryKind(kind)
        entry = LogEntry(kind=kind, content=content, metadata=metadata)
        self.entries.append(entry)
        level = logging.WARNING if kind == EntryKind.WARNING else logging.DEBUG
        self._logger.log(level, content)
        return entry

    def parameter(self, name: str, value: float, overridden: bool = False) -> None:
        self.log(EntryKind.PARAMETER, name, value=repr(float(value)), overridden=overridden)

    def parameters(self, values: dict[str, float], overrides: dict[str, float]) -> None:
        """Record every effective parameter value, marking overrides."""
        for name, value in values.items():
            self.parameter(name, value, name in overrides)

    def warning(self, content: str, **metadata) -> None:
        self.log(EntryKind.WARNING, content, **metadata)

    def stability(self, content: str, exceeded: bool = False) -> None:
        self.log(EntryKind.STABILITY, content, exceeded=exceeded)

    def note(self, content: str) -> None:
        self.log(EntryKind.NOTE, content)

    def finish(self, **metadata) -> None:
        """Mark the end of the run.

        Args:
            **metadata: Additional metadata about the run completion.
        """
        self.end_time = datetime.now()
        self.metadata.update(metadata)

    def get_total_duration(self) -> float:
        """Get wall-clock duration of the run.

        Returns:
            Duration in seconds.
        """
        end = self.end_time or datetime.now()
        return (end - self.start_time).total_seconds()

    def of_kind(self, kind: EntryKind) -> list[LogEntry]:
        return [entry for entry in self.entries if entry.kind == kind]

    def to_dict(self) -> dict:
        """Convert the entire log to a dictionary.

        Returns:
            Dictionary representation of the log.
        """
        return {
            "entries": [entry.to_dict() for entry in self.entries],
            "start_time": self.start_time.isoformat(),
            "end_time": self.end_time.isoformat() if self.end_time else None,
            "total_duration": self.get_total_duration(),
            "metadata": self.metadata,
            "stats": {
                "total_entries": len(self.entries),
                "warnings": len(self.of_kind(EntryKind.WARNING)),
            },
        }

    def render(self) -> str:
        """Render the plain-text run log."""
        reserved = {"program", "command", "seed"}
        return Template(RUN_LOG_TEMPLATE).render(
            metadata=self.metadata,
            extra={k: v for k, v in self.metadata.items() if k not in reserved},
            start_time=self.start_time.strftime("%Y-%m-%d %H:%M:%S"),
            end_time=self.end_time.strftime("%Y-%m-%d %H:%M:%S") if self.end_time else "running",
            parameters=self.of_kind(EntryKind.PARAMETER),
            entries=[e for e in self.entries if e.kind != EntryKind.PARAMETER],
        )

    def write(self, directory: str | Path, filename: str = "run.log") -> Path:
        """Write the rendered log into a run directory.

        Returns:
            Path of the written file.
        """
        path = Path(directory) / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(), encoding="utf-8")
        return path


class RunLogHandler(logging.Handler):
    """Logging handler copying toolchain warnings into a run log.

    Attach it to the root logger for the duration of one run. Records emitted by the run log
    itself are skipped.

    Args:
        run_log: Run log receiving the warnings.
        level: Lowest level copied.
    """

    def __init__(self, run_log: RunLog, level: int = logging.WARNING):
        super().__init__(level)
        self.run_log = run_log

    def emit(self, record: logging.LogRecord) -> None:
        if record.name == "morphgen.run":
            return
        self.run_log.warning(record.getMessage(), logger=record.name)
