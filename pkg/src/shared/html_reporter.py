"""HTML Report Generator for Simulation Runs.

This module generates a self-contained HTML summary of a run from its RunLog, the frames it
wrote and its metric results, using Jinja2.
"""

import webbrowser
from datetime import datetime
from pathlib import Path

from jinja2 import Template

from src.shared.run_log import EntryKind, RunLog

HTML_TEMPLATE = """
<!DOCTYPE html>
<html lang="en">
<head>
    <meta charset="UTF-8">
    <title>Run Report - {{ metadata.program|default('Morphgen run') }}</title>
    <style>
        body { font-family: sans-serif; background: #0f172a; color: #e2e8f0; margin: 2rem; }
        h1 { color: #60a5fa; }
        h2 { border-bottom: 1px solid #334155; padding-bottom: 0.25rem; }
        table { border-collapse: collapse; }
        td, th { border: 1px solid #334155; padding: 0.25rem 0.75rem; text-align: left; }
        .card { display: inline-block; background: #1e293b; border: 1px solid #334155;
                border-radius: 6px; padding: 0.75rem 1.25rem; margin-right: 1rem; }
        .warning { color: #fb923c; }
        .pass { color: #4ade80; }
        .fail { color: #f87171; }
        .frames img { max-width: 240px; margin: 0.25rem; image-rendering: pixelated; }
    </style>
</head>
<body>
    <header>
        <h1>{{ metadata.program|default('Morphgen run') }}</h1>
        <div class="card">Command<br><b>{{ metadata.command|default('run') }}</b></div>
        <div class="card">Seed<br><b>{{ metadata.seed|default(0) }}</b></div>
        <div class="card">Wall time<br><b>{{ duration|round(2) }} s</b></div>
        <div class="card">Warnings<br><b>{{ warnings|length }}</b></div>
        <p>Started {{ start_time }}</p>
    </header>

    <h2>Parameters</h2>
    <table>
        <tr><th>Name</th><th>Value</th><th></th></tr>
        {% for entry in parameters %}
        <tr><td>{{ entry.content }}</td><td>{{ entry.metadata.value }}</td>
            <td>{% if entry.metadata.overridden %}override{% endif %}</td></tr>
        {% endfor %}
    </table>

    {% if stability %}
    <h2>Stability</h2>
    <ul>
        {% for entry in stability %}<li>{{ entry.content }}</li>{% endfor %}
    </ul>
    {% endif %}

    {% if warnings %}
    <h2>Warnings</h2>
    <ul>
        {% for entry in warnings %}<li class="warning">{{ entry.content }}</li>{% endfor %}
    </ul>
    {% endif %}

    {% if metrics %}
    <h2>Metrics</h2>
    <table>
        <tr><th>Metric</th><th>Value</th><th>Threshold</th><th>Result</th></tr>
        {% for m in metrics %}
        <tr><td>{{ m.name }}</td><td>{{ m.value }}</td><td>{{ m.threshold }}</td>
            {% set verdict = "pass" if m.passed else "fail" %}
            <td class="{{ verdict }}">{{ verdict }}</td></tr>
        {% endfor %}
    </table>
    {% endif %}

    {% if frames %}
    <h2>Frames</h2>
    <div class="frames">
        {% for frame in frames %}<img src="{{ frame }}" alt="{{ frame }}">{% endfor %}
    </div>
    {% endif %}

    {% if notes %}
    <h2>Notes</h2>
    {% for entry in notes %}<p>{{ entry.content }}</p>{% endfor %}
    {% endif %}

    <footer>
        <p>Report generated at {{ generation_time }}</p>
    </footer>
</body>
</html>
"""

MAX_FRAMES = 48


class RunReporter:
    """Generates HTML reports from RunLog data."""

    def __init__(self, run_log: RunLog):
        """Initialize the HTML reporter.

        Args:
            run_log: RunLog instance with the run's entries
        """
        self.run_log = run_log
        self.template = Template(HTML_TEMPLATE)

    def collect_frames(self, run_dir: Path) -> list[str]:
        """Relative paths of PNG frames under a run directory, thinned to a readable count."""
        frames = sorted(p.relative_to(run_dir).as_posix() for p in run_dir.rglob("*.png"))
        if len(frames) > MAX_FRAMES:
            stride = -(-len(frames) // MAX_FRAMES)
            frames = frames[::stride]
        return frames

    def generate_report(
        self,
        run_dir: str | Path,
        metrics: list | None = None,
        filename: str = "report.html",
        auto_open: bool = False,
    ) -> Path:
        """Generate HTML report and save it into the run directory.

        Args:
            run_dir: Run output directory (frames are looked up below it)
            metrics: Metric results with name, value, threshold and passed attributes
            filename: Report file name
            auto_open: Whether to automatically open the report in browser

        Returns:
            Path to the generated report
        """
        run_dir = Path(run_dir)
        output_path = run_dir / filename
        log = self.run_log

        html_content = self.template.render(
            metadata=log.metadata,
            start_time=log.start_time.strftime("%Y-%m-%d %H:%M:%S"),
            duration=log.get_total_duration(),
            parameters=log.of_kind(EntryKind.PARAMETER),
            stability=log.of_kind(EntryKind.STABILITY),
            warnings=log.of_kind(EntryKind.WARNING),
            notes=log.of_kind(EntryKind.NOTE),
            metrics=metrics or [],
            frames=self.collect_frames(run_dir),
            generation_time=datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        )

        # Save to file
        output_path.write_text(html_content, encoding="utf-8")

        # Auto-open in browser
        if auto_open:
            webbrowser.open(f"file://{output_path.absolute()}")

        return output_path


def generate_report(
    run_log: RunLog,
    run_dir: str | Path,
    metrics: list | None = None,
    auto_open: bool = False,
) -> Path:
    """Convenience function to generate a report.

    Args:
        run_log: RunLog of the run
        run_dir: Run output directory
        metrics: Optional metric results
        auto_open: Whether to automatically open in browser

    Returns:
        Path to the generated report
    """
    reporter = RunReporter(run_log)
    return reporter.generate_report(run_dir, metrics, auto_open=auto_open)
