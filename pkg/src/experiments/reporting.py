import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
from jinja2 import Template

from src.utils.logging import get_logger

logger = get_logger("reporting")

SCHEMA_VERSION = 1


class RunWriter:
    """
    Writes the artifacts of one run (JSON summary, CSV series, text summary)
    into a single output directory and remembers what it wrote.
    """

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []

    def path(self, name: str) -> Path:
        return self.directory / name

    def _record(self, path: Path) -> Path:
        self.written.append(path)
        logger.info(f"wrote {path}")
        return path

    def json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.path(name)
        document = {"version": SCHEMA_VERSION, **payload}
        with open(path, "w") as fh:
            json.dump(to_jsonable(document), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        return self._record(path)

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self.path(name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        return self._record(path)

    def export(self, name: str, exporter) -> Path:
        """Let an object with a `to_csv(path)` method write itself."""
        path = self.path(name)
        exporter(path)
        return self._record(path)

    def summary(self, payload: Dict[str, Any]) -> Path:
        path = self.path("summary.txt")
        path.write_text(render_summary(payload))
        return self._record(path)


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


SUMMARY_TEMPLATE = Template("""
{%- set failed = checks | rejectattr('passed') | list -%}
radwave {{ command }} run
  exponents: p={{ p }}, q={{ q }} ({{ regime }})
{%- if eps is not none %}
  eps: {{ '%.3e' | format(eps) }}
{%- endif %}
{%- for key, value in results.items() %}
  {{ key }}: {{ value }}
{%- endfor %}
{%- if checks %}

Checks ({{ (checks | length) - (failed | length) }}/{{ checks | length }} passed):
{%- for check in checks %}
  [{{ 'PASS' if check.passed else 'FAIL' }}] {{ check.name }}{% if check.detail %}: {{ check.detail }}{% endif %}
{%- endfor %}
{%- endif %}
""")


def render_summary(payload: Dict[str, Any]) -> str:
    context = {
        "command": payload.get("command", "?"),
        "p": payload.get("p"),
        "q": payload.get("q"),
        "regime": payload.get("regime"),
        "eps": payload.get("eps"),
        "results": payload.get("results", {}),
        "checks": payload.get("checks", []),
    }
    return SUMMARY_TEMPLATE.render(**context).strip() + "\n"
