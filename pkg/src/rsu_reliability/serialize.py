"""Canonical text formats for streams, references, metrics and verdicts.

All writers produce deterministic bytes for identical inputs: fixed key
order, repr-based float formatting through ``json``, no timestamps or paths.
Files are written atomically (write to a temp file, then rename) so partial
outputs never parse.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

STREAM_FORMAT = "rsu-reliability/stream@1"
REFERENCE_FORMAT = "rsu-reliability/reference@1"
VERDICT_FORMAT = "rsu-reliability/verdict@1"
REPORT_FORMAT = "rsu-reliability/report@1"


class DataError(ValueError):
    """Malformed or incompatible input data file."""


def dumps_compact(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), allow_nan=False)


def dumps_pretty(record: dict) -> str:
    return json.dumps(record, indent=2, allow_nan=False) + "\n"


def loads(text: str, what: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{what}: not valid JSON ({exc})") from exc


def ndjson_lines(text: str, what: str) -> list[dict]:
    records = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{what}: line {i + 1} is not valid JSON") from exc
    return records


def check_format(record: dict, expected: str, what: str) -> None:
    found = record.get("format")
    if found != expected:
        raise DataError(f"{what}: format {found!r}, expected {expected!r}")


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], rows: list[tuple]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
