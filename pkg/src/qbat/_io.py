"""Reproducible CSV/JSON emission.

Numbers are written with 15 significant digits, '.' decimal separator and
'\\n' line endings; the JSON form carries the same rounded values so both
formats are byte-identical across platforms for identical inputs.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from typing import Mapping, Sequence


def format_number(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return f"{float(value):.15g}"


def _json_value(value):
    if isinstance(value, bool) or isinstance(value, int) or isinstance(value, str):
        return value
    return float(f"{float(value):.15g}")


def rows_to_csv(rows: Sequence[Mapping]) -> str:
    if not rows:
        return "\n"
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(rows[0].keys())
    for row in rows:
        writer.writerow(v if isinstance(v, str) else format_number(v)
                        for v in row.values())
    return buffer.getvalue()


def rows_to_json(rows: Sequence[Mapping]) -> str:
    payload = [{k: _json_value(v) for k, v in row.items()} for row in rows]
    return json.dumps(payload, indent=2) + "\n"


def write_rows(rows: Sequence[Mapping], fmt: str, path: str) -> None:
    if fmt == "csv":
        text = rows_to_csv(rows)
    elif fmt == "json":
        text = rows_to_json(rows)
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
