"""Deterministic CSV/JSON emission for scan results and run manifests.

Numeric CSV cells use 15 significant digits; parsing such a cell back
and re-formatting it reproduces the same text, so result files are
stable under read-modify-write cycles.
"""

from __future__ import annotations

import json


def format_number(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int,)):
        return str(x)
    return f"{float(x):.15g}"


def format_cell(x) -> str:
    if isinstance(x, str):
        return x
    return format_number(x)


def render_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(render_csv(header, rows))


def render_json(record) -> str:
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def write_json(path, record) -> None:
    with open(path, "w") as fh:
        fh.write(render_json(record))
