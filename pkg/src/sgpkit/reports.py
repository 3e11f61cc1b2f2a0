"""Report serialization: key=value blocks, aligned tables, JSON lines, CSV."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path


def format_kv(data: dict) -> str:
    """Flat ``key=value`` block, one pair per line, insertion order."""
    return "\n".join(f"{k}={_scalar(v)}" for k, v in data.items())


def _scalar(value):
    if isinstance(value, float):
        return format(value, ".6g")
    return value


def format_table(rows: list[dict], columns: list[str] | None = None) -> str:
    """Aligned column table; columns default to the first row's keys."""
    if not rows:
        return ""
    columns = columns or list(rows[0])
    cells = [[str(_scalar(row.get(c, ""))) for c in columns] for row in rows]
    widths = [max(len(c), max(len(r[i]) for r in cells))
              for i, c in enumerate(columns)]
    header = "  ".join(c.ljust(w) for c, w in zip(columns, widths))
    lines = [header] + ["  ".join(r[i].ljust(w) for i, w in enumerate(widths))
                        for r in cells]
    return "\n".join(line.rstrip() for line in lines)


def format_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    if not rows:
        return ""
    columns = columns or list(rows[0])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_jsonl(path, rows) -> None:
    """One compact JSON object per line."""
    text = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    Path(path).write_text(text)


def read_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]
