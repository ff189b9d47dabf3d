"""Deterministic serialisation of result records.

Floats are always written with 17 significant digits so that a record
round-trips exactly and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Mapping, Sequence

SWEEP_COLUMNS = (
    "parameter",
    "value",
    "estimate",
    "stderr",
    "ci_low",
    "ci_high",
    "trials",
    "censored_fraction",
    "seed",
    "error",
)

SIMULATE_COLUMNS = (
    "quantity",
    "estimate",
    "stderr",
    "ci_low",
    "ci_high",
    "trials",
    "samples",
    "censored_fraction",
    "seed",
)


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def cell(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return fmt_float(x)
    return str(x)


def dumps(obj: Any) -> str:
    """Compact JSON with sorted keys and 17-digit floats."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(fmt_float(obj))
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Mapping):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment is not None:
        buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([cell(row.get(c)) for c in columns])
    return buf.getvalue()


def to_jsonl(rows: Iterable[Mapping[str, Any]], columns: Sequence[str], extra: Mapping[str, Any]) -> str:
    lines = []
    for row in rows:
        obj = {c: row.get(c) for c in columns}
        obj.update(extra)
        lines.append(dumps(obj))
    return "".join(line + "\n" for line in lines)


def read_csv(text: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
