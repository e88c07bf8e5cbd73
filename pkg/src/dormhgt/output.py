"""CSV and JSON writers with full double precision."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def emit(text: str, path: Optional[str | Path]) -> None:
    """Write ``text`` to ``path`` or stdout."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


TRAJECTORY_HEADER = ("t", "n1a", "n1d", "n2")
COUNT_HEADER = ("t", "N1a", "N1d", "N2")
RAW_TRIAL_HEADER = ("trial", "seed", "kind", "t", "N1a", "N1d", "N2")
REGIME_HEADER = ("lambda1", "lambda2", "regime")


def trajectory_csv(t: np.ndarray, states: np.ndarray, columns: Sequence[str]) -> str:
    return csv_text(("t", *columns), ([ti, *row] for ti, row in zip(t, states)))


def counts_csv(record: np.ndarray) -> str:
    return csv_text(
        COUNT_HEADER, ([row[0], int(row[1]), int(row[2]), int(row[3])] for row in record)
    )
