"""Deterministic CSV output shared by the library writers and the CLI."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Sequence

__all__ = ["format_number", "write_csv", "csv_text"]


def format_number(v) -> str:
    """Fixed 12-decimal text for moderate magnitudes, 12-digit exponent form
    otherwise.  Integers and flags pass through unchanged."""
    if isinstance(v, (bool, int)) and not isinstance(v, float):
        return str(int(v))
    if isinstance(v, str):
        return v
    x = float(v)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return f"{0.0:.12f}"
    if 1e-3 <= abs(x) < 1e12:
        return f"{x:.12f}"
    return f"{x:.12e}"


def write_csv(stream, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()
