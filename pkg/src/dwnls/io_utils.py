"""Deterministic text serialization: JSON with 17-significant-digit floats,
CSV with '.' decimals, and gnuplot script stubs paired with CSV files."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite float in JSON output")
    s = format(float(x), ".17g")
    # keep a numeric token that round-trips as float
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def dumps_17g(obj, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits and sorted keys."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = ",\n".join(
            f'{pad}  "{k}": {dumps_17g(obj[k], indent + 2).lstrip()}'
            for k in sorted(obj)
        )
        return f"{pad}{{\n{items}\n{pad}}}" if obj else f"{pad}{{}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        items = ",\n".join(dumps_17g(v, indent + 2) for v in seq)
        return f"{pad}[\n{items}\n{pad}]" if seq else f"{pad}[]"
    if isinstance(obj, bool) or obj is None:
        return pad + {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (int, np.integer)):
        return pad + str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return pad + _fmt_float(obj)
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'{pad}"{escaped}"'
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path: Path, obj) -> None:
    path.write_text(dumps_17g(obj) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    if len(header) != len(columns):
        raise ValueError("header/column count mismatch")
    rows = [",".join(header)]
    for vals in zip(*columns):
        rows.append(",".join(format(float(v), ".17g") for v in vals))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_gnuplot(path: Path, csv_name: str, title: str,
                  using: str = "1:2", with_: str = "lines") -> None:
    text = (
        "set datafile separator ','\n"
        f"set title '{title}'\n"
        "set key autotitle columnhead\n"
        f"plot '{csv_name}' using {using} with {with_}\n"
    )
    path.write_text(text, encoding="utf-8")
