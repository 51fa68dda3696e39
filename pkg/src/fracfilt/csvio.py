"""CSV emission with lossless float formatting (17 significant digits)."""

from __future__ import annotations

import os
from typing import Iterable, Sequence

__all__ = ["format_value", "write_csv", "write_summary"]


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


def write_summary(path: str, entries: dict) -> str:
    """Machine-readable `key = value` summary, one entry per line."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for k, v in entries.items():
            fh.write(f"{k} = {format_value(v)}\n")
    return path
