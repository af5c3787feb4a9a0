"""CSV output shared by every experiment"""

from __future__ import annotations

import csv
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 9


def format_value(value: object) -> str:
    """Render one cell: integers as-is, reals with 9 significant digits"""
    if isinstance(value, bool | np.bool_):
        return str(int(value))
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return f"{float(value):.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]
) -> Path:
    """Write a header row and data rows with LF line endings"""
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
            count += 1

    logger.debug(f"Wrote {count} rows to {path}")
    return path
