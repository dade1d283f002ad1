"""CSV export and import of monitor series and summary tables."""

import csv
import io
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from app.errors import CorruptionError

TARGET_PREFIX = "# target_exponent"

PathOrStream = Union[str, Path, TextIO]


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _open(target: PathOrStream):
    if isinstance(target, (str, Path)):
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline=""), True
    return target, False


def write_series(
    target: PathOrStream,
    rows: Iterable[Mapping[str, float]],
    columns: Sequence[str],
    targets: Optional[Mapping[str, float]] = None,
) -> None:
    """One row per sample, preceded by a comment row of target exponents."""
    handle, owned = _open(target)
    try:
        if targets:
            handle.write(
                ",".join([TARGET_PREFIX] + [_format(targets.get(c)) for c in columns[1:]]) + "\n"
            )
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row.get(c)) for c in columns])
    finally:
        if owned:
            handle.close()


def write_table(target: PathOrStream, rows: Sequence[Mapping[str, object]]) -> None:
    """Plain CSV with the keys of the first row as header."""
    handle, owned = _open(target)
    try:
        writer = csv.writer(handle, lineterminator="\n")
        if rows:
            columns = list(rows[0].keys())
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format(row.get(c)) for c in columns])
    finally:
        if owned:
            handle.close()


def table_text(rows: Sequence[Mapping[str, object]]) -> str:
    buffer = io.StringIO()
    write_table(buffer, rows)
    return buffer.getvalue()


def _parse(cell: str) -> float:
    if cell == "":
        return math.nan
    return float(cell)


def read_series(path: Union[str, Path]) -> Tuple[List[str], Dict[str, List[float]], Dict[str, float]]:
    """Columns, column-wise values and target exponents of a series file."""
    targets_row: Optional[List[str]] = None
    lines = []
    with Path(path).open(newline="") as handle:
        for line in handle:
            if line.startswith(TARGET_PREFIX):
                targets_row = line.rstrip("\n").split(",")[1:]
            elif line.strip():
                lines.append(line)
    reader = csv.reader(lines)
    try:
        columns = next(reader)
    except StopIteration as e:
        raise CorruptionError(f"{path}: empty series file") from e

    data: Dict[str, List[float]] = {c: [] for c in columns}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(columns):
            raise CorruptionError(f"{path}: row {lineno} has {len(row)} cells, expected {len(columns)}")
        try:
            for c, cell in zip(columns, row):
                data[c].append(_parse(cell))
        except ValueError as e:
            raise CorruptionError(f"{path}: row {lineno} is not numeric") from e

    targets: Dict[str, float] = {}
    if targets_row is not None:
        for c, cell in zip(columns[1:], targets_row):
            if cell:
                targets[c] = float(cell)
    return columns, data, targets
