"""
Utility functions for CSV input/output and file writing
"""

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from taperlink.errors import InputFormatError

PathLike = Union[str, Path]


def format_number(value, digits: int = 10) -> str:
    """
    Format a number for CSV output.

    Args:
        value: Number (ints are written as ints)
        digits: Significant digits for floats

    Returns:
        Deterministic text representation
    """
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if value == 0.0:
        return "0"
    return f"{value:.{digits}g}"


def atomic_write_text(path: PathLike, text: str) -> Path:
    """
    Write text through a temporary file in the target directory, then rename.

    Args:
        path: Destination file
        text: Content (written with LF line endings)

    Returns:
        Destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Comma-separated text with a header row and LF endings"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Atomically write a CSV file"""
    return atomic_write_text(path, csv_text(header, rows))


def read_columns(path: PathLike, columns: Sequence[str], min_rows: int = 1) -> Dict[str, np.ndarray]:
    """
    Read named numeric columns from a CSV file with a header row.

    Args:
        path: CSV file
        columns: Required column names, in the order of the file's header
            when the header is missing
        min_rows: Minimum number of data rows

    Returns:
        Mapping of column name to float array

    Raises:
        InputFormatError: missing file or column, non-numeric cell (names row and column)
    """
    path = Path(path)
    if not path.is_file():
        raise InputFormatError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [r for r in csv.reader(handle) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise InputFormatError(f"{path}: empty file")

    header = [cell.strip() for cell in rows[0]]
    if all(_is_number(cell) for cell in header):
        header = list(columns)
        body_start = 0
    else:
        body_start = 1
    missing = [c for c in columns if c not in header]
    if missing:
        raise InputFormatError(f"{path}: missing column(s) {', '.join(missing)}", column=missing[0])

    index = {name: header.index(name) for name in columns}
    data: Dict[str, List[float]] = {name: [] for name in columns}
    for line_no, row in enumerate(rows[body_start:], start=body_start + 1):
        for name, col in index.items():
            if col >= len(row):
                raise InputFormatError(f"{path}: row {line_no} has no column '{name}'", row=line_no, column=name)
            cell = row[col].strip()
            try:
                data[name].append(float(cell))
            except ValueError:
                raise InputFormatError(
                    f"{path}: row {line_no}, column '{name}': non-numeric value '{cell}'",
                    row=line_no, column=name,
                ) from None
    n_rows = len(rows) - body_start
    if n_rows < min_rows:
        raise InputFormatError(f"{path}: need at least {min_rows} data rows, found {n_rows}")
    return {name: np.array(values) for name, values in data.items()}


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def format_grid(values: np.ndarray, digits: int = 10) -> str:
    """2D array as CSV text, one row per y sample (top row = largest y)"""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        values = np.real(values)
    rows = values.T[::-1]
    return "".join(",".join(format_number(v, digits) for v in row) + "\n" for row in rows)


def resolve_output(out_dir: Optional[PathLike], name: str) -> Path:
    """Output path inside --out (or the working directory)"""
    return Path(out_dir or ".") / name
