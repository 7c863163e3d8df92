"""Text persistence: field files, branch CSVs and result tables; all writes are atomic."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FieldFormatError, GridMismatch
from .grid import GridSpec

MAGIC = "# vkd-field v1"
BRANCH_COLUMNS = ("s", "lambda", "norm_X_sq", "E", "S", "F")
TABLE_COLUMNS = ("id", "lambda", "S", "E", "F", "tag")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_field(w, path, grid: GridSpec) -> None:
    w = grid.check(w)
    lines = [
        MAGIC,
        f"# {grid.M} {grid.N} {grid.a!r} {grid.b!r}",
        f"# {grid.boundary.value} {grid.scheme.value}",
    ]
    # repr round-trips float64 exactly
    lines.extend(repr(float(v)) for v in w)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_field(path):
    """Return ``(values, GridSpec)`` read from a field file."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3 or lines[0].strip() != MAGIC:
        raise FieldFormatError(f"{path}: missing '{MAGIC}' header")
    try:
        M, N, a, b = lines[1].lstrip("#").split()
        boundary, scheme = lines[2].lstrip("#").split()
        grid = GridSpec(float(a), float(b), int(M), int(N), boundary, scheme)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: malformed header ({exc})") from exc
    body = [ln for ln in lines[3:] if ln.strip()]
    if len(body) != grid.size:
        raise FieldFormatError(f"{path}: expected {grid.size} values, found {len(body)}")
    try:
        w = np.array([float(ln) for ln in body])
    except ValueError as exc:
        raise FieldFormatError(f"{path}: non-numeric entry ({exc})") from exc
    return w, grid


def load_field(path, expected_grid: GridSpec | None = None) -> np.ndarray:
    w, grid = read_field(path)
    if expected_grid is not None:
        e = expected_grid
        if (grid.M, grid.N, grid.boundary) != (e.M, e.N, e.boundary) or not np.allclose([grid.a, grid.b], [e.a, e.b]):
            raise GridMismatch(f"{path}: field is on {grid.M}x{grid.N} {grid.boundary.value}, expected {e.M}x{e.N} {e.boundary.value}")
    return w


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, _csv_text(header, rows))


def read_csv(path):
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        return header, [row for row in rd]


def write_branch(path, points) -> None:
    s = [p.s for p in points]
    if any(b <= a for a, b in zip(s, s[1:])):
        raise ValueError("branch arclength must be strictly increasing")
    write_csv(path, BRANCH_COLUMNS, [p.row() for p in points])


def read_branch(path) -> np.ndarray:
    header, rows = read_csv(path)
    if tuple(header) != BRANCH_COLUMNS:
        raise FieldFormatError(f"{path}: unexpected branch columns {header}")
    return np.array([[float(v) for v in r] for r in rows]).reshape(-1, len(BRANCH_COLUMNS))


def write_table(path, rows, columns=TABLE_COLUMNS) -> None:
    write_csv(path, columns, rows)
