"""CSV writers and readers; floats are written with ``repr`` so they round-trip."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

JUMP_COLUMNS = ("path_id", "time", "kind", "slot", "position", "size", "drop")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_table(path):
    """Header and rows as strings."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_columns(path) -> dict:
    """Numeric CSV as a dict of float arrays keyed by column name."""
    header, rows = read_table(path)
    data = np.array([[float(v) for v in row] for row in rows], dtype=float).reshape(-1, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def jump_rows(path_id: int, jumps):
    for rec in jumps:
        p = rec.params
        yield (path_id, rec.time, rec.kind, rec.slot, p.position, p.size, p.drop)


def write_jumps(path, results) -> Path:
    """``results`` is an iterable of ``(path_id, PathResult)``."""
    rows = [row for pid, res in results for row in jump_rows(pid, res.jumps)]
    return write_table(path, JUMP_COLUMNS, rows)


def read_jumps(path):
    header, rows = read_table(path)
    if tuple(header) != JUMP_COLUMNS:
        raise ValueError(f"unexpected jump-chain header {header}")
    return [(int(r[0]), float(r[1]), r[2], int(r[3]), float(r[4]), float(r[5]), float(r[6]))
            for r in rows]


def write_snapshot(path, x_centers, rho) -> Path:
    return write_table(path, ("x_center", "rho"), zip(x_centers, rho))


def write_series(path, times, values, names=("t", "value")) -> Path:
    return write_table(path, names, zip(times, values))


def write_histogram(path, edges, counts) -> Path:
    return write_table(path, ("bin_left", "bin_right", "count"),
                       zip(edges[:-1], edges[1:], (int(c) for c in counts)))
