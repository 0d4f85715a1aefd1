"""
Result files: CSV tables with a provenance comment line, JSON documents with
a provenance key, and the signal / observation CSV readers used by the CLI.
"""
import csv
import json
import logging
from pathlib import Path

import numpy as np

from errors import ConfigurationError, DimensionError
from model_core import InputSignal

logger = logging.getLogger(__name__)


def format_float(value):
    return f"{float(value):.17g}"


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    return str(value)


def provenance_line(provenance):
    return "# " + " ".join(f"{key}={provenance[key]}" for key in sorted(provenance))


def write_csv(path, header, rows, provenance):
    """Write a CSV table preceded by one '# key=value ...' provenance line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, mode="w", newline="", encoding="utf-8") as file:
        file.write(provenance_line(provenance) + "\n")
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    logger.info("wrote %s", path)
    return path


def write_json(path, payload, provenance):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {**payload, "provenance": dict(provenance)}
    with open(path, mode="w", encoding="utf-8", newline="\n") as file:
        json.dump(document, file, sort_keys=True, indent=2)
        file.write("\n")
    logger.info("wrote %s", path)
    return path


# --- Signals and observations ---
def _indexed_columns(prefix, dim):
    return [f"{prefix}_k"] if dim == 1 else [f"{prefix}_k[{i}]" for i in range(dim)]


def write_signal(path, U, provenance):
    rows = ([k, *u] for k, u in enumerate(U.values))
    return write_csv(path, ["k", *_indexed_columns("u", U.input_dim)], rows, provenance)


def write_observations(path, Y, provenance):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    rows = ([k, *y] for k, y in enumerate(Y))
    return write_csv(path, ["k", *_indexed_columns("y", Y.shape[1])], rows, provenance)


def _read_indexed(path, width, what):
    """Rows of an indexed CSV (k, v[0], ..., v[width-1]); '#' lines are skipped, errors cite file lines."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as file:
            lines = file.read().splitlines()
    except FileNotFoundError:
        raise ConfigurationError(f"{what} file not found: {path}") from None
    rows = [(number, next(csv.reader([line])))
            for number, line in enumerate(lines, start=1)
            if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise ConfigurationError(f"{path}: {what} file is empty")
    header_line, header = rows[0]
    if len(header) != width + 1 or header[0].strip() != "k":
        raise ConfigurationError(f"{path}:{header_line}: header {header} does not match 'k' plus {width} value column(s)")
    values = []
    for number, row in rows[1:]:
        if len(row) != width + 1:
            raise ConfigurationError(f"{path}:{number}: {len(row)} fields, expected {width + 1}")
        try:
            k = int(row[0])
            entry = [float(cell) for cell in row[1:]]
        except ValueError:
            raise ConfigurationError(f"{path}:{number}: row is not numeric: {row}") from None
        if k != len(values):
            raise ConfigurationError(f"{path}:{number}: k={k}, expected {len(values)}")
        if not np.all(np.isfinite(entry)):
            raise ConfigurationError(f"{path}:{number}: row contains non-finite values")
        values.append(entry)
    if not values:
        raise ConfigurationError(f"{path}: {what} file has no data rows")
    return np.asarray(values, dtype=float)


def read_signal(path, input_dim=1, horizon=None):
    values = _read_indexed(path, input_dim, "signal")
    if horizon is not None and values.shape[0] != horizon:
        raise DimensionError(f"{path}: signal has {values.shape[0]} steps, expected N={horizon}")
    return InputSignal(values)


def read_observations(path, output_dim, horizon):
    """Observation table y_0..y_N for a signal of horizon N."""
    values = _read_indexed(path, output_dim, "observation")
    if values.shape[0] != horizon + 1:
        raise DimensionError(f"{path}: {values.shape[0]} observations, expected N+1={horizon + 1}")
    return values
