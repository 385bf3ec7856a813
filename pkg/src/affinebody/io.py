"""Serialisation helpers: matrices, trajectories and spectra.

All floating point output uses 17 significant digits so values round-trip
exactly through text.
"""

import json

import numpy as np

from .errors import ConfigError

FLOAT_FMT = "%.17g"


def format_float(x):
    return FLOAT_FMT % float(x)


def matrix_to_rows(m):
    """Row-major nested lists, suitable for JSON."""
    m = np.asarray(m, dtype=float)
    return [[float(v) for v in row] for row in m]


def matrix_from_rows(rows, name="matrix"):
    try:
        m = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric array: {exc}") from exc
    if m.ndim != 2:
        raise ConfigError(f"{name}: expected a 2-d array, got shape {m.shape}")
    return m


def write_matrix_csv(path, m):
    m = np.asarray(m, dtype=float)
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def read_matrix_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return matrix_from_rows(rows, name=path)


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON from {path}: {exc}") from exc


def upper_triangle_labels(symbol, n):
    """Column labels M_12, M_13, ... in row-major strictly-upper order."""
    iu = np.triu_indices(n, k=1)
    return [f"{symbol}_{i + 1}{j + 1}" for i, j in zip(*iu)]


def trajectory_header(n):
    cols = ["t"]
    cols += [f"q{a + 1}" for a in range(n)]
    cols += [f"p{a + 1}" for a in range(n)]
    cols += upper_triangle_labels("M", n)
    cols += upper_triangle_labels("N", n)
    cols += ["E", "C2"]
    return cols


def write_trajectory_csv(path, trajectory):
    n = trajectory.n
    header = trajectory_header(n)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(len(trajectory.times)):
            row = [trajectory.times[k]]
            row.extend(trajectory.samples[k])
            row.append(trajectory.energy[k])
            row.append(trajectory.casimir[k])
            fh.write(",".join(format_float(v) for v in row) + "\n")


def read_trajectory_csv(path):
    """Returns (header, data) with data shaped (records, columns)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [[float(v) for v in line.strip().split(",")]
                for line in fh if line.strip()]
    return header, np.array(data)
