"""Readers for the solver's delimited output contracts.

Every reader validates the column schema up front and aborts naming the
missing column, so a rendering job never starts on mismatched input.
"""

from __future__ import annotations

import numpy as np


class SchemaError(Exception):
    """Input file does not match the documented column contract."""


def read_delimited(path, required_columns):
    """Read a '# key=value'-headed CSV; returns (columns dict, metadata)."""
    meta = {}
    header = None
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([float(c) for c in line.split(",")])
    if header is None:
        raise SchemaError(f"{path}: no column header found")
    for col in required_columns:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r} "
                              f"(found {header})")
    data = np.asarray(rows, dtype=float)
    if data.size == 0:
        raise SchemaError(f"{path}: no data rows")
    return {name: data[:, k] for k, name in enumerate(header)}, meta


def read_labeled_delimited(path, required_columns, label_column="label"):
    """Like :func:`read_delimited` but with one optional string column."""
    meta = {}
    header = None
    numeric = []
    labels = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            cells = [c.strip() for c in line.split(",")]
            row = []
            lab = ""
            for name, cell in zip(header, cells):
                if name == label_column:
                    lab = cell
                else:
                    row.append(float(cell))
            numeric.append(row)
            labels.append(lab)
    if header is None:
        raise SchemaError(f"{path}: no column header found")
    for col in required_columns:
        if col not in header:
            raise SchemaError(f"{path}: missing required column {col!r} "
                              f"(found {header})")
    names = [n for n in header if n != label_column]
    data = np.asarray(numeric, dtype=float)
    if data.size == 0:
        raise SchemaError(f"{path}: no data rows")
    cols = {name: data[:, k] for k, name in enumerate(names)}
    cols[label_column] = labels
    return cols, meta


def read_coordinate_matrix(path):
    """Read a '(row, col, value)' coordinate dump into a dense matrix."""
    meta = {}
    rows, cols, vals = [], [], []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for piece in line[1:].split():
                    if "=" in piece:
                        key, _, val = piece.partition("=")
                        meta[key] = val
                continue
            parts = line.split()
            if len(parts) != 3:
                raise SchemaError(f"{path}: expected 'row col value' rows, "
                                  f"got {line!r}")
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            vals.append(float(parts[2]))
    if not rows:
        raise SchemaError(f"{path}: empty coordinate dump")
    n = max(max(rows), max(cols)) + 1
    mat = np.zeros((n, n))
    mat[rows, cols] = vals
    return mat, meta
