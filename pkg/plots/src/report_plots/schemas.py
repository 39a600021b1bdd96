"""Input schemas for the four figure kinds.

The plotting tool consumes exactly the CSV/JSONL layouts written by the
simulation CLI; any mismatch is reported with the offending column or
field name and no image is produced.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

DECAY_COLUMNS = ("t", "mean_h1_sq", "se", "envelope", "margin")
TRAJECTORY_COLUMNS = ("t", "l2_sq", "h1_sq", "hs_sq", "w1inf", "min_ux",
                      "max_u", "slope_int", "blowup_kind")
LYAPUNOV_COLUMNS = ("t", "mean_V", "se", "bound", "margin")

MEASURE_FIELDS = ("ladder", "n_independence", "t_eval", "paths")
LADDER_FIELDS = ("pair", "distance", "se")
INDEPENDENCE_FIELDS = ("distance", "se", "spread", "within_tolerance")


class SchemaError(ValueError):
    """Input file does not match the declared schema."""


def load_csv(path, columns) -> dict:
    """Strict CSV reader: exact header, float body, at least one row."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise SchemaError(f"{path}: empty input file")
    rows = list(csv.reader(text.splitlines()))
    header = rows[0]
    for col in columns:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    for col in header:
        if col not in columns:
            raise SchemaError(f"{path}: unexpected column {col!r}")
    if header != list(columns):
        raise SchemaError(f"{path}: column order must be {','.join(columns)}")
    if len(rows) < 2:
        raise SchemaError(f"{path}: no data rows")
    body = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(columns):
            raise SchemaError(f"{path}: line {i} has {len(row)} fields, "
                              f"expected {len(columns)}")
        try:
            body.append([float(v) for v in row])
        except ValueError:
            raise SchemaError(f"{path}: line {i} is not numeric")
    arr = np.asarray(body)
    return {col: arr[:, j] for j, col in enumerate(columns)}


def load_measure_jsonl(path) -> dict:
    """First JSONL record of a measure report, with ladder validation."""
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty input file")
    try:
        record = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON ({exc})")
    if record.get("experiment") != "measure":
        raise SchemaError(f"{path}: field 'experiment' must be 'measure', "
                          f"got {record.get('experiment')!r}")
    for key in MEASURE_FIELDS:
        if key not in record:
            raise SchemaError(f"{path}: missing field {key!r}")
    if not record["ladder"]:
        raise SchemaError(f"{path}: field 'ladder' is empty")
    for i, rung in enumerate(record["ladder"]):
        for key in LADDER_FIELDS:
            if key not in rung:
                raise SchemaError(f"{path}: ladder[{i}] missing field {key!r}")
    for key in INDEPENDENCE_FIELDS:
        if key not in record["n_independence"]:
            raise SchemaError(f"{path}: n_independence missing field {key!r}")
    return record
