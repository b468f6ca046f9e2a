"""Deterministic JSON/CSV writers (floats always carry 17 significant digits)."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path

import numpy as np


def _num(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def to_plain(obj):
    """Reduce dataclasses, numpy scalars/arrays and tuples to JSON-ready Python values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    obj = to_plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _num(obj)
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def write_samples_csv(sample, path) -> None:
    ids = sample.state_ids
    with open(path, "w", newline="") as fh:
        fh.write("state,r_value,shard,index\n")
        step = 1 << 16
        for lo in range(0, len(sample.r), step):
            hi = lo + step
            fh.write("".join(
                f"{ids[s]},{format(r, '.17g')},{sh},{ix}\n"
                for s, r, sh, ix in zip(sample.states[lo:hi].tolist(), sample.r[lo:hi].tolist(),
                                        sample.shard[lo:hi].tolist(), sample.index[lo:hi].tolist())
            ))


def write_blocks_csv(blocks, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("start_state,length,a,b\n")
        fh.write("".join(
            f"{blocks.start_state},{n},{format(a, '.17g')},{format(b, '.17g')}\n"
            for n, a, b in zip(blocks.length.tolist(), blocks.a.tolist(), blocks.b.tolist())
        ))


def read_samples_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(state_labels, r_values)`` from a sample CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["state", "r_value"]:
            raise ValueError(f"{path}: expected header starting with state,r_value")
        states, values = [], []
        for row in reader:
            states.append(row[0])
            values.append(float(row[1]))
    return np.array(states), np.array(values)
