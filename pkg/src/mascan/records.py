"""Flat JSONL run records with deterministic serialization."""

import json
from pathlib import Path

import numpy as np

# keys that legitimately differ between repeated identical runs
VOLATILE_KEYS = ("wall_time",)


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    raise TypeError(f"cannot serialize {type(value).__name__}")


def record_line(record: dict) -> str:
    return json.dumps(to_jsonable(record), sort_keys=True)


def write_records(path, records) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w") as fh:
        for record in records:
            fh.write(record_line(record) + "\n")
            n += 1
    return n


def append_record(path, record) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(record_line(record) + "\n")


def read_records(path) -> list[dict]:
    out = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def stable_view(record: dict) -> dict:
    """The record without fields expected to vary between reruns."""
    return {k: v for k, v in record.items() if k not in VOLATILE_KEYS}
