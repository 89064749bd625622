# app/utils/files.py - Atomic artifact writes (temp file in the target directory, then rename)

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Sequence

import numpy as np


def _atomic(path, write: Callable[[str], None]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_bytes_atomic(path, data: bytes) -> Path:
    def write(tmp):
        with open(tmp, "wb") as fh:
            fh.write(data)
    return _atomic(path, write)


def write_text_atomic(path, text: str) -> Path:
    return write_bytes_atomic(path, text.encode("utf-8"))


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def to_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json_atomic(path, payload) -> Path:
    return write_text_atomic(path, to_json(payload))


def format_cell(value) -> str:
    """CSV cell text: repr-exact floats, empty for None"""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv_atomic(path, columns: Sequence[str], rows: Iterable[Dict]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(col)) for col in columns])
    return write_text_atomic(path, buffer.getvalue())


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_npz_atomic(path, arrays: Dict[str, np.ndarray]) -> Path:
    def write(tmp):
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
    return _atomic(path, write)
