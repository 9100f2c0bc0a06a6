"""
Report emission for SIMLab.
Canonical JSON (sorted keys, fixed float formatting) and atomic file writes.
"""

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def _format_float(value: float) -> str:
    if math.isnan(value):
        return '"nan"'
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    text = format(value, ".17g")
    # keep floats recognisable as floats after a round trip
    if all(ch not in text for ch in ".eEn"):
        text += ".0"
    return text


def to_plain(obj: Any) -> Any:
    """Convert numpy containers/scalars and objects with to_dict() into plain JSON types."""
    if hasattr(obj, "to_dict") and callable(obj.to_dict):
        return to_plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(key): to_plain(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(item) for item in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(item) for item in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _encode(obj: Any, out: list, indent: int, level: int) -> None:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = ": " if indent else ":"

    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for n, key in enumerate(sorted(obj)):
            if n:
                out.append(",")
            out.append(pad)
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(sep)
            _encode(obj[key], out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[")
        for n, item in enumerate(obj):
            if n:
                out.append(",")
            out.append(pad)
            _encode(item, out, indent, level + 1)
        out.append(end + "]")
    else:
        raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def canonical_json(obj: Any, indent: int = 2) -> str:
    """
    Serialize to canonical JSON.

    Keys are sorted and floats use 17 significant digits, so identical inputs
    give byte-identical output. Non-finite floats become the strings
    "inf", "-inf" and "nan".
    """
    out: list = []
    _encode(to_plain(obj), out, indent, 0)
    return "".join(out) + "\n"


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_json_atomic(path, obj: Any) -> str:
    """
    Write `obj` as canonical JSON via temp file + rename.

    Returns:
        The path written, as a string
    """
    path = Path(path)
    _atomic_write_text(path, canonical_json(obj))
    return str(path)


def write_csv_atomic(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Write a CSV file atomically; floats use 17 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in row])
    path = Path(path)
    _atomic_write_text(path, buffer.getvalue())
    return str(path)
