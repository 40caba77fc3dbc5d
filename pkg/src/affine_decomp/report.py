"""Canonical JSON and CSV output.

Canonical JSON has sorted keys, no insignificant whitespace, UTF-8, a trailing
LF, and floats written with 17 significant digits, so equal content always
gives equal bytes. Non-finite floats are written as the strings ``"nan"``,
``"inf"`` and ``"-inf"``.
"""

import csv
import io
import json
import math
from fractions import Fraction

import numpy as np


def format_float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _encode(obj, out):
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating, Fraction)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    elif hasattr(obj, "to_dict"):
        _encode(obj.to_dict(), out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj):
    """Deterministic JSON text for ``obj`` (ends with a newline)."""
    out = []
    _encode(obj, out)
    return "".join(out) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(obj))


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating, Fraction)):
        return format_float(value).strip('"')
    return str(value)


def csv_text(rows, columns=None):
    """CSV with a header row; floats formatted exactly as in the JSON."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_csv(path, rows, columns=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(rows, columns))
