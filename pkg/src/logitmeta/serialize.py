"""Deterministic JSON text with 17-significant-digit reals."""

import hashlib
import json
import math
import os
import tempfile

import numpy as np


def _fmt_real(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == int(x) and abs(x) < 2**53:
        # keep integral reals visibly real so they reload as floats
        return f"{int(x)}.0"
    return format(x, ".17g")


def _encode(obj, indent, level, out):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    colon = ":" if indent is None else ": "
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_real(obj))
    elif isinstance(obj, str):
        out.append(_quote(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if k:
                out.append(",")
            out.append(pad)
            out.append(_quote(str(key)))
            out.append(colon)
            _encode(obj[key], indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not len(seq):
            out.append("[]")
            return
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        out.append("[")
        for k, v in enumerate(seq):
            if k:
                out.append(", " if flat and indent is not None else ",")
            if not flat:
                out.append(pad)
            _encode(v, indent, level + 1, out)
        out.append(("" if flat else end) + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _quote(s):
    return json.dumps(s, ensure_ascii=True)


def dumps(obj, indent=None):
    """Serialize ``obj`` with sorted keys and 17-digit reals."""
    out = []
    _encode(obj, indent, 0, out)
    return "".join(out)


def content_hash(obj):
    """SHA-256 of the compact canonical serialization."""
    return hashlib.sha256(dumps(obj).encode("ascii")).hexdigest()


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
