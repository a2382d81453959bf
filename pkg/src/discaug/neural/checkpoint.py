"""Plain-text checkpoint format.

::

    discaug-ckpt v1 <d> <H> <d_a> <V>
    <name> <rows> <cols>
    <rows lines of space-separated reals>
    ...
    tokens <V>
    <V lines, one vocabulary token each>

Vectors are written as single-row blocks.  Reals use 17 significant digits
so a save/load round trip is exact.
"""

from __future__ import annotations

import io

import numpy as np

from ..errors import DataError

MAGIC = "discaug-ckpt"
VERSION = "v1"


def _fmt_row(row) -> str:
    return " ".join(repr(float(v)) for v in row)


def dumps(header_dims, blocks, tokens=None) -> str:
    """Serialize ``blocks`` (name -> array) in the given iteration order."""
    buf = io.StringIO()
    buf.write(f"{MAGIC} {VERSION} {' '.join(str(int(v)) for v in header_dims)}\n")
    for name, arr in blocks.items():
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        elif arr.ndim != 2:
            arr = arr.reshape(arr.shape[0], -1)
        buf.write(f"{name} {arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            buf.write(_fmt_row(row) + "\n")
    if tokens is not None:
        buf.write(f"tokens {len(tokens)}\n")
        for tok in tokens:
            buf.write(f"{tok}\n")
    return buf.getvalue()


def save(path, header_dims, blocks, tokens=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(header_dims, blocks, tokens))


def loads(text: str, where="<string>"):
    """Parse a checkpoint into (header_dims, blocks, tokens).

    Blocks come back 2-D; callers reshape to their parameter shapes.
    """
    lines = text.split("\n")
    head = lines[0].split()
    if len(head) != 6 or head[0] != MAGIC or head[1] != VERSION:
        raise DataError(f"{where}: not a {MAGIC} {VERSION} file")
    dims = tuple(int(v) for v in head[2:])
    blocks, tokens = {}, None
    pos = 1
    while pos < len(lines):
        line = lines[pos]
        if not line:
            pos += 1
            continue
        parts = line.split()
        if parts[0] == "tokens" and len(parts) == 2:
            n = int(parts[1])
            tokens = lines[pos + 1:pos + 1 + n]
            if len(tokens) != n:
                raise DataError(f"{where}: truncated token section")
            pos += 1 + n
            continue
        if len(parts) != 3:
            raise DataError(f"{where}:{pos + 1}: malformed block header {line!r}")
        name, rows, cols = parts[0], int(parts[1]), int(parts[2])
        body = lines[pos + 1:pos + 1 + rows]
        if len(body) != rows:
            raise DataError(f"{where}: truncated block {name}")
        try:
            arr = np.array([[float(v) for v in row.split()] for row in body], dtype=float)
        except ValueError as exc:
            raise DataError(f"{where}: bad number in block {name}: {exc}") from exc
        arr = arr.reshape(rows, cols)
        blocks[name] = arr
        pos += 1 + rows
    return dims, blocks, tokens


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(text, where=str(path))
