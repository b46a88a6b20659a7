"""File formats: PGM masks and slices, CSV field dumps, deterministic JSON."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .domain_grid import DomainError, GridDomain, GridFunction

_INDEX_NAMES = "ijklmnopqrs"


# --- PGM ---------------------------------------------------------------------


def write_pgm(path: str | Path, image: np.ndarray, binary: bool = False) -> None:
    """Write a 2D uint8 array; row 0 of the file is ``image[:, -1]`` (y up)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM output needs a 2D array")
    rows = np.flipud(img.T).astype(np.uint8)
    height, width = rows.shape
    path = Path(path)
    if binary:
        path.write_bytes(f"P5\n{width} {height}\n255\n".encode() + rows.tobytes())
    else:
        lines = [" ".join(str(int(x)) for x in row) for row in rows]
        path.write_text(f"P2\n{width} {height}\n255\n" + "\n".join(lines) + "\n")


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a P2/P5 greymap into an array indexed ``[i, j]`` with j pointing up."""
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P5":
        if maxval > 255:
            raise ValueError("16-bit PGM is not supported")
        raw = np.frombuffer(data[pos + 1 : pos + 1 + width * height], dtype=np.uint8)
    elif magic == b"P2":
        body = b" ".join(
            line.split(b"#")[0] for line in data[pos:].splitlines()
        )
        raw = np.array(body.split(), dtype=np.int64)
    else:
        raise ValueError(f"not a PGM file (magic {magic!r})")
    if raw.size != width * height:
        raise ValueError(f"PGM body has {raw.size} samples, expected {width * height}")
    rows = raw.reshape(height, width)
    return np.flipud(rows).T.copy()


def mask_to_pgm(path: str | Path, domain: GridDomain, binary: bool = False) -> None:
    if domain.ndim != 2:
        raise DomainError("mask export is for 2D lattices")
    write_pgm(path, domain.interior_mask.astype(np.uint8) * 255, binary=binary)


def domain_from_pgm(path: str | Path, bounds: Sequence[Sequence[float]]) -> GridDomain:
    """Lattice over ``bounds`` whose interior is every pixel with value > 127."""
    img = read_pgm(path)
    return GridDomain(tuple(map(tuple, bounds)), img.shape, img > 127)


def field_slice_to_pgm(path: str | Path, f: GridFunction, axis_index: Sequence[int] | None = None) -> None:
    """Greyscale image of ``f`` (2D) or of a 2D slice through the first two axes."""
    vals = f.values
    if vals.ndim > 2:
        idx = list(axis_index) if axis_index is not None else [s // 2 for s in vals.shape[2:]]
        vals = vals[(slice(None), slice(None), *idx)]
    elif vals.ndim == 1:
        raise DomainError("PGM slices need at least two dimensions")
    top = np.abs(vals).max()
    img = np.zeros(vals.shape) if top == 0 else np.abs(vals) / top * 255.0
    write_pgm(path, np.rint(img), binary=False)


# --- CSV -----------------------------------------------------------------------


def csv_header(ndim: int) -> str:
    idx = ",".join(_INDEX_NAMES[:ndim])
    coords = ",".join(f"x{j + 1}" for j in range(ndim))
    return f"{idx},{coords},value"


def field_to_csv(path: str | Path, f: GridFunction) -> None:
    """One line per lattice node, C order, floats in shortest round-trip form."""
    dom = f.domain
    if dom.ndim > len(_INDEX_NAMES):
        raise DomainError("too many dimensions for CSV export")
    axes = dom.axes()
    lines = [csv_header(dom.ndim)]
    for idx in np.ndindex(*dom.shape):
        coords = ",".join(format_float(axes[j][i]) for j, i in enumerate(idx))
        lines.append(",".join(map(str, idx)) + "," + coords + "," + format_float(f.values[idx]))
    Path(path).write_text("\n".join(lines) + "\n")


def field_from_csv(path: str | Path, domain: GridDomain) -> GridFunction:
    lines = Path(path).read_text().strip().splitlines()
    if lines[0] != csv_header(domain.ndim):
        raise ValueError(f"unexpected CSV header {lines[0]!r}")
    vals = np.zeros(domain.shape)
    for line in lines[1:]:
        parts = line.split(",")
        idx = tuple(int(x) for x in parts[: domain.ndim])
        vals[idx] = float(parts[-1])
    return GridFunction(domain, vals)


# --- JSON ----------------------------------------------------------------------


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return repr(x)


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.number, np.bool_)) or v is None for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with floats in shortest round-trip form, keys in insertion order."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj))
