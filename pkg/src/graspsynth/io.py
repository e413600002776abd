"""ASCII PLY and canonical JSON readers/writers.

File layouts are documented bit-exactly in docs/formats.md.  All writers are
deterministic (fixed float formatting, sorted JSON keys) and atomic (write to
a temp file in the target directory, then rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError

_PLY_TYPES = {"float": np.float32, "uchar": np.uint8}


def _format_float32(value: float) -> str:
    return np.format_float_positional(np.float32(value), unique=True, trim="-")


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_ply(path, columns, comments=()) -> None:
    """columns: ordered list of (name, kind, 1-d array), kind in float/uchar."""
    arrays = [np.asarray(arr) for _, _, arr in columns]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ValueError("all PLY columns must have equal length")
    lines = ["ply", "format ascii 1.0"]
    lines += [f"comment {c}" for c in comments]
    lines.append(f"element vertex {n}")
    for (name, kind, _), _arr in zip(columns, arrays):
        lines.append(f"property {kind} {name}")
    lines.append("end_header")
    for i in range(n):
        parts = []
        for (name, kind, _), arr in zip(columns, arrays):
            if kind == "float":
                parts.append(_format_float32(arr[i]))
            else:
                parts.append(str(int(arr[i])))
        lines.append(" ".join(parts))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_ply(path):
    """Parse an ascii PLY vertex element; returns (columns, comments) where
    columns is an ordered dict name -> (kind, array)."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=path) from exc
    lines = raw.splitlines()
    if not lines:
        raise ParseError("empty file", path=path, line=1)
    if lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic line", path=path, line=1)

    n_vertices = None
    props = []
    comments = []
    data_start = None
    fmt_seen = False
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            raise ParseError("blank line inside header", path=path, line=lineno)
        if tok[0] == "format":
            if tok[1:] != ["ascii", "1.0"]:
                raise ParseError(f"unsupported format {line!r}", path=path, line=lineno)
            fmt_seen = True
        elif tok[0] == "comment":
            comments.append(line[len("comment ") :])
        elif tok[0] == "element":
            if tok[1] != "vertex" or len(tok) != 3:
                raise ParseError(f"unsupported element {line!r}", path=path, line=lineno)
            try:
                n_vertices = int(tok[2])
            except ValueError:
                raise ParseError(f"bad vertex count {tok[2]!r}", path=path, line=lineno)
        elif tok[0] == "property":
            if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                raise ParseError(f"unsupported property {line!r}", path=path, line=lineno)
            if n_vertices is None:
                raise ParseError("property before element", path=path, line=lineno)
            props.append((tok[2], tok[1]))
        elif tok[0] == "end_header":
            data_start = lineno
            break
        else:
            raise ParseError(f"unexpected header line {line!r}", path=path, line=lineno)
    if not fmt_seen or n_vertices is None or data_start is None or not props:
        raise ParseError("incomplete PLY header", path=path, line=len(lines))

    rows = lines[data_start : data_start + n_vertices]
    if len(rows) < n_vertices:
        raise ParseError(
            f"expected {n_vertices} vertex rows, found {len(rows)}",
            path=path,
            line=len(lines),
        )
    out = {name: np.empty(n_vertices, dtype=_PLY_TYPES[kind]) for name, kind in props}
    for i, row in enumerate(rows):
        tok = row.split()
        lineno = data_start + 1 + i
        if len(tok) != len(props):
            raise ParseError(
                f"expected {len(props)} values, found {len(tok)}", path=path, line=lineno
            )
        for (name, kind), value in zip(props, tok):
            try:
                if kind == "uchar":
                    ivalue = int(value)
                    if not 0 <= ivalue <= 255:
                        raise ValueError("out of uchar range")
                    out[name][i] = ivalue
                else:
                    out[name][i] = np.float32(value)
            except ValueError:
                raise ParseError(
                    f"bad {kind} value {value!r} for property {name}",
                    path=path,
                    line=lineno,
                ) from None
    columns = {name: (kind, out[name]) for name, kind in props}
    return columns, comments


def require_columns(columns, names, path):
    missing = [n for n in names if n not in columns]
    if missing:
        raise ParseError(f"missing propert{'ies' if len(missing) > 1 else 'y'} {missing}", path=path)


def points_from_columns(columns) -> np.ndarray:
    return np.stack(
        [columns["x"][1], columns["y"][1], columns["z"][1]], axis=1
    ).astype(np.float64)


def save_hand_surface(surface, path, comments=()) -> None:
    """Posed hand surface with normals and region labels (0 palm,
    1..5 fingertip, 6..10 finger shaft)."""
    write_ply(
        path,
        [
            ("x", "float", surface.points[:, 0]),
            ("y", "float", surface.points[:, 1]),
            ("z", "float", surface.points[:, 2]),
            ("nx", "float", surface.normals[:, 0]),
            ("ny", "float", surface.normals[:, 1]),
            ("nz", "float", surface.normals[:, 2]),
            ("region", "uchar", surface.region),
        ],
        comments=comments,
    )


def load_hand_surface(path):
    from .hand import HandSurface

    columns, _ = read_ply(path)
    require_columns(columns, ["x", "y", "z", "nx", "ny", "nz", "region"], path)
    normals = np.stack(
        [columns["nx"][1], columns["ny"][1], columns["nz"][1]], axis=1
    ).astype(np.float64)
    return HandSurface(
        points=points_from_columns(columns),
        normals=normals,
        region=columns["region"][1].astype(np.uint8),
    )


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def dump_json(data, path) -> None:
    _atomic_write_text(path, canonical_json(data))


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc
