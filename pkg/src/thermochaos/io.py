"""File formats: binary PGM, CSV matrices, feature tables, atomic writes."""

from __future__ import annotations

import csv
import io as _io
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .nonlinear import NonlinearFeatures

MASK_THRESHOLD = 128


def fmt(x: float) -> str:
    """17-significant-digit decimal, stable across runs."""
    return f"{float(x):.17g}"


def atomic_write(path, data) -> None:
    """Write bytes or text via a temp file in the same directory, then rename."""
    path = Path(path)
    payload = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pgm_tokens(data: bytes):
    """Yield (token, end_offset) for the 4 header fields, skipping comments."""
    pos, found = 0, []
    while len(found) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise FormatError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        found.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return found, pos + 1


def decode_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Parse a binary (P5) PGM. Returns (uint array [rows, cols], maxval)."""
    (magic, w, h, maxval), offset = _pgm_tokens(data)
    if magic != b"P5":
        raise FormatError(f"only binary PGM (P5) is supported, got {magic!r}")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-integer PGM header field") from None
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise FormatError(f"bad PGM geometry {w}x{h} maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dtype.itemsize
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise FormatError(f"PGM raster has {len(raster)} bytes, expected {need}")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.uint16), maxval


def encode_pgm(pixels, maxval: int = 255) -> bytes:
    a = np.asarray(pixels)
    if a.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    if not 0 < maxval < 65536:
        raise ValueError("maxval must be in 1..65535")
    if a.min(initial=0) < 0 or a.max(initial=0) > maxval:
        raise ValueError(f"pixel values must lie in 0..{maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n{maxval}\n".encode("ascii")
    return header + np.ascontiguousarray(a.astype(dtype)).tobytes()


def read_pgm(path) -> tuple[np.ndarray, int]:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, pixels, maxval: int = 255) -> None:
    atomic_write(path, encode_pgm(pixels, maxval))


def unit_to_pgm(img, maxval: int = 255) -> np.ndarray:
    """Quantise [0, 1] intensities (clipped) to integer grey levels."""
    x = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.rint(x * maxval).astype(np.uint16)


def read_matrix_csv(path) -> np.ndarray:
    """Headerless numeric CSV; rows of the file are rows of the matrix."""
    try:
        a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None
    if a.size == 0:
        raise FormatError(f"{path}: empty matrix")
    return a


def write_matrix_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    atomic_write(path, "".join(",".join(fmt(v) for v in row) + "\n" for row in a))


def read_image(path) -> np.ndarray:
    """Grey image as float64: PGM (raw grey levels) or CSV matrix."""
    p = Path(path)
    if p.suffix.lower() in (".pgm", ".pnm"):
        return read_pgm(p)[0].astype(np.float64)
    return read_matrix_csv(p)


def read_mask(path) -> np.ndarray:
    """Boolean mask from a PGM (grey >= 128 on the 8-bit scale) or a 0/1 CSV."""
    p = Path(path)
    if p.suffix.lower() in (".pgm", ".pnm"):
        pix, maxval = read_pgm(p)
        return pix.astype(np.float64) * (255.0 / maxval) >= MASK_THRESHOLD
    a = read_matrix_csv(p)
    if not np.all((a == 0) | (a == 1)):
        raise FormatError(f"{path}: CSV mask must contain only 0 and 1")
    return a.astype(bool)


def write_mask_pgm(path, mask) -> None:
    write_pgm(path, np.where(np.asarray(mask, bool), 255, 0))


def write_column_csv(path, values, header: str) -> None:
    atomic_write(path, header + "\n" + "".join(fmt(v) + "\n" for v in np.ravel(values)))


def read_column_csv(path, header: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != [header]:
        raise FormatError(f"{path}: expected single-column CSV with header {header!r}")
    try:
        return np.array([float(r[0]) for r in rows[1:] if r], dtype=np.float64)
    except (ValueError, IndexError):
        raise FormatError(f"{path}: non-numeric value") from None


def features_csv(rows, labels=None) -> str:
    """``id,bcd,lle,le,apen`` table from (id, NonlinearFeatures) pairs.

    With ``labels`` a trailing ``label`` column is added.
    """
    out = _io.StringIO()
    out.write("id," + ",".join(NonlinearFeatures.NAMES) + (",label" if labels is not None else "") + "\n")
    for i, (ident, f) in enumerate(rows):
        tail = f",{int(labels[i])}" if labels is not None else ""
        out.write(str(ident) + "," + ",".join(fmt(v) for v in f.as_array()) + tail + "\n")
    return out.getvalue()


def _read_table(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    header = [c.strip() for c in rows[0]]
    if "id" not in header:
        raise FormatError(f"{path}: missing 'id' column")
    return header, rows[1:]


def _column(header, rows, name, path, cast):
    k = header.index(name)
    try:
        return np.array([cast(r[k]) for r in rows])
    except (ValueError, IndexError):
        raise FormatError(f"{path}: bad value in column {name!r}") from None


def read_feature_table(path, feature_cols) -> dict:
    """Read an id-keyed table. Returns ids, X and optional label/synthetic arrays."""
    header, rows = _read_table(path)
    missing = [c for c in feature_cols if c not in header]
    if missing:
        raise FormatError(f"{path}: missing columns {missing[:5]}")
    ids = [r[header.index("id")] for r in rows]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate ids")
    idx = [header.index(c) for c in feature_cols]
    try:
        X = np.array([[float(r[k]) for k in idx] for r in rows], dtype=np.float64)
    except (ValueError, IndexError):
        raise FormatError(f"{path}: non-numeric feature value") from None
    out = {"ids": ids, "X": X.reshape(len(rows), len(idx))}
    if "label" in header:
        y = _column(header, rows, "label", path, int)
        if not np.all((y == 0) | (y == 1)):
            raise FormatError(f"{path}: labels must be 0 or 1")
        out["y"] = y
    if "synthetic" in header:
        out["synthetic"] = _column(header, rows, "synthetic", path, int).astype(bool)
    return out


def deep_columns(dim: int = 2048) -> list[str]:
    return [f"f{i}" for i in range(dim)]


def read_deep_csv(path, dim: int = 2048) -> dict:
    """``id,label,f0..f{dim-1}`` (an optional ``synthetic`` 0/1 column is honoured)."""
    t = read_feature_table(path, deep_columns(dim))
    if "y" not in t:
        raise FormatError(f"{path}: deep-feature CSV needs a 'label' column")
    return t


def read_hand_csv(path) -> dict:
    return read_feature_table(path, list(NonlinearFeatures.NAMES))


def deep_csv(ids, labels, X, synthetic=None) -> str:
    X = np.asarray(X, dtype=np.float64)
    out = _io.StringIO()
    cols = ["id", "label"] + (["synthetic"] if synthetic is not None else [])
    out.write(",".join(cols + deep_columns(X.shape[1])) + "\n")
    for i, ident in enumerate(ids):
        head = [str(ident), str(int(labels[i]))]
        if synthetic is not None:
            head.append(str(int(bool(synthetic[i]))))
        out.write(",".join(head + [fmt(v) for v in X[i]]) + "\n")
    return out.getvalue()
