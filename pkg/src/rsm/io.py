"""Plain-text CSV matrices with NaN (or empty) cells for missing entries."""

from __future__ import annotations

import hashlib
import math
import os

import numpy as np

from .core import Array, MaskedMatrix
from .errors import DimensionMismatch, IoError, ParseError


def _read_text(path: str | os.PathLike) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc


def parse_matrix(text: str, source: str = "<text>") -> MaskedMatrix:
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"{source}:{lineno}: ragged row with {len(cells)} cells, expected {width}"
            )
        row = []
        for cell in cells:
            token = cell.strip()
            if not token or token.lower() == "nan":
                row.append(math.nan)
                continue
            try:
                value = float(token)
            except ValueError:
                raise ParseError(f"{source}:{lineno}: non-numeric cell {token!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"{source}:{lineno}: non-finite cell {token!r}")
            row.append(value)
        rows.append(row)
    if not rows:
        raise ParseError(f"{source}: no data rows")
    return MaskedMatrix.from_nan(np.array(rows, dtype=np.float64))


def load_matrix(path: str | os.PathLike) -> MaskedMatrix:
    return parse_matrix(_read_text(path), str(path))


def _format(value: float) -> str:
    return "NaN" if math.isnan(value) else format(value, ".17g")


def format_matrix(data: MaskedMatrix | Array) -> str:
    if isinstance(data, MaskedMatrix):
        values = np.where(data.mask, data.values, np.nan)
    else:
        values = np.asarray(data, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
    if values.ndim != 2 or values.size == 0:
        raise DimensionMismatch(f"refusing to write an empty or non-2-D array {values.shape}")
    return "".join(",".join(_format(x) for x in row) + "\n" for row in values.tolist())


def save_matrix(data: MaskedMatrix | Array, path: str | os.PathLike) -> None:
    """Write ``data`` so that ``load_matrix`` restores it bit for bit."""
    text = format_matrix(data)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror or exc}") from exc


def checksum(M: MaskedMatrix) -> str:
    """SHA-256 over shape, mask bits and the known values (little-endian float64)."""
    h = hashlib.sha256()
    h.update(np.asarray(M.shape, dtype="<i8").tobytes())
    h.update(np.packbits(M.mask).tobytes())
    h.update(np.ascontiguousarray(M.values[M.mask], dtype="<f8").tobytes())
    return h.hexdigest()
