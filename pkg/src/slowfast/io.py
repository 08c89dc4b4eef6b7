"""Output writers: CSV with 12 significant digits, 8-bit PGM, atomic replace."""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SIG_DIGITS = 12


def fmt(x) -> str:
    """Format one CSV cell. Floats get 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, f".{SIG_DIGITS}g")
    if isinstance(x, complex):
        return f"{fmt(x.real)}{'+' if x.imag >= 0 else '-'}{fmt(abs(x.imag))}j"
    if x is None:
        return ""
    s = str(x)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def csv_text(header: Sequence[str] | None, rows: Iterable[Sequence]) -> str:
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header: Sequence[str] | None, rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, csv_text(header, rows))


def write_columns(path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    write_csv(path, names, zip(*arrays))


def write_grid_csv(path, z: np.ndarray) -> None:
    """A 1D profile as one row, a 2D array row-major with one line per y-row."""
    z = np.atleast_2d(z)
    write_csv(path, None, z.tolist())


def write_pgm(path, z: np.ndarray) -> tuple[float, float]:
    """8-bit binary PGM, min-max scaled; writes ``<path>.txt`` with the scaling."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    lo, hi = float(np.min(z)), float(np.max(z))
    if hi > lo:
        scaled = np.rint((z - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(z)
    img = scaled.astype(np.uint8)
    ny, nx = img.shape
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + img.tobytes())
    atomic_write_text(f"{path}.txt", f"min,{fmt(lo)}\nmax,{fmt(hi)}\n")
    return lo, hi


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    nx, ny = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(ny, nx)
