"""Small IO helpers: full-precision CSV/JSON writing and checked JSON loading.

All floats are written with 17 significant digits so files round-trip
double precision exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Iterable, Sequence

from .errors import ModelFormatError


def fmt_float(x) -> str:
    """Render a float with 17 significant digits (lossless round-trip)."""
    return format(float(x), ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write rows to ``path``; floats get full precision, the rest ``str``."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                fmt_float(v) if isinstance(v, float) else str(v) for v in row
            ]
            fh.write(",".join(cells) + "\n")


def write_json(path, obj) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    """Load JSON, re-raising parse failures with line/column context."""
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
