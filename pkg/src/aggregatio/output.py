"""CSV/JSON emission, grid specs, and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GridError",
    "parse_grid",
    "parse_int_grid",
    "format_value",
    "parse_value",
    "rows_to_csv",
    "write_csv",
    "read_csv",
    "to_jsonable",
    "atomic_write",
    "sha256_file",
    "build_manifest",
    "verify_manifest",
]


class GridError(ValueError):
    pass


def parse_grid(spec: str) -> list[float]:
    """Parse ``start:stop:step`` (or a comma list) into an increasing list.

    ``stop`` is included when ``step`` divides the span within 1e-9.
    """
    spec = spec.strip()
    if ":" not in spec:
        try:
            values = [float(x) for x in spec.split(",") if x.strip()]
        except ValueError:
            raise GridError(f"bad grid spec {spec!r}") from None
    else:
        parts = spec.split(":")
        if len(parts) != 3:
            raise GridError(f"grid spec must be start:stop:step, got {spec!r}")
        try:
            start, stop, step = (float(x) for x in parts)
        except ValueError:
            raise GridError(f"bad grid spec {spec!r}") from None
        if not step > 0.0:
            raise GridError("grid step must be positive")
        if stop < start:
            raise GridError("grid stop must not be below start")
        span = (stop - start) / step
        count = round(span)
        if abs(span - count) > 1e-9:
            count = math.floor(span)
        values = [round(start + i * step, 12) for i in range(count + 1)]
    if not values:
        raise GridError(f"grid spec {spec!r} is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise GridError(f"grid spec {spec!r} is not increasing")
    return values


def parse_int_grid(spec: str) -> list[int]:
    values = parse_grid(spec)
    out = [int(round(v)) for v in values]
    if any(abs(v - o) > 1e-9 for v, o in zip(values, out)):
        raise GridError(f"grid spec {spec!r} must produce integers")
    return out


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if value.is_integer() and abs(value) < 1e16:
            # keep a decimal point so the reader restores a float
            return f"{value:.1f}"
        return format(value, ".17g")
    return str(value)


def parse_value(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def rows_to_csv(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    return atomic_write(path, rows_to_csv(columns, rows))


def read_csv(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [dict(zip(header, (parse_value(x) for x in line))) for line in reader]
    return header, rows


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    return obj


def atomic_write(path, data: str | bytes) -> Path:
    """Write via a temp file in the target directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command: str, params: dict, version: str, duration: float,
                   outputs: Sequence[Path], base: Path) -> dict:
    return {
        "command": command,
        "params": to_jsonable(params),
        "version": version,
        "duration_s": duration,
        "outputs": [
            {
                "path": os.path.relpath(p, base),
                "sha256": sha256_file(p),
                "bytes": Path(p).stat().st_size,
            }
            for p in outputs
        ],
    }


def verify_manifest(manifest_path) -> list[str]:
    """Return the outputs whose digest no longer matches (empty if all verify)."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    bad = []
    for entry in manifest["outputs"]:
        target = manifest_path.parent / entry["path"]
        if not target.exists() or sha256_file(target) != entry["sha256"]:
            bad.append(entry["path"])
    return bad
