"""CSV output with ``#``-prefixed provenance headers.

Every file starts with comment lines recording the package version, a
hash of the resolved configuration, a timestamp and the full parameter
set.  The timestamp line is the only one that changes between identical
runs, so files can be compared with :func:`strip_timestamp`.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import math
import os

from . import __version__

MISSING = "nan"
TIMESTAMP_PREFIX = "# timestamp:"


def fmt(x) -> str:
    """Serialise a number with 17 significant digits (round-trip exact)."""
    if x is None:
        return MISSING
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return MISSING
    return f"{x:.17g}"


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float):
        return fmt(obj)
    return obj


def config_hash(params: dict) -> str:
    """SHA-256 (first 16 hex digits) of the canonical JSON form of ``params``."""
    blob = json.dumps(_canonical(params), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_lines(params: dict, extra: dict | None = None) -> list[str]:
    lines = [
        f"# atomembrane version: {__version__}",
        f"# config_hash: {config_hash(params)}",
        f"{TIMESTAMP_PREFIX} {datetime.datetime.now(datetime.timezone.utc).isoformat(timespec='seconds')}",
    ]
    for key, value in sorted(params.items()):
        lines.append(f"# param {key} = {_render(value)}")
    for key, value in sorted((extra or {}).items()):
        lines.append(f"# {key}: {_render(value)}")
    return lines


def _render(value):
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return fmt(value)
    return str(value)


def write_csv(path, columns, rows, params: dict, extra: dict | None = None):
    """Write ``rows`` under a provenance header; floats use 17 digits."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in header_lines(params, extra):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(header_lines, columns, rows)``; cells are left as strings."""
    header, body = [], []
    with open(path, newline="") as fh:
        for line in fh:
            (header if line.startswith("#") else body).append(line)
    reader = csv.reader(body)
    columns = next(reader)
    return [h.rstrip("\n") for h in header], columns, list(reader)


def strip_timestamp(text: str) -> str:
    return "".join(l for l in text.splitlines(keepends=True) if not l.startswith(TIMESTAMP_PREFIX))
