"""Table output (CSV/JSON), schema validation and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import re
from pathlib import Path

import numpy as np

_HEADER = re.compile(r"^[A-Za-z][A-Za-z0-9]*(?:_[A-Za-z0-9]+)*_[A-Za-z0-9]+$")
UNIT_SUFFIXES = ("m", "W", "T", "rad_s", "rad_s_m", "rad_s_m2", "rad", "1", "label", "Hz")


class SchemaError(ValueError):
    """A table does not follow the output conventions."""


def format_value(v) -> str:
    """Shortest round-trip text for numbers; strings pass through."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def check_header(name: str) -> None:
    if not _HEADER.match(name) or not any(name.endswith("_" + u) for u in UNIT_SUFFIXES):
        raise SchemaError(f"column {name!r} lacks a unit suffix ({', '.join(UNIT_SUFFIXES)})")


def table_rows(columns: dict) -> tuple[list[str], list[list]]:
    names = list(columns)
    for n in names:
        check_header(n)
    cols = [np.atleast_1d(np.asarray(columns[n], dtype=object)) for n in names]
    lengths = {c.size for c in cols}
    if len(lengths) > 1:
        raise SchemaError(f"columns have different lengths {sorted(lengths)}")
    n_rows = lengths.pop() if lengths else 0
    return names, [[cols[j][i] for j in range(len(names))] for i in range(n_rows)]


def render(columns: dict, fmt: str = "csv") -> str:
    names, rows = table_rows(columns)
    if fmt == "csv":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in rows:
            w.writerow([format_value(v) for v in r])
        return buf.getvalue()
    if fmt == "json":
        recs = [{n: _json_value(v) for n, v in zip(names, r)} for r in rows]
        return json.dumps({"columns": names, "records": recs}, indent=1, allow_nan=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _json_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def write_table(path, columns: dict, fmt: str = "csv") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(columns, fmt))
    return path


def read_table(path) -> dict:
    """Read a table written by :func:`write_table` back into string/float columns."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        names = data["columns"]
        for r in data["records"]:
            if list(r) != names:
                raise SchemaError(f"{path}: record keys differ from the column list")
        return {n: [r[n] for r in data["records"]] for n in names}
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    names = rows[0]
    out = {n: [] for n in names}
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(names):
            raise SchemaError(f"{path}: line {i} has {len(r)} fields, expected {len(names)}")
        for n, v in zip(names, r):
            out[n].append(v if n.endswith("_label") else float(v))
    return out


def validate_table(path) -> int:
    """Check headers and column counts; returns the number of rows."""
    cols = read_table(path)
    for n in cols:
        check_header(n)
    return len(next(iter(cols.values()))) if cols else 0


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command: str, config: dict, files, extra: dict | None = None) -> Path:
    """Manifest with the resolved config and content hashes; no timestamps, so reruns are byte-identical."""
    import numpy
    import scipy

    from . import __version__

    out_dir = Path(out_dir)
    doc = {
        "command": command,
        "config": config,
        "versions": {"tweezergates": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__},
        "files": {Path(f).name: sha256(f) for f in sorted(files, key=lambda p: Path(p).name)},
    }
    if extra:
        doc.update(extra)
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n")
    return path
