"""Deterministic file emission: CSV or JSON-lines tables with a provenance header."""

import csv
import io
import json
import math
from pathlib import Path

from . import __version__


def header_fields(config_digest, seed, extra=None):
    h = {"tool": "ionaddress", "version": __version__, "config_sha256": config_digest, "seed": seed}
    if extra:
        h.update(extra)
    return h


def _cell(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    return v


def render_table(columns, rows, fmt="csv", header=None):
    buf = io.StringIO()
    if fmt == "csv":
        for k, v in (header or {}).items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    elif fmt == "json-lines":
        if header is not None:
            buf.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for r in rows:
            rec = {c: (_cell(v) if isinstance(v, float) and math.isinf(v) else v) for c, v in zip(columns, r)}
            buf.write(json.dumps(rec, sort_keys=False) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return buf.getvalue()


def write_table(out_dir, stem, columns, rows, fmt="csv", header=None):
    ext = "csv" if fmt == "csv" else "jsonl"
    path = Path(out_dir) / f"{stem}.{ext}"
    path.write_text(render_table(columns, rows, fmt, header))
    return path


def write_json(out_dir, name, payload, header=None):
    path = Path(out_dir) / name
    doc = {"header": header, **payload} if header is not None else payload
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def write_text(out_dir, name, text, header=None):
    path = Path(out_dir) / name
    head = "".join(f"# {k}: {v}\n" for k, v in (header or {}).items())
    path.write_text(head + text)
    return path


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialise {type(o).__name__}")


def read_table(path):
    """Read a CSV written by ``write_table``: returns (header dict, columns, float rows)."""
    header, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            header[k] = v
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = []
    for r in reader:
        rows.append([float(x) if _numeric(x) else x for x in r])
    return header, columns, rows


def _numeric(text):
    try:
        float(text)
    except ValueError:
        return False
    return True
