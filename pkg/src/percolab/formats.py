"""On-disk formats: '#'-prefixed metadata blocks, CSV tables and JSON summaries."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from . import __version__


def header_block(config):
    """Comment block echoing the artifact version and the full configuration."""
    lines = [f"# percolab {__version__}"]
    for key in sorted(config):
        lines.append(f"# {key} = {json.dumps(_plain(config[key]), sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, config, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(header_block(config))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def read_csv(path):
    """(metadata lines, header, rows as lists of strings)."""
    meta, rows = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                meta.append(line.rstrip("\n"))
            else:
                rows.append(line)
    reader = list(csv.reader(rows))
    return meta, reader[0], reader[1:]


def write_json(path, config, payload):
    """JSON document whose first key ``#config`` echoes version and configuration."""
    doc = {"#config": {"version": __version__, **_plain(config)}}
    doc.update(_plain(payload))
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
