"""CSV and JSON output with config-hash sidecars."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np
import scipy

from . import __version__


def versions() -> dict:
    return {"fracspde": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def config_hash(payload: dict) -> str:
    text = json.dumps(_plain(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


class OutputDir:
    """Writes CSV/JSON files under one directory and tracks them for the manifest."""

    def __init__(self, root, cfg_hash: str, subcommand: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hash = cfg_hash
        self.subcommand = subcommand
        self.files: list[str] = []

    def _meta(self, extra=None) -> dict:
        meta = {"config_hash": self.hash, "subcommand": self.subcommand, "versions": versions()}
        if extra:
            meta.update(_plain(extra))
        return meta

    def csv(self, name: str, header, rows, meta=None) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.json(name.rsplit(".", 1)[0] + ".meta.json", self._meta({"columns": list(header), **(meta or {})}),
                  raw=True)
        self.files.append(name)
        return path

    def json(self, name: str, payload, raw: bool = False) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        body = payload if raw else {**self._meta(), **_plain(payload)}
        with open(path, "w") as fh:
            json.dump(_plain(body), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if name not in self.files:
            self.files.append(name)
        return path

    def manifest(self, extra: dict) -> Path:
        body = {"files": sorted(self.files), **_plain(extra)}
        return self.json("manifest.json", body)


def read_csv(path):
    """Header and float-converted rows (non-numeric cells kept as text)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = []
    for r in body:
        conv = []
        for v in r:
            try:
                conv.append(float(v))
            except ValueError:
                conv.append(v)
        out.append(conv)
    return header, out


def tree_digest(root) -> dict:
    """sha256 of every file under root except timing records."""
    root = Path(root)
    out = {}
    for dirpath, _, names in os.walk(root):
        for n in sorted(names):
            p = Path(dirpath) / n
            rel = str(p.relative_to(root))
            if n == "timing.json":
                continue
            out[rel] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out
