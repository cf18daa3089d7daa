"""Deterministic CSV/JSON writers and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SIG_DIGITS = 17


def fmt(x) -> str:
    """Format a scalar with 17 significant digits (integers and strings verbatim)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, f".{SIG_DIGITS}g")


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def config_checksum(config: dict) -> str:
    return sha256_bytes(canonical_json(config).encode())


class OutputCollector:
    """Single writer for all files of a run; records checksums for the manifest."""

    def __init__(self, out_dir: str | Path, config_sha: str, tool: str = "phonon-cat"):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config_sha = config_sha
        self.tool = tool
        self.files: list[Path] = []

    def _register(self, path: Path) -> Path:
        if path not in self.files:
            self.files.append(path)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence],
                  meta: dict | None = None) -> Path:
        """Long-format CSV with a ``#`` comment block carrying the config checksum."""
        path = self.dir / name
        with path.open("w", newline="") as fh:
            fh.write(f"# generator: {self.tool}\n")
            fh.write(f"# config_sha256: {self.config_sha}\n")
            for k, v in (meta or {}).items():
                fh.write(f"# {k}: {v}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        return self._register(path)

    def write_json(self, name: str, obj) -> Path:
        path = self.dir / name
        path.write_text(canonical_json(obj))
        return self._register(path)

    def checksums(self) -> list[dict]:
        return [{"path": p.name, "sha256": sha256_file(p)} for p in self.files]


def read_csv(path: str | Path) -> tuple[dict, list[str], np.ndarray]:
    """Parse a file written by :meth:`OutputCollector.write_csv` into ``(meta, header, rows)``."""
    meta, rows, header = {}, [], None
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition(":")
                meta[k.strip()] = v.strip()
            elif header is None:
                header = line.strip().split(",")
            else:
                rows.append(line.strip().split(","))
    return meta, header or [], np.array(rows, dtype=object)
