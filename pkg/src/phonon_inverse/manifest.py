"""Run manifests: the resolved configuration, grid fingerprints, and the
emitted files with checksums and row counts.  A manifest pins everything a
bitwise-reproducible rerun needs (scheduling and wall time excluded)."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

__all__ = ["RunManifest", "write_csv", "config_checksum"]


def config_checksum(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(path, header, rows) -> int:
    """Write rows with deterministic float formatting (shortest round-trip).

    Returns the data row count.
    """
    path = Path(path)
    count = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (int, float)) and
                             not isinstance(v, bool) else v for v in row])
            count += 1
    return count


class RunManifest:
    """Collects run metadata and writes manifest.json next to the outputs."""

    def __init__(self, command: str, config: dict, defaults_applied: list, out_dir):
        self.command = command
        self.config = config
        self.defaults_applied = defaults_applied
        self.out_dir = Path(out_dir)
        self.grids: dict = {}
        self.outputs: list = []
        self.notes: dict = {}
        self._t0 = time.perf_counter()

    def add_grid(self, tag: str, grid, extra: dict | None = None):
        info = grid.fingerprint()
        if extra:
            info.update(extra)
        self.grids[tag] = info

    def add_output(self, path, rows: int | None = None):
        path = Path(path)
        entry = {"path": path.name, "sha256": _file_sha256(path)}
        if rows is not None:
            entry["rows"] = rows
        self.outputs.append(entry)

    def add_note(self, key: str, value):
        self.notes[key] = value

    def write(self) -> Path:
        doc = {
            "schema_version": 1,
            "command": self.command,
            "software": {"name": "phonon-inverse", "version": __version__},
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "config_checksum": config_checksum(self.config),
            "config": self.config,
            "defaults_applied": self.defaults_applied,
            "grids": self.grids,
            "outputs": self.outputs,
            "notes": self.notes,
            "wall_time_s": time.perf_counter() - self._t0,
        }
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path
