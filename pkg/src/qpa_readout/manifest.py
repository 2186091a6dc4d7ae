"""Run manifests and deterministic tabular output.

Every CLI output file is accompanied by a sidecar ``<file>.manifest.json``
recording the resolved configuration, the subcommand arguments, seeds, the
tool version, and a content hash. The hash covers everything except the
timestamp, so identical (config, flags, seed) produce identical hashes and
byte-identical data files; the timestamp lives only in the sidecar.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

SCHEMA_VERSION = 1  # bump when any CSV column set or JSON layout changes


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


@dataclass(frozen=True)
class RunManifest:
    """Provenance of one CLI invocation."""

    command: str
    config: dict
    args: dict
    seed: int | None = None
    tool: str = "qpa-readout"
    version: str = __version__
    created_utc: str = field(default_factory=lambda: datetime.datetime.now(
        datetime.timezone.utc).replace(microsecond=0).isoformat())

    @property
    def manifest_hash(self) -> str:
        payload = {
            "command": self.command,
            "config": self.config,
            "args": self.args,
            "seed": self.seed,
            "tool": self.tool,
            "version": self.version,
        }
        return hashlib.sha256(_canonical_json(payload).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "version": self.version,
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "manifest_hash": self.manifest_hash,
            "seed": self.seed,
            "args": self.args,
            "config": self.config,
            "created_utc": self.created_utc,
        }

    def write_sidecar(self, data_path: Path) -> Path:
        side = data_path.with_name(data_path.name + ".manifest.json")
        side.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        return side


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)  # shortest round-trip representation, deterministic
    return str(value)


def write_csv(path: Path, columns: list[str], rows: list[dict],
              manifest: RunManifest | None = None) -> None:
    """RFC-4180 CSV (CRLF, header row); floats as shortest round-trip reprs."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])
    if manifest is not None:
        manifest.write_sidecar(path)


def write_json(path: Path, payload: dict, manifest: RunManifest | None = None) -> None:
    path = Path(path)
    body = dict(payload)
    if manifest is not None:
        body["manifest_hash"] = manifest.manifest_hash
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    if manifest is not None:
        manifest.write_sidecar(path)
