"""Append-only run manifests with crash-safe line framing.

Each record is one line: `<byte-length>:<crc32 hex>:<canonical json>`. A torn
tail write fails the framing check, so reloading always yields an intact
prefix without a database dependency. Timestamps live only in the header
line; record bodies are byte-reproducible across identical runs.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..errors import InputError, StateError, StorageError

HASH_ALG = "sha256"
MANIFEST_VERSION = 1


def canonical_json(obj) -> str:
    """Sorted keys, compact separators, ASCII-only: stable bytes per record."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True, allow_nan=False)


def _frame(body: str) -> str:
    data = body.encode("ascii")
    return f"{len(data)}:{zlib.crc32(data):08x}:{body}\n"


def _unframe(line: str) -> dict | None:
    """Parse one framed line; None if the framing or checksum fails."""
    try:
        length_s, crc_s, body = line.split(":", 2)
        length = int(length_s)
        data = body.encode("ascii")
        if len(data) != length or zlib.crc32(data) != int(crc_s, 16):
            return None
        return json.loads(body)
    except (ValueError, UnicodeEncodeError, json.JSONDecodeError):
        return None


def jsonable(value):
    """Coerce numpy scalars/arrays into plain JSON values."""
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


class RunManifest:
    """Single-writer append-only record log for one run."""

    def __init__(self, path: str | Path, run_id: str, config: dict):
        self.path = Path(path)
        self.run_id = run_id
        self.config = config
        self._seq = 0
        self._closed = False
        self.dirty = False
        header = {
            "type": "header",
            "version": MANIFEST_VERSION,
            "run_id": run_id,
            "hash_alg": HASH_ALG,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "config": jsonable(config),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="ascii")
        self._write_line(_frame(canonical_json(header)))

    def _write_line(self, line: str) -> None:
        try:
            self._fh.write(line)
            self._fh.flush()
        except (OSError, ValueError) as exc:
            self.dirty = True
            raise StorageError(f"manifest write failed: {exc}")

    def append(self, record: dict) -> int:
        """Durably append one record; returns its strictly increasing seq."""
        if self._closed:
            raise StateError("manifest is closed")
        self._seq += 1
        body = dict(jsonable(record))
        body["seq"] = self._seq
        self._write_line(_frame(canonical_json(body)))
        return self._seq

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._fh.close()

    @property
    def closed(self) -> bool:
        return self._closed

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class ManifestSlice:
    """Typed view over a filtered span of manifest records."""

    header: dict
    samples: list[dict] = field(default_factory=list)
    selections: list[dict] = field(default_factory=list)
    estimates: list[dict] = field(default_factory=list)
    summaries: list[dict] = field(default_factory=list)
    anchors: list[dict] = field(default_factory=list)
    reports: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return (len(self.samples) + len(self.selections) + len(self.estimates)
                + len(self.summaries) + len(self.anchors) + len(self.reports))

    def sample_matrix(self) -> np.ndarray:
        if not self.samples:
            raise InputError("slice contains no sample records")
        return np.asarray([s["values"] for s in self.samples], dtype=np.float64)

    def sample_ids(self) -> list[str]:
        return [s["id"] for s in self.samples]

    def selected_positions(self) -> set[tuple[int, int]]:
        return {(int(s["batch"]), int(s["selected_index"])) for s in self.selections}

    def selected_sample_records(self) -> list[dict]:
        by_pos = {(int(s["batch"]), int(s["index"])): s for s in self.samples}
        out = []
        for sel in self.selections:
            key = (int(sel["batch"]), int(sel["selected_index"]))
            if key not in by_pos:
                raise InputError(
                    f"selection references missing sample record batch={key[0]} "
                    f"index={key[1]}")
            out.append(by_pos[key])
        return out

    def selected_ids(self) -> set[str]:
        return {s["selected_id"] for s in self.selections}


class LoadedManifest:
    """Read-back view of a manifest file, tolerant of a torn tail."""

    def __init__(self, header: dict, records: list[dict], truncated: bool):
        self.header = header
        self.records = records
        self.truncated = truncated

    @property
    def run_id(self) -> str:
        return self.header.get("run_id", "")

    @property
    def config(self) -> dict:
        return self.header.get("config", {})

    def slice(self, *, prompt: str | None = None, phase: str | None = None) -> ManifestSlice:
        out = ManifestSlice(header=self.header)
        for rec in self.records:
            if prompt is not None and rec.get("prompt") not in (prompt, None):
                continue
            rtype = rec.get("type")
            if rtype == "sample":
                if phase is None or rec.get("phase") == phase:
                    out.samples.append(rec)
            elif rtype == "selection":
                out.selections.append(rec)
            elif rtype == "estimate":
                if phase is None or rec.get("phase") == phase:
                    out.estimates.append(rec)
            elif rtype == "summary":
                if phase is None or rec.get("phase") == phase:
                    out.summaries.append(rec)
            elif rtype == "anchor":
                out.anchors.append(rec)
            elif rtype == "report":
                out.reports.append(rec)
        return out


def load_manifest(path: str | Path) -> LoadedManifest:
    path = Path(path)
    if not path.exists():
        raise StorageError(f"manifest not found: {path}")
    header: dict | None = None
    records: list[dict] = []
    truncated = False
    with path.open("r", encoding="ascii", errors="replace") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            obj = _unframe(line)
            if obj is None:
                truncated = True
                break
            if header is None:
                if obj.get("type") != "header":
                    raise StorageError(f"{path}: first record is not a header")
                header = obj
            else:
                records.append(obj)
    if header is None:
        raise StorageError(f"{path}: no intact header line")
    return LoadedManifest(header, records, truncated)
