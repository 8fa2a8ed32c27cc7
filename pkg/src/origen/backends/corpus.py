"""Corpus backend: replay precomputed embeddings from a JSONL file.

File format: one JSON object per line, {"id": str, "dim": int, "values":
[float]}; ids unique, dim constant across the file. Draws are uniform with
replacement, seeded.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ContractViolationError, DomainError, FormatError, InputError
from ..geometry import Embedding, SampleBatch
from ..seeds import derive_seed, rng_from_seed
from .base import GeneratorBackend, check_count


def load_embedding_file(path: str | Path) -> list[Embedding]:
    """Parse an embedding JSONL file, enforcing unique ids and constant dim."""
    path = Path(path)
    records: list[Embedding] = []
    seen: set[str] = set()
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}", line=lineno)
            if not isinstance(obj, dict) or not {"id", "dim", "values"} <= obj.keys():
                raise FormatError(
                    f"{path}:{lineno}: record must carry id, dim, values", line=lineno)
            rec_id = obj["id"]
            if not isinstance(rec_id, str) or not rec_id:
                raise FormatError(f"{path}:{lineno}: id must be a non-empty string",
                                  line=lineno)
            if rec_id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate id {rec_id!r}", line=lineno)
            seen.add(rec_id)
            values = np.asarray(obj["values"], dtype=np.float64)
            if values.ndim != 1 or values.size != int(obj["dim"]):
                raise FormatError(
                    f"{path}:{lineno}: values length {values.size} != dim {obj['dim']}",
                    line=lineno)
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise ContractViolationError(
                    f"{path}:{lineno}: dimension {values.size} != file dimension {dim}")
            try:
                records.append(Embedding(values, id=rec_id))
            except (InputError, DomainError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}", line=lineno)
    if not records:
        raise FormatError(f"{path}: no embedding records")
    return records


def write_embedding_file(path: str | Path, embeddings) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in embeddings:
            fh.write(json.dumps({"id": e.id, "dim": e.dim,
                                 "values": [float(x) for x in e.values]},
                                sort_keys=True) + "\n")


class CorpusBackend(GeneratorBackend):
    """Uniform-with-replacement sampler over a loaded embedding corpus."""

    def __init__(self, path: str | Path, backend_id: str | None = None):
        self.path = Path(path)
        self.records = load_embedding_file(self.path)
        self.id = backend_id or f"corpus:{self.path.name}"
        self.embedding_dimension = self.records[0].dim
        self.supports_raw_content = False
        self._matrix = np.stack([e.values for e in self.records])
        self._ids = [e.id for e in self.records]

    def lookup(self, record_id: str) -> Embedding:
        for e in self.records:
            if e.id == record_id:
                return e
        raise InputError(f"id {record_id!r} not found in corpus {self.path}")

    def generate(self, prompt: str, seed: int, count: int) -> SampleBatch:
        check_count(count)
        n_records = len(self.records)
        rows = np.empty((count, self.embedding_dimension))
        ids = []
        for i in range(count):
            rng = rng_from_seed(derive_seed("sample", prompt, seed, i))
            k = int(rng.integers(0, n_records))
            rows[i] = self._matrix[k]
            ids.append(self._ids[k])
        return SampleBatch(matrix=rows, ids=ids)
