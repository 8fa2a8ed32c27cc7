"""Content-addressed embedding cache.

Keyed by (content-hash, embedder-id) with a two-level directory fan-out.
Stored vectors are unit-normalized once at write time: the only metric in
play is cosine, so magnitude carries no information and normalizing here
saves recomputation on every lookup. Keys include the embedder id because
mixing embedding spaces would silently corrupt results.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from pathlib import Path
from typing import Callable

import numpy as np

from ..geometry import Embedding, normalize

_SAFE = re.compile(r"[^A-Za-z0-9._-]")


def content_hash(content: bytes, alg: str = "sha256") -> str:
    return f"{alg}:{hashlib.new(alg, content).hexdigest()}"


def _safe_name(embedder_id: str) -> str:
    return _SAFE.sub("_", embedder_id)


class EmbeddingCache:
    """get-or-compute cache over raw content bytes."""

    def __init__(self, root: str | Path, *, enabled: bool = True):
        self.root = Path(root)
        self.enabled = enabled
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def _path_for(self, digest: str, embedder_id: str) -> Path:
        bare = digest.split(":", 1)[1]
        return (self.root / bare[:2] / bare[2:4]
                / f"{bare}__{_safe_name(embedder_id)}.json")

    def get_or_compute(self, content: bytes, embedder_id: str,
                       compute: Callable[[bytes], Embedding]) -> Embedding:
        """Return the cached embedding, or compute, normalize and store it.

        A compute failure propagates and stores nothing. Concurrent misses on
        one key may both compute; determinism makes the results equal and the
        last write wins.
        """
        digest = content_hash(content)
        if not self.enabled:
            return normalize(compute(content))
        path = self._path_for(digest, embedder_id)
        if path.exists():
            doc = json.loads(path.read_text(encoding="utf-8"))
            if doc.get("embedder_id") == embedder_id and doc.get("content_hash") == digest:
                with self._lock:
                    self.hits += 1
                return Embedding(np.asarray(doc["values"], dtype=np.float64),
                                 id=doc.get("id", digest))
        embedding = normalize(compute(content))
        doc = {
            "content_hash": digest,
            "embedder_id": embedder_id,
            "id": embedding.id,
            "dim": embedding.dim,
            "values": [float(x) for x in embedding.values],
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")
        tmp.replace(path)
        with self._lock:
            self.misses += 1
        return embedding
