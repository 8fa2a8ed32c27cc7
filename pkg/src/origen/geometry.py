"""Embedding geometry: cosine similarity/distance and pairwise matrices.

All accumulation happens in float64 regardless of the storage precision of
incoming vectors, and similarities are clamped to [-1, 1] after computation so
near-parallel unit vectors cannot push a distance outside [0, 2].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DomainError, InputError

__all__ = [
    "Embedding",
    "SampleBatch",
    "DistanceMatrix",
    "CosineDistance",
    "Metric",
    "register_metric",
    "resolve_metric",
    "metric_names",
    "cosine_similarity",
    "cosine_distance",
    "pairwise_distance_matrix",
    "normalize",
    "embedding_content_id",
]


def _as_float64(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InputError(f"embedding must be a 1-d vector, got shape {arr.shape}")
    return arr


def embedding_content_id(values) -> str:
    """Content identifier for a vector: sha256 over dim + float64 bytes."""
    arr = _as_float64(values)
    h = hashlib.sha256()
    h.update(arr.size.to_bytes(4, "little"))
    h.update(arr.tobytes())
    return "sha256:" + h.hexdigest()[:32]


@dataclass(frozen=True)
class Embedding:
    """A fixed-dimension feature vector for one creation.

    Zero-norm or non-finite vectors are rejected at construction so they fail
    at ingestion instead of poisoning a 10,000-sample run with NaNs.
    """

    values: np.ndarray
    id: str = ""

    def __post_init__(self):
        arr = _as_float64(self.values).copy()
        if arr.size < 1:
            raise InputError("embedding dimension must be >= 1")
        if not np.all(np.isfinite(arr)):
            raise InputError(f"embedding {self.id or '<unnamed>'} has non-finite components")
        if float(np.dot(arr, arr)) == 0.0:
            raise DomainError(f"embedding {self.id or '<unnamed>'} has zero norm")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if not self.id:
            object.__setattr__(self, "id", embedding_content_id(arr))

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


class SampleBatch:
    """Ordered collection of embeddings drawn under one conditioning.

    Stored as an (n, dim) float64 matrix plus parallel content ids; rows keep
    the draw order, which the genericizer's tie-breaking relies on.
    """

    def __init__(self, embeddings: Iterable[Embedding] = (), *,
                 matrix: np.ndarray | None = None,
                 ids: Sequence[str] | None = None):
        if matrix is not None:
            mat = np.asarray(matrix, dtype=np.float64)
            if mat.ndim != 2:
                raise InputError(f"batch matrix must be 2-d, got shape {mat.shape}")
            if ids is None or len(ids) != mat.shape[0]:
                raise InputError("batch ids must match matrix rows")
            self._validate_rows(mat)
            self._matrix = mat
            self._ids = tuple(ids)
        else:
            embs = list(embeddings)
            if not embs:
                self._matrix = np.empty((0, 0), dtype=np.float64)
                self._ids = ()
                return
            dim = embs[0].dim
            for i, e in enumerate(embs):
                if e.dim != dim:
                    raise InputError(
                        f"dimension mismatch at index {i}: {e.dim} != {dim}")
            self._matrix = np.stack([e.values for e in embs])
            self._ids = tuple(e.id for e in embs)
        self._matrix.flags.writeable = False

    @staticmethod
    def _validate_rows(mat: np.ndarray) -> None:
        for i, row in enumerate(mat):
            if not np.all(np.isfinite(row)):
                raise InputError(f"invalid embedding at index {i}: non-finite components")
            if float(np.dot(row, row)) == 0.0:
                raise InputError(f"invalid embedding at index {i}: zero norm")

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def dim(self) -> int:
        return int(self._matrix.shape[1])

    def __len__(self) -> int:
        return int(self._matrix.shape[0])

    def __getitem__(self, i: int) -> Embedding:
        return Embedding(self._matrix[i], id=self._ids[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class DistanceMatrix:
    """Materialized d(y_i, y_j) for one batch.

    Invariants enforced at construction: symmetric (1e-10), zero diagonal,
    non-negative. Cosine-built matrices additionally stay in [0, 2] because
    the similarity is clamped before subtraction.
    """

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"distance matrix must be square, got shape {m.shape}")
        if not np.allclose(m, m.T, atol=1e-10, rtol=0.0):
            raise InputError("distance matrix is not symmetric within 1e-10")
        if np.any(np.diag(m) != 0.0):
            raise InputError("distance matrix diagonal must be exactly zero")
        if m.size and m.min() < 0.0:
            raise InputError("distance entries must be non-negative")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    def scaled(self, alpha: float) -> "DistanceMatrix":
        """Uniformly rescaled copy; used to probe argmin scale invariance."""
        if alpha <= 0:
            raise DomainError("scale factor must be positive")
        return DistanceMatrix(self.entries * float(alpha))


class Metric:
    """A registered distance over embeddings.

    Every member must be symmetric, non-negative and zero on identical
    inputs; the property suite checks these for each registration.
    """

    name: str = ""

    def similarity(self, a: Embedding, b: Embedding) -> float:
        raise NotImplementedError

    def distance(self, a: Embedding, b: Embedding) -> float:
        raise NotImplementedError

    def similarities_to(self, reference: Embedding, batch: SampleBatch) -> np.ndarray:
        raise NotImplementedError

    def distances_to(self, reference: Embedding, batch: SampleBatch) -> np.ndarray:
        raise NotImplementedError

    def pairwise(self, batch: SampleBatch) -> DistanceMatrix:
        raise NotImplementedError


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    return mat / norms


class CosineDistance(Metric):
    """d(a, b) = 1 - (v_a . v_b) / (|v_a| |v_b|), clamped into [0, 2]."""

    name = "cosine-distance"

    def similarity(self, a: Embedding, b: Embedding) -> float:
        return cosine_similarity(a, b)

    def distance(self, a: Embedding, b: Embedding) -> float:
        return cosine_distance(a, b)

    def similarities_to(self, reference: Embedding, batch: SampleBatch) -> np.ndarray:
        if len(batch) == 0:
            raise InputError("empty batch")
        if batch.dim != reference.dim:
            raise InputError(
                f"dimension mismatch: reference {reference.dim} vs batch {batch.dim}")
        unit_ref = reference.values / reference.norm()
        sims = _unit_rows(batch.matrix) @ unit_ref
        return np.clip(sims, -1.0, 1.0)

    def distances_to(self, reference: Embedding, batch: SampleBatch) -> np.ndarray:
        return 1.0 - self.similarities_to(reference, batch)

    def pairwise(self, batch: SampleBatch) -> DistanceMatrix:
        if len(batch) < 1:
            raise InputError("empty batch")
        unit = _unit_rows(batch.matrix)
        sims = np.clip(unit @ unit.T, -1.0, 1.0)
        dist = 1.0 - sims
        dist = 0.5 * (dist + dist.T)
        np.fill_diagonal(dist, 0.0)
        np.clip(dist, 0.0, 2.0, out=dist)
        return DistanceMatrix(dist)


_REGISTRY: dict[str, Metric] = {}


def register_metric(metric: Metric) -> None:
    if not metric.name:
        raise InputError("metric must carry a non-empty name")
    _REGISTRY[metric.name] = metric


def resolve_metric(metric: Union[str, Metric]) -> Metric:
    """Look up a metric by registry name, or pass an instance through."""
    if isinstance(metric, Metric):
        return metric
    try:
        return _REGISTRY[metric]
    except KeyError:
        raise InputError(
            f"unknown metric {metric!r}; registered: {sorted(_REGISTRY)}") from None


def metric_names() -> list[str]:
    return sorted(_REGISTRY)


register_metric(CosineDistance())


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine similarity in [-1, 1]; inputs are validated Embeddings."""
    if a.dim != b.dim:
        raise InputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dot = float(np.dot(a.values, b.values))
    sim = dot / (a.norm() * b.norm())
    return float(min(1.0, max(-1.0, sim)))


def cosine_distance(a: Embedding, b: Embedding) -> float:
    """Cosine distance 1 - s(a, b), in [0, 2]."""
    return 1.0 - cosine_similarity(a, b)


def pairwise_distance_matrix(batch: SampleBatch, metric: Union[str, Metric]) -> DistanceMatrix:
    """All d(y_i, y_j) for one batch; computed once, reused by selection."""
    return resolve_metric(metric).pairwise(batch)


def normalize(e: Embedding) -> Embedding:
    """Rescale to unit euclidean norm; cosine distances are unchanged."""
    return Embedding(e.values / e.norm(), id=e.id)
