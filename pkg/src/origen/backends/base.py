"""Black-box sample source interface.

A backend stands in for the conditioned distribution P(y|x): it owns all
randomness given (prompt, seed) and must return embeddings that satisfy the
geometry invariants. Everything downstream treats it as opaque.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

from ..errors import InputError
from ..geometry import SampleBatch


class GeneratorBackend(ABC):
    """Deterministic conditioned sampler: (prompt, seed) fixes the output."""

    id: str = ""
    embedding_dimension: int = 0
    supports_raw_content: bool = False

    @abstractmethod
    def generate(self, prompt: str, seed: int, count: int) -> SampleBatch:
        """Draw `count` i.i.d. embeddings conditioned on `prompt`."""

    def describe(self) -> dict:
        return {
            "id": self.id,
            "embedding_dimension": self.embedding_dimension,
            "supports_raw_content": self.supports_raw_content,
        }


class BackendRegistry:
    """Name -> backend lookup so manifests can name their sample source."""

    def __init__(self):
        self._backends: dict[str, GeneratorBackend] = {}

    def register(self, backend: GeneratorBackend) -> GeneratorBackend:
        if not backend.id:
            raise InputError("backend must carry a non-empty id")
        self._backends[backend.id] = backend
        return backend

    def resolve(self, backend_id: str) -> GeneratorBackend:
        try:
            return self._backends[backend_id]
        except KeyError:
            raise InputError(
                f"unknown backend {backend_id!r}; registered: {sorted(self._backends)}"
            ) from None

    def __contains__(self, backend_id: str) -> bool:
        return backend_id in self._backends


def check_count(count: int) -> None:
    if count < 1:
        raise InputError(f"sample count must be >= 1, got {count}")
