"""HTTP client for the v1 generate/embed wire protocol.

Retry policy: exponential backoff on transport faults only. A response that
violates the schema or the backend's own capability descriptor is a contract
bug and fails immediately; silently retrying it would mask the bug. Retries
resend the identical body with a fresh attempt header.
"""

from __future__ import annotations

import base64
import json
import time
from typing import Callable, Sequence

import httpx
import numpy as np

from ..errors import ContractViolationError, InputError, ProtocolError, TransportError
from ..geometry import Embedding, SampleBatch
from .base import GeneratorBackend, check_count

WIRE_VERSION = "v1"


def canonical_body(payload: dict) -> bytes:
    """Stable request bytes: sorted keys, no whitespace variance."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode("ascii")


class HttpBackend(GeneratorBackend):
    """Client for a remote sample source speaking the v1 protocol."""

    def __init__(self, endpoint: str, *,
                 timeout: float = 30.0,
                 max_retries: int = 3,
                 backoff_base: float = 0.25,
                 auth_token: str | None = None,
                 max_inflight: int = 4,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint.rstrip("/")
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.last_attempts = 0
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        if auth_token:
            headers["Authorization"] = f"Bearer {auth_token}"
        limits = httpx.Limits(max_connections=max_inflight)
        self._client = httpx.Client(base_url=self.endpoint, timeout=timeout,
                                    headers=headers, limits=limits,
                                    transport=transport)
        health = self.health()
        self.id = f"http:{self.endpoint}"
        self.embedding_dimension = int(health["dim"])
        self.model = str(health["model"])
        self.embedders = list(health.get("embedders", []))
        self.supports_raw_content = True

    def close(self) -> None:
        self._client.close()

    # -- transport ---------------------------------------------------------

    def _request(self, method: str, path: str, body: bytes | None = None) -> dict:
        last_exc: Exception | None = None
        for attempt in range(1, self.max_retries + 1):
            self.last_attempts = attempt
            headers = {"X-Attempt": str(attempt)}
            try:
                resp = self._client.request(method, path, content=body, headers=headers)
            except httpx.TimeoutException as exc:
                last_exc = TransportError(f"timeout on {path}: {exc}", attempts=attempt)
            except httpx.TransportError as exc:
                last_exc = TransportError(f"transport failure on {path}: {exc}",
                                          attempts=attempt)
            else:
                if resp.status_code != 200:
                    raise ProtocolError(
                        f"{path} returned status {resp.status_code}: {resp.text[:200]}")
                try:
                    payload = resp.json()
                except (json.JSONDecodeError, ValueError) as exc:
                    raise ProtocolError(f"{path} returned non-JSON body: {exc}")
                if not isinstance(payload, dict):
                    raise ProtocolError(f"{path} returned non-object JSON")
                return payload
            if attempt < self.max_retries:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
        assert last_exc is not None
        last_exc.attempts = self.max_retries
        raise last_exc

    # -- protocol operations -------------------------------------------------

    def health(self) -> dict:
        payload = self._request("GET", f"/{WIRE_VERSION}/health")
        for key in ("status", "dim", "model", "embedders"):
            if key not in payload:
                raise ProtocolError(f"health response missing field {key!r}")
        if payload["status"] != "ok":
            raise ProtocolError(f"backend unhealthy: {payload['status']!r}")
        return payload

    def generate(self, prompt: str, seed: int, count: int,
                 return_content: bool = False) -> SampleBatch:
        check_count(count)
        body = canonical_body({"prompt": prompt, "seed": int(seed),
                               "count": int(count),
                               "return_content": bool(return_content)})
        payload = self._request("POST", f"/{WIRE_VERSION}/generate", body)
        items = payload.get("items")
        dim = payload.get("dim")
        if not isinstance(items, list) or dim is None:
            raise ProtocolError("generate response missing items/dim")
        if len(items) != count:
            raise ProtocolError(f"requested {count} items, got {len(items)}")
        if int(dim) != self.embedding_dimension:
            raise ContractViolationError(
                f"response dim {dim} != descriptor dim {self.embedding_dimension}")
        rows = np.empty((count, self.embedding_dimension))
        ids: list[str] = []
        for i, item in enumerate(items):
            if not isinstance(item, dict) or "id" not in item:
                raise ProtocolError(f"generate item {i} malformed")
            emb = item.get("embedding")
            if emb is None:
                raise ProtocolError(f"generate item {i} carries no embedding")
            vec = np.asarray(emb, dtype=np.float64)
            if vec.ndim != 1 or vec.size != self.embedding_dimension:
                raise ContractViolationError(
                    f"item {i} embedding has dim {vec.size}, "
                    f"descriptor says {self.embedding_dimension}")
            rows[i] = vec
            ids.append(str(item["id"]))
        if len(set(ids)) != len(ids):
            raise ProtocolError("generate response ids are not unique")
        return SampleBatch(matrix=rows, ids=ids)

    def embed(self, items: Sequence[tuple[str, bytes]], embedder: str) -> list[Embedding]:
        """Embed raw content items via POST /v1/embed."""
        if not items:
            raise InputError("embed requires at least one item")
        body = canonical_body({
            "items": [{"id": item_id,
                       "content_b64": base64.b64encode(content).decode("ascii")}
                      for item_id, content in items],
            "embedder": embedder,
        })
        payload = self._request("POST", f"/{WIRE_VERSION}/embed", body)
        embeddings = payload.get("embeddings")
        dim = payload.get("dim")
        if not isinstance(embeddings, list) or dim is None:
            raise ProtocolError("embed response missing embeddings/dim")
        if len(embeddings) != len(items):
            raise ProtocolError(
                f"embedded {len(embeddings)} items, requested {len(items)}")
        out = []
        for i, rec in enumerate(embeddings):
            if not isinstance(rec, dict) or "id" not in rec or "values" not in rec:
                raise ProtocolError(f"embed record {i} malformed")
            vec = np.asarray(rec["values"], dtype=np.float64)
            if vec.ndim != 1 or vec.size != int(dim):
                raise ContractViolationError(
                    f"embed record {i} has dim {vec.size}, response says {dim}")
            out.append(Embedding(vec, id=str(rec["id"])))
        return out
