"""Output genericization: pick the minimum cross-mean-distance sample.

From each internally produced batch y_1..y_n, the selected output minimizes
(1/(n-1)) * sum_{j != i} d(y_i, y_j). Ties break to the lowest index: the
argmin itself is silent on ties, and lowest-index is deterministic and
auditable from the manifest. Also home to the similarity/suppression reports
computed over recorded runs.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .backends.base import GeneratorBackend
from .errors import BackendError, DomainError, InputError, StreamInterrupted
from .estimator import (Conditioning, Reference, originality_estimate)
from .geometry import (DistanceMatrix, Embedding, Metric, SampleBatch,
                       pairwise_distance_matrix, resolve_metric)
from .seeds import derive_seed
from .store.manifest import ManifestSlice, RunManifest

__all__ = [
    "GenericSelection", "SimilarityReport", "TopSimilarEntry", "TopSimilarResult",
    "GenericAnchor", "cross_mean_distances", "select_generic",
    "genericize_stream", "similarity_report", "top_similar",
    "most_generic_reference",
]


@dataclass(frozen=True)
class GenericSelection:
    """The argmin realization for one batch."""

    batch_index: int
    selected_index: int
    cross_mean_distance: float
    scores: np.ndarray
    selected: Embedding

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        s.flags.writeable = False
        object.__setattr__(self, "scores", s)

    @property
    def selected_id(self) -> str:
        return self.selected.id


def cross_mean_distances(matrix: DistanceMatrix) -> np.ndarray:
    """Row means excluding the diagonal; undefined below n = 2."""
    if matrix.n < 2:
        raise DomainError("cross-mean distance needs n >= 2 (self-exclusion)")
    return matrix.entries.sum(axis=1) / (matrix.n - 1)


def select_generic(batch: SampleBatch, metric: Union[str, Metric],
                   batch_index: int = 0) -> GenericSelection:
    """Select the most generic member of a batch (lowest-index tie-break)."""
    if len(batch) < 2:
        raise DomainError("genericization needs a batch of n >= 2")
    matrix = pairwise_distance_matrix(batch, metric)
    scores = cross_mean_distances(matrix)
    idx = int(np.argmin(scores))  # first minimum == lowest index on ties
    return GenericSelection(
        batch_index=batch_index,
        selected_index=idx,
        cross_mean_distance=float(scores[idx]),
        scores=scores,
        selected=batch[idx],
    )


def genericize_stream(conditioning: Conditioning, K: int, n: int,
                      metric: Union[str, Metric], backend: GeneratorBackend, *,
                      manifest: RunManifest | None = None,
                      parallelism: int = 1) -> list[GenericSelection]:
    """K independent batches of n, one selection each.

    All K*n drawn samples and all K selections are recorded; a backend
    failure mid-stream preserves the manifest written so far and reports how
    many batches completed.
    """
    if K < 1:
        raise InputError("K must be >= 1")
    if n < 2:
        raise DomainError("genericization needs n >= 2")
    if backend.id != conditioning.backend_id:
        raise InputError(
            f"conditioning names backend {conditioning.backend_id!r} "
            f"but got {backend.id!r}")
    met = resolve_metric(metric)
    prompt = conditioning.prompt
    seeds = [derive_seed(conditioning.seed_base, "genericize", b) for b in range(K)]

    def draw(idx_seed):
        idx, seed = idx_seed
        return idx, backend.generate(prompt, seed, n)

    selections: list[GenericSelection] = []

    def consume(idx: int, batch: SampleBatch) -> None:
        if manifest is not None:
            for i in range(len(batch)):
                manifest.append({
                    "type": "sample", "phase": "genericize", "prompt": prompt,
                    "batch": idx, "index": i, "id": batch.ids[i],
                    "values": batch.matrix[i],
                })
        sel = select_generic(batch, met, batch_index=idx)
        if manifest is not None:
            manifest.append({
                "type": "selection", "prompt": prompt, "batch": idx,
                "selected_index": sel.selected_index,
                "selected_id": sel.selected_id,
                "score": sel.cross_mean_distance,
                "scores": sel.scores,
            })
        selections.append(sel)

    try:
        if parallelism > 1 and K > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                for idx, batch in pool.map(draw, enumerate(seeds)):
                    consume(idx, batch)
        else:
            for idx_seed in enumerate(seeds):
                idx, batch = draw(idx_seed)
                consume(idx, batch)
    except BackendError as exc:
        raise StreamInterrupted(
            f"backend failed after {len(selections)} of {K} batches: {exc}",
            completed_batches=len(selections),
            batch_index=len(selections)) from exc
    except Exception as exc:
        raise StreamInterrupted(
            f"stream failed after {len(selections)} of {K} batches: {exc}",
            completed_batches=len(selections),
            batch_index=len(selections)) from exc
    return selections


@dataclass(frozen=True)
class SimilarityReport:
    """Similarity-to-reference distributions before and after genericization."""

    reference_label: str
    metric: str
    raw_similarities: np.ndarray
    selected_similarities: np.ndarray
    bin_edges: np.ndarray
    raw_counts: np.ndarray
    selected_counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "reference_label": self.reference_label,
            "metric": self.metric,
            "raw_similarities": self.raw_similarities,
            "selected_similarities": self.selected_similarities,
            "bin_edges": self.bin_edges,
            "raw_counts": self.raw_counts,
            "selected_counts": self.selected_counts,
        }


def _similarities(reference: Reference, matrix: np.ndarray, ids: list[str],
                  metric: Metric) -> np.ndarray:
    batch = SampleBatch(matrix=matrix, ids=ids)
    return metric.similarities_to(reference.embedding, batch)


def similarity_report(reference: Reference, manifest_slice: ManifestSlice,
                      metric: Union[str, Metric], bins: int = 50,
                      span: str = "observed") -> SimilarityReport:
    """Histogram all raw samples and all selections against one reference.

    Both series share bin edges: `span="observed"` covers the union of the
    two value ranges (the default), `span="full"` fixes [-1, 1]. Edges are
    part of the output so the figure is reproducible.
    """
    if bins < 1:
        raise InputError("bins must be >= 1")
    if span not in ("observed", "full"):
        raise InputError(f"unknown span {span!r} (expected observed or full)")
    if not manifest_slice.samples or not manifest_slice.selections:
        raise InputError("slice needs at least one sample and one selection")
    met = resolve_metric(metric)
    raw = _similarities(reference, manifest_slice.sample_matrix(),
                        manifest_slice.sample_ids(), met)
    selected_records = manifest_slice.selected_sample_records()
    sel = _similarities(
        reference,
        np.asarray([r["values"] for r in selected_records], dtype=np.float64),
        [r["id"] for r in selected_records], met)
    if span == "full":
        lo, hi = -1.0, 1.0
    else:
        lo = float(min(raw.min(), sel.min()))
        hi = float(max(raw.max(), sel.max()))
        if lo == hi:  # degenerate run: widen so edges stay strictly increasing
            lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    raw_counts, _ = np.histogram(raw, bins=edges)
    sel_counts, _ = np.histogram(sel, bins=edges)
    return SimilarityReport(
        reference_label=reference.label,
        metric=met.name,
        raw_similarities=raw,
        selected_similarities=sel,
        bin_edges=edges,
        raw_counts=raw_counts,
        selected_counts=sel_counts,
    )


@dataclass(frozen=True)
class TopSimilarEntry:
    sample_id: str
    similarity: float
    selected: bool


@dataclass(frozen=True)
class TopSimilarResult:
    entries: tuple[TopSimilarEntry, ...]
    truncated: bool

    def to_dict(self) -> dict:
        return {
            "entries": [{"sample_id": e.sample_id, "similarity": e.similarity,
                         "selected": e.selected} for e in self.entries],
            "truncated": self.truncated,
        }


def top_similar(reference: Reference, manifest_slice: ManifestSlice, k: int,
                metric: Union[str, Metric]) -> TopSimilarResult:
    """The k recorded samples most similar to the reference, descending.

    Ties break by sample id (lexicographic). Each entry is flagged when its
    content was output as a selection; asking for more than the slice holds
    returns everything, flagged truncated.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if not manifest_slice.samples:
        raise InputError("slice contains no sample records")
    met = resolve_metric(metric)
    sims = _similarities(reference, manifest_slice.sample_matrix(),
                         manifest_slice.sample_ids(), met)
    selected_ids = manifest_slice.selected_ids()
    order = sorted(range(len(sims)),
                   key=lambda i: (-sims[i], manifest_slice.samples[i]["id"]))
    truncated = k > len(order)
    chosen = order if truncated else order[:k]
    entries = tuple(
        TopSimilarEntry(
            sample_id=manifest_slice.samples[i]["id"],
            similarity=float(sims[i]),
            selected=manifest_slice.samples[i]["id"] in selected_ids,
        ) for i in chosen)
    return TopSimilarResult(entries=entries, truncated=truncated)


@dataclass(frozen=True)
class GenericAnchor:
    """The selection with the lowest estimated originality of its own."""

    sample_id: str
    selection_index: int
    embedding: Embedding
    estimate_value: float


def most_generic_reference(selections: list[GenericSelection],
                           conditioning: Conditioning, n: int,
                           metric: Union[str, Metric],
                           backend: GeneratorBackend, *,
                           manifest: RunManifest | None = None) -> GenericAnchor:
    """Among selected samples, the one whose fresh-batch estimate is lowest.

    Re-estimates every selection against its own fresh batch of n samples
    (seed lane "anchor"), so the anchor is conditioning-relative and never
    cached across prompts.
    """
    if not selections:
        raise InputError("no selections to rank")
    met = resolve_metric(metric)
    best: tuple[float, int] | None = None
    for j, sel in enumerate(selections):
        seed = derive_seed(conditioning.seed_base, "anchor", j)
        batch = backend.generate(conditioning.prompt, seed, n)
        est = originality_estimate(
            Reference(sel.selected, label=f"selection-{j}"), batch, met, conditioning)
        if manifest is not None:
            for i in range(len(batch)):
                manifest.append({
                    "type": "sample", "phase": "anchor",
                    "prompt": conditioning.prompt, "batch": j, "index": i,
                    "id": batch.ids[i], "values": batch.matrix[i],
                })
            manifest.append({
                "type": "estimate", "phase": "anchor",
                "prompt": conditioning.prompt, "batch": j, "metric": met.name,
                "n": est.n, "reference_id": sel.selected_id,
                "value": est.value, "distances": est.per_sample_distances,
            })
        if best is None or est.value < best[0]:
            best = (est.value, j)
    value, j = best
    anchor = GenericAnchor(
        sample_id=selections[j].selected_id,
        selection_index=j,
        embedding=selections[j].selected,
        estimate_value=value,
    )
    if manifest is not None:
        manifest.append({
            "type": "anchor", "prompt": conditioning.prompt,
            "sample_id": anchor.sample_id, "selection_index": j,
            "value": value,
        })
    return anchor
