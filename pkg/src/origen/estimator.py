"""Monte Carlo originality estimation.

The estimate of a creation c under conditioning x is the sample mean of
d(c, y_i) over n backend draws: plain Monte Carlo, no variance reduction.
Repeated estimates (m batches of n) give the mean/std pairs behind the
summary bar reports; dispersion over estimates uses the population std,
recorded as such in every manifest summary.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .backends.base import GeneratorBackend
from .errors import BackendError, DomainError, InputError
from .geometry import Embedding, Metric, SampleBatch, resolve_metric
from .seeds import derive_seed
from .store.manifest import RunManifest

__all__ = [
    "Reference", "Conditioning", "OriginalityEstimate", "EstimateSummary",
    "originality_estimate", "repeated_estimates", "typicality_summary",
    "standard_error", "summary_standard_error", "combined_standard_error",
]


@dataclass(frozen=True)
class Reference:
    """The fixed creation whose originality is being quantified."""

    embedding: Embedding
    label: str


@dataclass(frozen=True)
class Conditioning:
    """Prompt + backend + seed lane that fix the sampled distribution."""

    prompt: str
    backend_id: str
    seed_base: int

    def __post_init__(self):
        if not self.prompt:
            raise InputError("conditioning prompt must be non-empty")
        if self.seed_base < 0:
            raise InputError("seed base must be unsigned")


@dataclass(frozen=True)
class OriginalityEstimate:
    """One realization of the n-sample mean-distance estimate."""

    value: float
    n: int
    per_sample_distances: np.ndarray
    metric: str
    conditioning: Conditioning | None = None

    def __post_init__(self):
        d = np.asarray(self.per_sample_distances, dtype=np.float64)
        d.flags.writeable = False
        object.__setattr__(self, "per_sample_distances", d)


@dataclass(frozen=True)
class EstimateSummary:
    """m repeated estimates plus their mean and population std."""

    estimates: tuple[OriginalityEstimate, ...]
    mean: float
    std: float
    degenerate: bool = False

    @property
    def m(self) -> int:
        return len(self.estimates)

    def values(self) -> np.ndarray:
        return np.asarray([e.value for e in self.estimates])


def originality_estimate(reference: Reference, samples: SampleBatch,
                         metric: Union[str, Metric],
                         conditioning: Conditioning | None = None) -> OriginalityEstimate:
    """Mean distance from the reference to every sample in the batch."""
    if len(samples) == 0:
        raise InputError("cannot estimate over an empty batch")
    m = resolve_metric(metric)
    distances = m.distances_to(reference.embedding, samples)
    return OriginalityEstimate(
        value=float(np.mean(distances)),
        n=len(samples),
        per_sample_distances=distances,
        metric=m.name,
        conditioning=conditioning,
    )


def standard_error(estimate: OriginalityEstimate) -> float:
    """Sample std of the per-sample distances over sqrt(n); needs n >= 2."""
    if estimate.n < 2:
        raise DomainError("standard error undefined for n < 2")
    return float(np.std(estimate.per_sample_distances, ddof=1) / math.sqrt(estimate.n))


def summary_standard_error(summary: EstimateSummary) -> float:
    """Std of the summary mean: population std of estimates over sqrt(m)."""
    return float(summary.std / math.sqrt(summary.m))


def combined_standard_error(a: EstimateSummary, b: EstimateSummary) -> float:
    return math.hypot(summary_standard_error(a), summary_standard_error(b))


def _summarize(estimates: list[OriginalityEstimate], n: int) -> EstimateSummary:
    values = np.asarray([e.value for e in estimates])
    return EstimateSummary(
        estimates=tuple(estimates),
        mean=float(np.mean(values)),
        std=float(np.std(values)),  # population convention
        degenerate=(len(estimates) == 1 or n == 1),
    )


def _record_batch(manifest: RunManifest | None, batch: SampleBatch, *,
                  phase: str, prompt: str, batch_index: int) -> None:
    if manifest is None:
        return
    for i in range(len(batch)):
        manifest.append({
            "type": "sample",
            "phase": phase,
            "prompt": prompt,
            "batch": batch_index,
            "index": i,
            "id": batch.ids[i],
            "values": batch.matrix[i],
        })


def _record_estimate(manifest: RunManifest | None, est: OriginalityEstimate, *,
                     phase: str, prompt: str, batch_index: int,
                     reference_id: str | None) -> None:
    if manifest is None:
        return
    manifest.append({
        "type": "estimate",
        "phase": phase,
        "prompt": prompt,
        "batch": batch_index,
        "metric": est.metric,
        "n": est.n,
        "reference_id": reference_id,
        "value": est.value,
        "distances": est.per_sample_distances,
    })


def _record_summary(manifest: RunManifest | None, summary: EstimateSummary, *,
                    phase: str, prompt: str, metric: str, n: int,
                    reference_id: str | None) -> None:
    if manifest is None:
        return
    manifest.append({
        "type": "summary",
        "phase": phase,
        "prompt": prompt,
        "metric": metric,
        "n": n,
        "m": summary.m,
        "mean": summary.mean,
        "std": summary.std,
        "std_convention": "population",
        "degenerate": summary.degenerate,
        "reference_id": reference_id,
    })


def _draw_batches(backend: GeneratorBackend, prompt: str, seeds: list[int],
                  n: int, parallelism: int) -> list[SampleBatch]:
    """Draw one batch per seed; parallel draws still aggregate in seed order."""

    def draw(idx_seed):
        idx, seed = idx_seed
        try:
            return backend.generate(prompt, seed, n)
        except BackendError:
            raise
        except Exception as exc:
            raise BackendError(f"backend {backend.id} failed: {exc}",
                               batch_index=idx) from exc

    work = list(enumerate(seeds))
    if parallelism > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(draw, work))
    return [draw(w) for w in work]


def _check_backend(conditioning: Conditioning, backend: GeneratorBackend) -> None:
    if backend.id != conditioning.backend_id:
        raise InputError(
            f"conditioning names backend {conditioning.backend_id!r} "
            f"but got {backend.id!r}")


def repeated_estimates(reference: Reference, conditioning: Conditioning,
                       n: int, m: int, metric: Union[str, Metric],
                       backend: GeneratorBackend, *,
                       manifest: RunManifest | None = None,
                       parallelism: int = 1,
                       phase: str = "estimate") -> EstimateSummary:
    """m independent n-sample estimates of the reference's originality.

    Batch seeds derive from (seed-base, phase, batch-index) and sample seeds
    from (prompt, batch-seed, sample-index), so runs are reproducible and
    independent of scheduling order.
    """
    if n < 1 or m < 1:
        raise InputError("n and m must be >= 1")
    _check_backend(conditioning, backend)
    met = resolve_metric(metric)
    seeds = [derive_seed(conditioning.seed_base, phase, b) for b in range(m)]
    batches = _draw_batches(backend, conditioning.prompt, seeds, n, parallelism)
    estimates = []
    for b, batch in enumerate(batches):
        _record_batch(manifest, batch, phase=phase,
                      prompt=conditioning.prompt, batch_index=b)
        est = originality_estimate(reference, batch, met, conditioning)
        _record_estimate(manifest, est, phase=phase, prompt=conditioning.prompt,
                         batch_index=b, reference_id=reference.embedding.id)
        estimates.append(est)
    summary = _summarize(estimates, n)
    _record_summary(manifest, summary, phase=phase, prompt=conditioning.prompt,
                    metric=met.name, n=n, reference_id=reference.embedding.id)
    return summary


def typicality_summary(conditioning: Conditioning, n: int, m: int,
                       metric: Union[str, Metric], backend: GeneratorBackend, *,
                       manifest: RunManifest | None = None,
                       parallelism: int = 1) -> EstimateSummary:
    """Originality statistics of the distribution's own outputs.

    Each of m fresh probe samples is estimated against its own independent
    batch of n samples; the summary is the baseline the reference is compared
    to. (The probe is not excluded from anything: batches are independent.)
    """
    if n < 1 or m < 1:
        raise InputError("n and m must be >= 1")
    _check_backend(conditioning, backend)
    met = resolve_metric(metric)
    prompt = conditioning.prompt
    probe_seeds = [derive_seed(conditioning.seed_base, "probe", j) for j in range(m)]
    batch_seeds = [derive_seed(conditioning.seed_base, "probe-batch", j) for j in range(m)]
    probes = _draw_batches(backend, prompt, probe_seeds, 1, parallelism)
    batches = _draw_batches(backend, prompt, batch_seeds, n, parallelism)
    estimates = []
    for j, (probe_batch, batch) in enumerate(zip(probes, batches)):
        probe = probe_batch[0]
        if manifest is not None:
            manifest.append({
                "type": "sample", "phase": "typicality-probe", "prompt": prompt,
                "batch": j, "index": 0, "id": probe.id, "values": probe.values,
            })
        _record_batch(manifest, batch, phase="typicality", prompt=prompt, batch_index=j)
        est = originality_estimate(Reference(probe, label=f"probe-{j}"), batch,
                                   met, conditioning)
        _record_estimate(manifest, est, phase="typicality", prompt=prompt,
                         batch_index=j, reference_id=probe.id)
        estimates.append(est)
    summary = _summarize(estimates, n)
    _record_summary(manifest, summary, phase="typicality", prompt=prompt,
                    metric=met.name, n=n, reference_id=None)
    return summary
