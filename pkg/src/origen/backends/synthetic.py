"""Synthetic conditioned distributions with exact oracles.

Two families: a finite discrete distribution (enumeration makes the true
expected distance computable exactly) and a directional mixture on the unit
sphere (Gaussian-perturbed unit directions, renormalized). Both support
per-prompt weight overrides so a "more specific" prompt can concentrate mass
near a chosen mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from ..errors import InputError
from ..geometry import (Embedding, Metric, SampleBatch, embedding_content_id,
                        resolve_metric)
from ..seeds import derive_seed, rng_from_seed
from .base import GeneratorBackend, check_count


def _normalize_weights(weights: Sequence[float], *,
                       allow_zero: bool = False) -> tuple[float, ...]:
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise InputError("at least one weight required")
    if not np.all(np.isfinite(w)):
        raise InputError("weights must be finite")
    if allow_zero:
        if np.any(w < 0) or w.sum() <= 0:
            raise InputError("override weights must be non-negative with positive sum")
    elif np.any(w <= 0):
        raise InputError("weights must be positive")
    return tuple(float(x) for x in w / w.sum())


def _resolve_prompt_weights(base: tuple[float, ...],
                            table: Mapping[str, tuple[float, ...]],
                            prompt: str) -> tuple[float, ...]:
    override = table.get(prompt)
    return override if override is not None else base


@dataclass(frozen=True)
class DiscreteConfig:
    """Finite support {(weight_k, embedding_k)} with optional prompt overrides."""

    support: tuple[tuple[float, Embedding], ...]
    prompt_table: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.support:
            raise InputError("discrete support must be nonempty")
        weights = _normalize_weights([w for w, _ in self.support])
        embeddings = tuple(e for _, e in self.support)
        dim = embeddings[0].dim
        for e in embeddings:
            if e.dim != dim:
                raise InputError("discrete support embeddings must share one dimension")
        object.__setattr__(self, "support",
                           tuple(zip(weights, embeddings)))
        table = {p: _normalize_weights(w, allow_zero=True)
                 for p, w in dict(self.prompt_table).items()}
        for p, w in table.items():
            if len(w) != len(weights):
                raise InputError(
                    f"prompt {p!r} override has {len(w)} weights, support has {len(weights)}")
        object.__setattr__(self, "prompt_table", table)

    @property
    def dim(self) -> int:
        return self.support[0][1].dim

    def weights_for(self, prompt: str) -> tuple[float, ...]:
        return _resolve_prompt_weights(tuple(w for w, _ in self.support),
                                       self.prompt_table, prompt)


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean_direction: np.ndarray
    concentration: float

    def __post_init__(self):
        if self.weight <= 0 or not np.isfinite(self.weight):
            raise InputError("component weight must be positive and finite")
        if self.concentration <= 0 or not np.isfinite(self.concentration):
            raise InputError("component concentration must be positive and finite")
        mu = np.asarray(self.mean_direction, dtype=np.float64)
        norm = float(np.linalg.norm(mu))
        if norm == 0.0 or not np.all(np.isfinite(mu)):
            raise InputError("mean direction must be nonzero and finite")
        mu = mu / norm
        mu.flags.writeable = False
        object.__setattr__(self, "mean_direction", mu)


@dataclass(frozen=True)
class MixtureConfig:
    """Directional mixture: sample = normalize(mu_k + z / sqrt(kappa_k))."""

    components: tuple[MixtureComponent, ...]
    prompt_table: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.components:
            raise InputError("mixture needs at least one component")
        weights = _normalize_weights([c.weight for c in self.components])
        comps = tuple(
            MixtureComponent(w, c.mean_direction, c.concentration)
            for w, c in zip(weights, self.components))
        dim = comps[0].mean_direction.size
        for c in comps:
            if c.mean_direction.size != dim:
                raise InputError("mixture components must share one dimension")
        object.__setattr__(self, "components", comps)
        table = {p: _normalize_weights(w, allow_zero=True)
                 for p, w in dict(self.prompt_table).items()}
        for p, w in table.items():
            if len(w) != len(comps):
                raise InputError(
                    f"prompt {p!r} override has {len(w)} weights, mixture has {len(comps)}")
        object.__setattr__(self, "prompt_table", table)

    @property
    def dim(self) -> int:
        return int(self.components[0].mean_direction.size)

    def weights_for(self, prompt: str) -> tuple[float, ...]:
        return _resolve_prompt_weights(tuple(c.weight for c in self.components),
                                       self.prompt_table, prompt)


def _pick(rng: np.random.Generator, cumulative: np.ndarray) -> int:
    # inverse-CDF draw; cheap and trivially replayable for occupancy checks
    return int(np.searchsorted(cumulative, rng.random(), side="right"))


class DiscreteBackend(GeneratorBackend):
    """Samples the finite support; enumeration makes its true expectations exact."""

    def __init__(self, config: DiscreteConfig, backend_id: str = "synthetic:discrete"):
        self.config = config
        self.id = backend_id
        self.embedding_dimension = config.dim
        self.supports_raw_content = False

    def generate(self, prompt: str, seed: int, count: int) -> SampleBatch:
        check_count(count)
        weights = np.asarray(self.config.weights_for(prompt))
        cumulative = np.cumsum(weights)
        cumulative[-1] = 1.0
        embeddings = [e for _, e in self.config.support]
        rows = np.empty((count, self.embedding_dimension))
        ids = []
        for i in range(count):
            rng = rng_from_seed(derive_seed("sample", prompt, seed, i))
            k = _pick(rng, cumulative)
            rows[i] = embeddings[k].values
            ids.append(embeddings[k].id)
        return SampleBatch(matrix=rows, ids=ids)


class MixtureBackend(GeneratorBackend):
    """Seed-stable directional mixture sampler."""

    def __init__(self, config: MixtureConfig, backend_id: str = "synthetic:mixture"):
        self.config = config
        self.id = backend_id
        self.embedding_dimension = config.dim
        self.supports_raw_content = False

    def _cumulative(self, prompt: str) -> np.ndarray:
        cumulative = np.cumsum(np.asarray(self.config.weights_for(prompt)))
        cumulative[-1] = 1.0
        return cumulative

    def generate(self, prompt: str, seed: int, count: int) -> SampleBatch:
        check_count(count)
        cumulative = self._cumulative(prompt)
        comps = self.config.components
        dim = self.embedding_dimension
        rows = np.empty((count, dim))
        ids = []
        for i in range(count):
            rng = rng_from_seed(derive_seed("sample", prompt, seed, i))
            k = _pick(rng, cumulative)
            c = comps[k]
            vec = c.mean_direction + rng.standard_normal(dim) / np.sqrt(c.concentration)
            vec /= np.linalg.norm(vec)
            rows[i] = vec
            ids.append(embedding_content_id(vec))
        return SampleBatch(matrix=rows, ids=ids)

    def component_assignments(self, prompt: str, seed: int, count: int) -> np.ndarray:
        """Replay which component each sample of generate() came from."""
        check_count(count)
        cumulative = self._cumulative(prompt)
        out = np.empty(count, dtype=np.int64)
        for i in range(count):
            rng = rng_from_seed(derive_seed("sample", prompt, seed, i))
            out[i] = _pick(rng, cumulative)
        return out


def exact_originality(reference, config: DiscreteConfig,
                      metric: Union[str, Metric], prompt: str | None = None) -> float:
    """True expected distance from the reference, by enumeration.

    This is the oracle that Monte Carlo estimates are validated against; the
    integral collapses to a finite weighted sum over the support.
    """
    m = resolve_metric(metric)
    ref = reference.embedding if hasattr(reference, "embedding") else reference
    weights = config.weights_for(prompt) if prompt is not None else tuple(
        w for w, _ in config.support)
    return float(sum(w * m.distance(ref, e)
                     for w, (_, e) in zip(weights, config.support)))


def exact_typical_originality(config: DiscreteConfig, metric: Union[str, Metric],
                              prompt: str | None = None) -> float:
    """True expected distance between two independent draws."""
    m = resolve_metric(metric)
    weights = config.weights_for(prompt) if prompt is not None else tuple(
        w for w, _ in config.support)
    embeddings = [e for _, e in config.support]
    total = 0.0
    for wa, ea in zip(weights, embeddings):
        for wb, eb in zip(weights, embeddings):
            total += wa * wb * m.distance(ea, eb)
    return float(total)


def two_point_uniform(dim: int = 2) -> DiscreteConfig:
    """Uniform {e0, e1}: the canonical 0.5-expectation oracle distribution."""
    a = np.zeros(dim)
    a[0] = 1.0
    b = np.zeros(dim)
    b[1] = 1.0
    return DiscreteConfig(support=((0.5, Embedding(a, id="pt:e0")),
                                   (0.5, Embedding(b, id="pt:e1"))))


def point_mass(values, *, point_id: str = "pt:mass") -> DiscreteConfig:
    return DiscreteConfig(support=((1.0, Embedding(values, id=point_id)),))
