"""Sample sources: synthetic (exact-oracle), corpus replay, and HTTP."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError, InputError
from ..geometry import Embedding
from .base import BackendRegistry, GeneratorBackend
from .corpus import CorpusBackend, load_embedding_file, write_embedding_file
from .http import HttpBackend
from .synthetic import (DiscreteBackend, DiscreteConfig, MixtureBackend,
                        MixtureComponent, MixtureConfig, exact_originality,
                        exact_typical_originality, point_mass, two_point_uniform)

__all__ = [
    "BackendRegistry", "GeneratorBackend",
    "CorpusBackend", "load_embedding_file", "write_embedding_file",
    "HttpBackend",
    "DiscreteBackend", "DiscreteConfig", "MixtureBackend", "MixtureComponent",
    "MixtureConfig", "exact_originality", "exact_typical_originality",
    "point_mass", "two_point_uniform",
    "load_synthetic_config", "build_synthetic_backend",
]


def load_synthetic_config(path: str | Path) -> DiscreteConfig | MixtureConfig:
    """Read a synthetic backend config file (kind: discrete | mixture)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}")
    kind = doc.get("kind")
    prompt_table = {str(p): tuple(float(x) for x in w)
                    for p, w in doc.get("prompt_table", {}).items()}
    if kind == "discrete":
        support = []
        for i, entry in enumerate(doc.get("support", [])):
            emb = Embedding(np.asarray(entry["values"], dtype=np.float64),
                            id=str(entry.get("id", "")))
            support.append((float(entry.get("weight", 1.0)), emb))
        if not support:
            raise FormatError(f"{path}: discrete config needs a nonempty support")
        return DiscreteConfig(support=tuple(support), prompt_table=prompt_table)
    if kind == "mixture":
        comps = []
        for entry in doc.get("components", []):
            comps.append(MixtureComponent(
                weight=float(entry.get("weight", 1.0)),
                mean_direction=np.asarray(entry["mean_direction"], dtype=np.float64),
                concentration=float(entry["concentration"])))
        if not comps:
            raise FormatError(f"{path}: mixture config needs at least one component")
        return MixtureConfig(components=tuple(comps), prompt_table=prompt_table)
    raise FormatError(f"{path}: unknown synthetic config kind {kind!r}")


def build_synthetic_backend(config: DiscreteConfig | MixtureConfig) -> GeneratorBackend:
    if isinstance(config, DiscreteConfig):
        return DiscreteBackend(config)
    if isinstance(config, MixtureConfig):
        return MixtureBackend(config)
    raise InputError(f"unsupported synthetic config type {type(config).__name__}")
