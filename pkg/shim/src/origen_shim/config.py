"""Shim configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ShimConfig:
    """Which generator and embedders the service exposes.

    The first embedder is the default used by /v1/generate responses.
    Background removal is a service-wide toggle applied uniformly to every
    generated image and recorded in the model string.
    """

    model: str = "procedural"
    embedders: tuple[str, ...] = ("toy-pixels",)
    device: str = "cpu"
    background_removal: bool = False
    port: int = 8711

    def __post_init__(self):
        if not self.embedders:
            raise ValueError("at least one embedder must be configured")
        if not (0 < self.port < 65536):
            raise ValueError(f"invalid port {self.port}")
        object.__setattr__(self, "embedders", tuple(self.embedders))
