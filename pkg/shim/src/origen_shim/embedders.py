"""Image feature extractors.

Two weight-free embedders back the hermetic tests: pixel statistics on an
8x8 grayscale thumbnail (dim 64) and a coarse RGB histogram (dim 48). The
CLIP/DINOv2 adapters load lazily through transformers and report 503 when
the stack or weights are missing.
"""

from __future__ import annotations

from PIL import Image
import numpy as np

from .generators import ModelLoadError


class PixelStatsEmbedder:
    id = "toy-pixels"
    dim = 64

    def embed(self, images: list[Image.Image]) -> np.ndarray:
        out = np.empty((len(images), self.dim))
        for i, img in enumerate(images):
            gray = img.convert("L").resize((8, 8), Image.BILINEAR)
            # offset keeps all-black frames away from the zero vector
            out[i] = np.asarray(gray, dtype=np.float64).ravel() / 255.0 + 0.01
        return out


class ColorHistogramEmbedder:
    id = "toy-hist"
    dim = 48

    def embed(self, images: list[Image.Image]) -> np.ndarray:
        out = np.empty((len(images), self.dim))
        for i, img in enumerate(images):
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
            hists = [np.histogram(rgb[..., c].ravel(), bins=16,
                                  range=(0, 255))[0] for c in range(3)]
            out[i] = np.concatenate(hists) / rgb[..., 0].size + 0.001
        return out


class HFVisionEmbedder:
    """CLIP / DINOv2 pooled features via transformers."""

    def __init__(self, embedder_id: str, model_id: str, dim: int, device: str):
        self.id = embedder_id
        self.model_id = model_id
        self.dim = dim
        self.device = device
        self._model = None

    def _load(self):
        if self._model is None:
            try:
                from transformers import AutoImageProcessor, AutoModel
            except ImportError as exc:
                raise ModelLoadError(f"transformers unavailable for {self.id}: {exc}")
            try:
                self._processor = AutoImageProcessor.from_pretrained(self.model_id)
                self._model = AutoModel.from_pretrained(self.model_id).to(self.device)
            except Exception as exc:
                raise ModelLoadError(f"cannot load {self.model_id}: {exc}")

    def embed(self, images: list[Image.Image]) -> np.ndarray:
        self._load()
        import torch
        inputs = self._processor(images=[img.convert("RGB") for img in images],
                                 return_tensors="pt").to(self.device)
        with torch.no_grad():
            if hasattr(self._model, "get_image_features"):
                feats = self._model.get_image_features(**inputs)
            else:
                feats = self._model(**inputs).pooler_output
        return feats.cpu().numpy().astype(np.float64)


EMBEDDERS = {
    "toy-pixels": lambda device: PixelStatsEmbedder(),
    "toy-hist": lambda device: ColorHistogramEmbedder(),
    "clip": lambda device: HFVisionEmbedder(
        "clip", "openai/clip-vit-base-patch32", 512, device),
    "dinov2": lambda device: HFVisionEmbedder(
        "dinov2", "facebook/dinov2-base", 768, device),
}


def build_embedder(name: str, device: str):
    try:
        return EMBEDDERS[name](device)
    except KeyError:
        raise ValueError(f"unknown embedder {name!r}; "
                         f"available: {sorted(EMBEDDERS)}") from None
