"""Image generator adapters.

The procedural generator is a deterministic stand-in that needs no weights:
same (prompt, seed) gives bit-identical pixels, which makes the conformance
and integration suites hermetic. The diffusers adapter wires a real
text-to-image model when its stack is installed; loading failures surface as
503s with the import diagnostic instead of crashing the service.
"""

from __future__ import annotations

from PIL import Image
import numpy as np

from .seeds import derive_seed, rng_from_seed


class ModelLoadError(RuntimeError):
    """The configured model cannot be loaded in this environment."""


class ProceduralGenerator:
    """Deterministic 64x64 compositions keyed by (prompt, seed)."""

    size = 64
    model_string = "procedural-v1; size=64; det_tol=0"

    def generate_images(self, prompt: str, seeds: list[int]) -> list[Image.Image]:
        palette_rng = rng_from_seed(derive_seed("palette", prompt))
        palette = palette_rng.integers(30, 226, size=(6, 3))
        return [self._compose(palette, seed) for seed in seeds]

    def _compose(self, palette, seed: int) -> Image.Image:
        rng = rng_from_seed(seed)
        size = self.size
        top, bottom = palette[rng.integers(0, len(palette))], palette[
            rng.integers(0, len(palette))]
        ramp = np.linspace(0.0, 1.0, size)[:, None, None]
        gradient = (1 - ramp) * top[None, None, :] + ramp * bottom[None, None, :]
        canvas = np.broadcast_to(gradient, (size, size, 3)).copy()
        yy, xx = np.mgrid[0:size, 0:size]
        for _ in range(int(rng.integers(2, 5))):
            cx, cy = rng.integers(8, size - 8, size=2)
            radius = int(rng.integers(4, 18))
            color = palette[rng.integers(0, len(palette))]
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2
            canvas[mask] = 0.6 * canvas[mask] + 0.4 * color[None, :]
        return Image.fromarray(canvas.astype(np.uint8), mode="RGB")


class DiffusersGenerator:
    """Real text-to-image model behind the same adapter surface.

    Generation settings are frozen here and recorded in the model string;
    per-image seeds feed the framework generator. GPU/framework jitter makes
    repeats match only within 1e-6, which the model string declares.
    """

    steps = 30
    guidance = 5.0
    size = 1024

    def __init__(self, model_id: str, device: str = "cpu"):
        self.model_id = model_id
        self.device = device
        self._pipeline = None
        self.model_string = (f"{model_id}; steps={self.steps}; "
                             f"guidance={self.guidance}; size={self.size}; "
                             f"det_tol=1e-06")

    def _load(self):
        if self._pipeline is None:
            try:
                import torch
                from diffusers import AutoPipelineForText2Image
            except ImportError as exc:
                raise ModelLoadError(
                    f"diffusers stack unavailable for {self.model_id}: {exc}")
            try:
                self._pipeline = AutoPipelineForText2Image.from_pretrained(
                    self.model_id).to(self.device)
                self._torch = torch
            except Exception as exc:
                raise ModelLoadError(f"cannot load {self.model_id}: {exc}")
        return self._pipeline

    def generate_images(self, prompt: str, seeds: list[int]) -> list[Image.Image]:
        pipeline = self._load()
        images = []
        for seed in seeds:
            generator = self._torch.Generator(device=self.device).manual_seed(
                seed % (2 ** 63))
            out = pipeline(prompt=prompt, num_inference_steps=self.steps,
                           guidance_scale=self.guidance, generator=generator,
                           height=self.size, width=self.size)
            images.append(out.images[0])
        return images


GENERATORS = {
    "procedural": lambda device: ProceduralGenerator(),
    "sdxl": lambda device: DiffusersGenerator(
        "stabilityai/stable-diffusion-xl-base-1.0", device),
}


def build_generator(model: str, device: str):
    if model in GENERATORS:
        return GENERATORS[model](device)
    # any other name is treated as a diffusers model id
    return DiffusersGenerator(model, device)
