"""FastAPI service implementing the v1 generate/embed/health protocol.

The shim never computes distances or selections; it only turns prompts into
embeddings (and optionally content) so all estimator math stays in one
place on the client side.
"""

from __future__ import annotations

import base64
import hashlib
import io
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, Field

from .config import ShimConfig
from .embedders import build_embedder
from .generators import ModelLoadError, build_generator
from .seeds import derive_seed

MAX_COUNT = 4096


class GenerateRequest(BaseModel):
    prompt: str
    seed: int = Field(ge=0, lt=2 ** 64)
    count: int = Field(ge=0, lt=2 ** 32)
    return_content: bool


class EmbedItem(BaseModel):
    id: str = Field(min_length=1)
    content_b64: str


class EmbedRequest(BaseModel):
    items: list[EmbedItem] = Field(min_length=1)
    embedder: str = Field(min_length=1)


def _content_id(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()[:32]


def _png_bytes(image: Image.Image) -> bytes:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def create_app(config: Optional[ShimConfig] = None) -> FastAPI:
    config = config or ShimConfig()
    app = FastAPI(title="origen-shim", docs_url=None, redoc_url=None)
    generator = build_generator(config.model, config.device)
    embedders = {name: build_embedder(name, config.device)
                 for name in config.embedders}
    default_embedder = embedders[config.embedders[0]]
    model_string = (f"{generator.model_string}; "
                    f"bg={'on' if config.background_removal else 'off'}")
    remover = {"fn": None}

    def postprocess(images):
        if not config.background_removal:
            return images
        if remover["fn"] is None:
            try:
                from rembg import remove
            except ImportError as exc:
                raise ModelLoadError(f"background removal unavailable: {exc}")
            remover["fn"] = remove
        return [remover["fn"](img) for img in images]

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": "malformed request",
                                     "errors": exc.errors()})

    @app.exception_handler(ModelLoadError)
    async def model_unavailable(request: Request, exc: ModelLoadError):
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "dim": default_embedder.dim,
                "model": model_string, "embedders": list(embedders)}

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        if req.count < 1:
            return JSONResponse(status_code=400,
                                content={"detail": "count must be >= 1"})
        if req.count > MAX_COUNT:
            return JSONResponse(status_code=400,
                                content={"detail": f"count exceeds {MAX_COUNT}"})
        seeds = [derive_seed("image", req.prompt, req.seed, i)
                 for i in range(req.count)]
        images = postprocess(generator.generate_images(req.prompt, seeds))
        pngs = [_png_bytes(img) for img in images]
        vectors = default_embedder.embed(images)
        items = []
        for png, vec in zip(pngs, vectors):
            items.append({
                "id": _content_id(png),
                "embedding": [float(x) for x in vec],
                "content_b64": (base64.b64encode(png).decode("ascii")
                                if req.return_content else None),
            })
        return {"items": items, "dim": default_embedder.dim, "model": model_string}

    @app.post("/v1/embed")
    def embed(req: EmbedRequest):
        if req.embedder not in embedders:
            return JSONResponse(
                status_code=400,
                content={"detail": f"unknown embedder {req.embedder!r}; "
                                   f"available: {sorted(embedders)}"})
        embedder = embedders[req.embedder]
        images, failing = [], []
        for item in req.items:
            try:
                data = base64.b64decode(item.content_b64, validate=True)
                images.append(Image.open(io.BytesIO(data)))
                images[-1].load()
            except (ValueError, OSError, UnidentifiedImageError):
                failing.append(item.id)
        if failing:
            return JSONResponse(status_code=422,
                                content={"detail": "undecodable content",
                                         "ids": failing})
        vectors = embedder.embed(images)
        return {
            "embeddings": [{"id": item.id, "values": [float(x) for x in vec]}
                           for item, vec in zip(req.items, vectors)],
            "dim": embedder.dim,
            "embedder": req.embedder,
        }

    return app
