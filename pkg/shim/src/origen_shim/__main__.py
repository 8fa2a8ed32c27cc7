"""Run the shim under uvicorn."""

from __future__ import annotations

import argparse

from .config import ShimConfig
from .service import create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="origen-shim")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8711)
    parser.add_argument("--model", default="procedural",
                        help="procedural, sdxl, or a diffusers model id")
    parser.add_argument("--embedder", action="append", dest="embedders",
                        help="embedder to expose (repeatable; first is default)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--background-removal", action="store_true")
    args = parser.parse_args(argv)
    config = ShimConfig(
        model=args.model,
        embedders=tuple(args.embedders or ("toy-pixels",)),
        device=args.device,
        background_removal=args.background_removal,
        port=args.port,
    )
    import uvicorn
    uvicorn.run(create_app(config), host=args.host, port=config.port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
