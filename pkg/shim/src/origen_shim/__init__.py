"""origen-shim: v1 wire-protocol service for image generation and embedding."""

from .config import ShimConfig
from .service import create_app

__version__ = "0.1.0"

__all__ = ["ShimConfig", "create_app", "__version__"]
