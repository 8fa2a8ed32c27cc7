"""Report rendering: figures alongside the delimited exports."""

from .figures import render_originality_bars, render_similarity_histogram

__all__ = ["render_originality_bars", "render_similarity_histogram"]
