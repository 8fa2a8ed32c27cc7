"""Matplotlib rendering for the report path.

Figures are companions to the delimited outputs, never a replacement: every
number plotted here comes from a CSV/JSON artifact written next to the
image. Fixed PNG metadata keeps reruns byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_PNG_METADATA = {"Software": "origen-report"}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def render_similarity_histogram(report, path: str | Path,
                                title: str | None = None) -> Path:
    """Overlaid density histograms of raw vs selected similarities."""
    edges = report.bin_edges
    widths = edges[1:] - edges[:-1]
    raw_total = max(1, report.raw_counts.sum())
    sel_total = max(1, report.selected_counts.sum())
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.bar(edges[:-1], report.raw_counts / (raw_total * widths), width=widths,
           align="edge", alpha=0.55, label=f"all samples (n={raw_total})",
           color="#3465a4")
    ax.bar(edges[:-1], report.selected_counts / (sel_total * widths), width=widths,
           align="edge", alpha=0.55, label=f"selected outputs (n={sel_total})",
           color="#f57900")
    ax.set_xlabel(f"cosine similarity to {report.reference_label}")
    ax.set_ylabel("density")
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, Path(path))


def render_originality_bars(rows: list[dict], path: str | Path,
                            reference_label: str = "reference") -> Path:
    """Per-prompt reference originality bars with typicality dots/whiskers.

    `rows`: dicts with prompt, ref_mean, ref_std, typ_mean, typ_std, ordered
    abstract to specific.
    """
    xs = range(len(rows))
    ref_means = [r["ref_mean"] for r in rows]
    ref_stds = [r["ref_std"] for r in rows]
    typ_means = [r["typ_mean"] for r in rows]
    typ_stds = [r["typ_std"] for r in rows]
    fig, ax = plt.subplots(figsize=(7.5, 4.2))
    ax.bar(xs, ref_means, yerr=ref_stds, capsize=4, color="#4e9a06",
           alpha=0.8, label=reference_label)
    ax.errorbar(xs, typ_means, yerr=typ_stds, fmt="o", color="#cc0000",
                linestyle=":", capsize=3, label="typical outputs")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([_shorten(r["prompt"]) for r in rows],
                       rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("estimated originality")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, Path(path))


def _shorten(text: str, limit: int = 28) -> str:
    return text if len(text) <= limit else text[:limit - 1] + "…"
