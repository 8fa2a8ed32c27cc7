"""Export formats for manifest slices and report objects.

JSONL exports round-trip losslessly (Python's json preserves float64 via
shortest-round-trip repr). CSV schemas are fixed and documented per type so
downstream plotting never guesses column order.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

from ..errors import InputError
from .manifest import canonical_json, jsonable

SIMILARITY_CSV_HEADER = ["series", "bin_low", "bin_high", "count"]
TOP_SIMILAR_CSV_HEADER = ["rank", "sample_id", "similarity", "selected"]


def export_records(records: list[dict], path: str | Path, fmt: str) -> Path:
    """Write raw manifest records as jsonl or csv; unknown format is an error."""
    if not records:
        raise InputError("nothing to export: empty record slice")
    path = Path(path)
    if fmt == "jsonl":
        with path.open("w", encoding="ascii") as fh:
            for rec in records:
                fh.write(canonical_json(jsonable(rec)) + "\n")
    elif fmt == "csv":
        fields = sorted({k for rec in records for k in rec})
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            for rec in records:
                writer.writerow([_cell(rec.get(k)) for k in fields])
    else:
        raise InputError(f"unknown export format {fmt!r} (expected csv or jsonl)")
    return path


def _cell(value):
    if isinstance(value, (list, tuple, dict)):
        return canonical_json(jsonable(value))
    return value


def import_records(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def similarity_report_rows(report) -> list[list]:
    rows = []
    edges = report.bin_edges
    for series, counts in (("raw", report.raw_counts),
                           ("selected", report.selected_counts)):
        for i, count in enumerate(counts):
            rows.append([series, float(edges[i]), float(edges[i + 1]), int(count)])
    return rows


def write_similarity_csv(report, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SIMILARITY_CSV_HEADER)
        writer.writerows(similarity_report_rows(report))
    return path


def write_similarity_json(report, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(canonical_json(jsonable(report.to_dict())) + "\n", encoding="ascii")
    return path


def write_top_similar_csv(result, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TOP_SIMILAR_CSV_HEADER)
        for rank, entry in enumerate(result.entries, start=1):
            writer.writerow([rank, entry.sample_id,
                             repr(entry.similarity), str(entry.selected).lower()])
    return path


def write_top_similar_json(result, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(canonical_json(jsonable(result.to_dict())) + "\n", encoding="ascii")
    return path


def write_rows_csv(header: Iterable[str], rows: Iterable[Iterable], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        writer.writerows([list(r) for r in rows])
    return path
