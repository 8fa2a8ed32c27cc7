"""Run manifests, the embedding cache, and export formats."""

from .cache import EmbeddingCache, content_hash
from .export import (SIMILARITY_CSV_HEADER, TOP_SIMILAR_CSV_HEADER,
                     export_records, import_records, write_rows_csv,
                     write_similarity_csv, write_similarity_json,
                     write_top_similar_csv, write_top_similar_json)
from .manifest import (HASH_ALG, LoadedManifest, ManifestSlice, RunManifest,
                       canonical_json, jsonable, load_manifest)

__all__ = [
    "EmbeddingCache", "content_hash",
    "SIMILARITY_CSV_HEADER", "TOP_SIMILAR_CSV_HEADER",
    "export_records", "import_records", "write_rows_csv",
    "write_similarity_csv", "write_similarity_json",
    "write_top_similar_csv", "write_top_similar_json",
    "HASH_ALG", "LoadedManifest", "ManifestSlice", "RunManifest",
    "canonical_json", "jsonable", "load_manifest",
]
