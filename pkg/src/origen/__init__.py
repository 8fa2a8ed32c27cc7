"""origen: originality estimation and output genericization.

Estimates how original a candidate creation is relative to a conditioned
generative distribution (mean embedding distance over drawn samples), and
genericizes model outputs by selecting the minimum cross-mean-distance
member of an internally produced batch. Backends are black boxes: synthetic
distributions with exact oracles, embedding corpora, or an HTTP service.
"""

from .errors import (BackendError, ContractViolationError, DomainError,
                     FormatError, InputError, OrigenError, ProtocolError,
                     StateError, StorageError, StreamInterrupted,
                     TransportError)
from .estimator import (Conditioning, EstimateSummary, OriginalityEstimate,
                        Reference, originality_estimate, repeated_estimates,
                        standard_error, typicality_summary)
from .genericize import (GenericAnchor, GenericSelection, SimilarityReport,
                         TopSimilarResult, cross_mean_distances,
                         genericize_stream, most_generic_reference,
                         select_generic, similarity_report, top_similar)
from .geometry import (CosineDistance, DistanceMatrix, Embedding, Metric,
                       SampleBatch, cosine_distance, cosine_similarity,
                       normalize, pairwise_distance_matrix, resolve_metric)

__version__ = "0.1.0"

__all__ = [
    "BackendError", "ContractViolationError", "DomainError", "FormatError",
    "InputError", "OrigenError", "ProtocolError", "StateError", "StorageError",
    "StreamInterrupted", "TransportError",
    "Conditioning", "EstimateSummary", "OriginalityEstimate", "Reference",
    "originality_estimate", "repeated_estimates", "standard_error",
    "typicality_summary",
    "GenericAnchor", "GenericSelection", "SimilarityReport", "TopSimilarResult",
    "cross_mean_distances", "genericize_stream", "most_generic_reference",
    "select_generic", "similarity_report", "top_similar",
    "CosineDistance", "DistanceMatrix", "Embedding", "Metric", "SampleBatch",
    "cosine_distance", "cosine_similarity", "normalize",
    "pairwise_distance_matrix", "resolve_metric",
    "__version__",
]
