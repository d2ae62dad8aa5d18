"""loradex: behavioral indexing and text retrieval of image-model adapters.

An adapter's observable effect is summarized from embedding differences
between its generations and the vanilla base model's, under identical
prompts and seeds. Those summaries (semantic direction, strength,
consistency) form an index that free-text queries search in milliseconds.
"""

from .analytics import (
    CountDistribution,
    DiversityMetrics,
    EvalScoreRecord,
    ScaleCurve,
    ScreeningReport,
    TopkTable,
    diversity_metrics,
    normalize_scores,
    retrieval_counts,
    scale_curve,
    screening_report,
    topk_table,
)
from .errors import (
    CacheMissError,
    CapabilityError,
    ChecksumError,
    DataError,
    DegenerateInputError,
    DimensionMismatchError,
    DuplicateKeyError,
    EncoderMismatchError,
    FormatError,
    InsufficientSamplesError,
    LoradexError,
    MissingBaseError,
    ProviderError,
    UsageError,
)
from .indexer import (
    DiffCorpus,
    IndexBuildConfig,
    build_index,
    compute_diffs,
    consistency,
    consistency_stats,
    semantic_direction,
    strength,
)
from .providers import (
    EmbeddingProvider,
    FileBackedProvider,
    ProbeResult,
    RemoteProvider,
    probe,
    provider_from_spec,
)
from .query import (
    DEFAULT_TAU_C,
    DEFAULT_TAU_S,
    DEFAULT_TOP_K,
    FilterConfig,
    QueryVariant,
    QueryVector,
    RetrievalResult,
    build_query_vector,
    filter_and_truncate,
    rank,
    retrieve,
)
from .store import (
    DEFAULT_DIM,
    DEFAULT_ENCODER_TAG,
    CorpusIndex,
    EmbeddingCorpus,
    GenerationRecord,
    LoraSignature,
    PromptEntry,
    PromptRole,
    PromptSet,
    ingest_records,
    load_corpus,
    load_index,
    load_prompt_set,
    open_sidecar,
    read_records,
    save_index,
    save_prompt_set,
    write_records,
    write_sidecar,
)

__version__ = "0.1.0"

__all__ = [
    "CacheMissError",
    "CapabilityError",
    "ChecksumError",
    "CorpusIndex",
    "CountDistribution",
    "DataError",
    "DEFAULT_DIM",
    "DEFAULT_ENCODER_TAG",
    "DEFAULT_TAU_C",
    "DEFAULT_TAU_S",
    "DEFAULT_TOP_K",
    "DegenerateInputError",
    "DiffCorpus",
    "DimensionMismatchError",
    "DiversityMetrics",
    "DuplicateKeyError",
    "EmbeddingCorpus",
    "EmbeddingProvider",
    "EncoderMismatchError",
    "EvalScoreRecord",
    "FileBackedProvider",
    "FilterConfig",
    "FormatError",
    "GenerationRecord",
    "IndexBuildConfig",
    "InsufficientSamplesError",
    "LoraSignature",
    "LoradexError",
    "MissingBaseError",
    "ProbeResult",
    "PromptEntry",
    "PromptRole",
    "PromptSet",
    "ProviderError",
    "QueryVariant",
    "QueryVector",
    "RemoteProvider",
    "RetrievalResult",
    "ScaleCurve",
    "ScreeningReport",
    "TopkTable",
    "UsageError",
    "build_index",
    "build_query_vector",
    "compute_diffs",
    "consistency",
    "consistency_stats",
    "diversity_metrics",
    "filter_and_truncate",
    "ingest_records",
    "load_corpus",
    "load_index",
    "load_prompt_set",
    "normalize_scores",
    "open_sidecar",
    "probe",
    "provider_from_spec",
    "rank",
    "read_records",
    "retrieval_counts",
    "retrieve",
    "save_index",
    "save_prompt_set",
    "scale_curve",
    "screening_report",
    "semantic_direction",
    "strength",
    "topk_table",
    "write_records",
    "write_sidecar",
]
