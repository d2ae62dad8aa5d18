"""Text-to-adapter retrieval against a built index.

A plain text query is turned into a direction in embedding space the same
way adapters were: by differencing. Each retrieval prompt p is embedded
twice — once as written, once with the query text attached — and the mean of
(modified - plain) is the query vector. Attachment position is configurable
(suffix by default; prefix, both, or the raw query embedding alone).

Adapters are ranked by cosine similarity between their semantic direction
and the query vector, then filtered by the strength/consistency thresholds:
an adapter passes when strength < tau_s AND consistency > tau_c (both
strict). Ties in score break by adapter_id; adapters whose direction has
zero norm cannot be scored and sink to the bottom, flagged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DataError,
    DegenerateInputError,
    DimensionMismatchError,
    EncoderMismatchError,
    ProviderError,
    UsageError,
)
from .numerics import row_mean
from .providers import EmbeddingProvider
from .store import CorpusIndex, PromptRole, PromptSet

DEFAULT_TAU_S = 9.8
DEFAULT_TAU_C = 0.041
DEFAULT_TOP_K = 10
DEFAULT_SEPARATOR = ", "


class QueryVariant(str, Enum):
    """Where the query text attaches to each retrieval prompt."""

    SUFFIX = "suffix"
    PREFIX = "prefix"
    PREFIX_AND_SUFFIX = "prefix_and_suffix"
    QUERY_ONLY = "query_only"


@dataclass
class QueryVector:
    query_text: str
    vector: np.ndarray  # float64, shape (dim,)
    variant: QueryVariant
    prompt_set_id: str
    encoder_tag: str


@dataclass
class FilterConfig:
    """Thresholds applied after ranking. Infinite bounds disable a side."""

    tau_s: float = DEFAULT_TAU_S
    tau_c: float = DEFAULT_TAU_C
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        if np.isnan(self.tau_s) or np.isnan(self.tau_c):
            raise DataError("tau_s/tau_c must not be NaN")
        if self.top_k < 1:
            raise DataError(f"top_k must be >= 1, got {self.top_k}")


@dataclass
class RankedEntry:
    adapter_id: str
    score: float  # cosine(direction, query); -inf when direction norm is zero
    strength: float
    consistency: float
    zero_direction: bool = False


@dataclass
class ResultEntry:
    adapter_id: str
    score: float
    strength: float
    consistency: float
    passed_filter: bool
    fail_reasons: list[str] = field(default_factory=list)
    zero_direction: bool = False

    def to_dict(self) -> dict:
        return {
            "adapter_id": self.adapter_id,
            "score": self.score if np.isfinite(self.score) else None,
            "strength": self.strength,
            "consistency": self.consistency,
            "passed_filter": self.passed_filter,
            "fail_reasons": list(self.fail_reasons),
            "zero_direction": self.zero_direction,
        }


@dataclass
class RetrievalResult:
    """Ranked, filtered adapters plus everything needed to reproduce them."""

    entries: list[ResultEntry]
    query_text: str
    variant: QueryVariant
    prompt_set_id: str
    encoder_tag: str
    index_id: str
    tau_s: float
    tau_c: float
    top_k: int
    include_failed: bool
    total_ranked: int
    passed_count: int
    warning: str | None = None

    def passed_ids(self) -> list[str]:
        return [e.adapter_id for e in self.entries if e.passed_filter]

    def to_dict(self) -> dict:
        return {
            "query_text": self.query_text,
            "variant": self.variant.value,
            "prompt_set_id": self.prompt_set_id,
            "encoder_tag": self.encoder_tag,
            "index_id": self.index_id,
            "tau_s": _json_float(self.tau_s),
            "tau_c": _json_float(self.tau_c),
            "top_k": self.top_k,
            "include_failed": self.include_failed,
            "total_ranked": self.total_ranked,
            "passed_count": self.passed_count,
            "warning": self.warning,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RetrievalResult":
        entries = [
            ResultEntry(
                adapter_id=e["adapter_id"],
                score=float("-inf") if e["score"] is None else float(e["score"]),
                strength=float(e["strength"]),
                consistency=float(e["consistency"]),
                passed_filter=bool(e["passed_filter"]),
                fail_reasons=list(e.get("fail_reasons", [])),
                zero_direction=bool(e.get("zero_direction", False)),
            )
            for e in data["entries"]
        ]
        return cls(
            entries=entries,
            query_text=data["query_text"],
            variant=QueryVariant(data["variant"]),
            prompt_set_id=data["prompt_set_id"],
            encoder_tag=data["encoder_tag"],
            index_id=data["index_id"],
            tau_s=_parse_float(data["tau_s"]),
            tau_c=_parse_float(data["tau_c"]),
            top_k=int(data["top_k"]),
            include_failed=bool(data["include_failed"]),
            total_ranked=int(data["total_ranked"]),
            passed_count=int(data["passed_count"]),
            warning=data.get("warning"),
        )


def _json_float(x: float) -> float | str:
    # JSON has no Infinity literal; keep files parseable everywhere.
    if np.isfinite(x):
        return float(x)
    return "Infinity" if x > 0 else "-Infinity"


def _parse_float(x) -> float:
    return float(x)


def _variant_texts(prompt_text: str, query_text: str, variant: QueryVariant, sep: str) -> str:
    if variant is QueryVariant.SUFFIX:
        return f"{prompt_text}{sep}{query_text}"
    if variant is QueryVariant.PREFIX:
        return f"{query_text}{sep}{prompt_text}"
    if variant is QueryVariant.PREFIX_AND_SUFFIX:
        return f"{query_text}{sep}{prompt_text}{sep}{query_text}"
    raise DataError(f"variant {variant!r} does not modify prompts")


def build_query_vector(
    query_text: str,
    retrieval_prompts: PromptSet | None,
    provider: EmbeddingProvider,
    variant: QueryVariant = QueryVariant.SUFFIX,
    separator: str = DEFAULT_SEPARATOR,
) -> QueryVector:
    """Embed the query against every retrieval prompt and average the shifts.

    The query-only variant skips prompts entirely and uses the raw query
    embedding. Prompt order does not affect the result (deterministic
    reduction), and a query whose attachment moves nothing in embedding
    space is rejected rather than silently matching everything.
    """
    if not isinstance(query_text, str) or not query_text.strip():
        raise UsageError("query text must be non-empty")

    if variant is QueryVariant.QUERY_ONLY:
        vectors = _embed(provider, [query_text], what="query text")
        vector = vectors[0].astype(np.float64)
        prompt_set_id = ""
    else:
        if retrieval_prompts is None:
            raise DataError(f"variant {variant.value!r} requires retrieval prompts")
        if retrieval_prompts.role is not PromptRole.RETRIEVAL:
            raise DataError(
                f"query construction needs prompts with role 'retrieval',"
                f" got {retrieval_prompts.role.value!r}"
            )
        prompts = retrieval_prompts.prompts
        modified = [_variant_texts(p.text, query_text, variant, separator) for p in prompts]
        plain = [p.text for p in prompts]
        mod_vecs = _embed(provider, modified, what="modified prompts", prompts=prompts)
        plain_vecs = _embed(provider, plain, what="plain prompts", prompts=prompts)
        diffs = mod_vecs.astype(np.float64) - plain_vecs.astype(np.float64)
        vector = row_mean(diffs)
        prompt_set_id = retrieval_prompts.set_id

    if float(np.linalg.norm(vector)) == 0.0:
        raise DegenerateInputError(
            f"query {query_text!r} is indistinguishable from a no-op under this encoder"
            " (zero-norm query vector)"
        )
    return QueryVector(
        query_text=query_text,
        vector=vector,
        variant=variant,
        prompt_set_id=prompt_set_id,
        encoder_tag=provider.encoder_tag,
    )


def _embed(provider, texts, what, prompts=None) -> np.ndarray:
    try:
        return provider.embed_texts(texts)
    except ProviderError as exc:
        idx = getattr(exc, "item_index", None)
        if idx is not None and prompts is not None and 0 <= idx < len(prompts):
            raise ProviderError(
                f"encoder failed on {what} for prompt {prompts[idx].prompt_id!r}: {exc}"
            ) from exc
        raise ProviderError(f"encoder failed on {what}: {exc}") from exc


def rank(index: CorpusIndex, query: QueryVector) -> list[RankedEntry]:
    """Score every adapter against the query vector, best first.

    Descending cosine; ties break by adapter_id ascending; zero-direction
    adapters score -inf and land at the end, flagged.
    """
    if query.encoder_tag != index.encoder_tag:
        raise EncoderMismatchError(
            f"query built with encoder {query.encoder_tag!r} cannot search an index"
            f" built with {index.encoder_tag!r}"
        )
    if query.vector.shape != (index.dim,):
        raise DimensionMismatchError(
            f"query vector has shape {query.vector.shape}, index dim is {index.dim}"
        )
    qnorm = float(np.linalg.norm(query.vector))
    if qnorm == 0.0:
        raise DegenerateInputError("query vector has zero norm")

    matrix, norms = index.direction_matrix()
    scores = matrix @ query.vector
    ids = index.adapter_ids()
    entries = []
    for i, adapter_id in enumerate(ids):
        sig = index.signatures[adapter_id]
        if norms[i] == 0.0:
            entries.append(
                RankedEntry(adapter_id, float("-inf"), sig.strength, sig.consistency, True)
            )
        else:
            score = float(scores[i] / (norms[i] * qnorm))
            entries.append(RankedEntry(adapter_id, score, sig.strength, sig.consistency))
    entries.sort(key=lambda e: (-e.score, e.adapter_id))
    return entries


def filter_and_truncate(
    ranked: list[RankedEntry],
    query: QueryVector,
    index: CorpusIndex,
    config: FilterConfig | None = None,
    include_failed: bool = False,
) -> RetrievalResult:
    """Apply the strength/consistency gate and keep the top_k survivors.

    With `include_failed`, failed entries stay in the output (with reasons)
    for inspection; only the passed set is truncated to top_k either way.
    """
    config = config or FilterConfig()
    entries: list[ResultEntry] = []
    passed_count = 0
    for e in ranked:
        reasons = []
        if not e.strength < config.tau_s:
            reasons.append("strength")
        if not e.consistency > config.tau_c:
            reasons.append("consistency")
        passed = not reasons
        if passed:
            passed_count += 1
            if passed_count <= config.top_k:
                entries.append(
                    ResultEntry(
                        adapter_id=e.adapter_id,
                        score=e.score,
                        strength=e.strength,
                        consistency=e.consistency,
                        passed_filter=True,
                        zero_direction=e.zero_direction,
                    )
                )
        elif include_failed:
            entries.append(
                ResultEntry(
                    adapter_id=e.adapter_id,
                    score=e.score,
                    strength=e.strength,
                    consistency=e.consistency,
                    passed_filter=False,
                    fail_reasons=reasons,
                    zero_direction=e.zero_direction,
                )
            )
    warning = None
    if passed_count == 0:
        warning = "no adapters passed the strength/consistency filters"
    return RetrievalResult(
        entries=entries,
        query_text=query.query_text,
        variant=query.variant,
        prompt_set_id=query.prompt_set_id,
        encoder_tag=query.encoder_tag,
        index_id=index.index_id,
        tau_s=config.tau_s,
        tau_c=config.tau_c,
        top_k=config.top_k,
        include_failed=include_failed,
        total_ranked=len(ranked),
        passed_count=passed_count,
        warning=warning,
    )


def retrieve(
    index: CorpusIndex,
    query_text: str,
    retrieval_prompts: PromptSet | None,
    provider: EmbeddingProvider,
    config: FilterConfig | None = None,
    variant: QueryVariant = QueryVariant.SUFFIX,
    include_failed: bool = False,
    separator: str = DEFAULT_SEPARATOR,
) -> RetrievalResult:
    """End-to-end: build the query vector, rank, filter, truncate."""
    query = build_query_vector(query_text, retrieval_prompts, provider, variant, separator)
    ranked = rank(index, query)
    return filter_and_truncate(ranked, query, index, config, include_failed)
