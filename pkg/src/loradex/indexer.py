"""Turning raw embedding records into per-adapter signatures.

For one adapter, each (prompt, seed) pair contributes a *diff vector*: the
image embedding produced with the adapter active minus the embedding the
vanilla base model produced for the same prompt and seed. Everything the
index knows about an adapter is a statistic over those diffs:

* **semantic direction** — the mean diff vector (not re-normalized);
* **strength** — the mean Euclidean norm of the diffs;
* **consistency** — the mean pairwise cosine similarity between diffs.

Consistency uses the closed form over unit-normalized diffs: with m nonzero
diffs and S the sum of their unit vectors, the mean over all m(m-1)/2
unordered pairs equals (|S|^2 - m) / (m (m-1)). Zero-norm diffs have no
defined direction, so every pair touching one is excluded and counted.

All arithmetic is float64 with deterministic pairwise reduction, regardless
of how records are ordered on disk.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError, InsufficientSamplesError
from .numerics import pairwise_sum, row_mean
from .store import (
    BuildReport,
    BuildReportEntry,
    CorpusIndex,
    EmbeddingCorpus,
    LoraSignature,
    utc_now_iso,
)


@dataclass
class IndexBuildConfig:
    """Knobs for `build_index`.

    min_samples: adapters with fewer usable diffs are excluded (reported).
    parallelism: worker threads for per-adapter statistics.
    scale_tag: the adapter scale the corpus was generated at, echoed into
        the index so multi-scale studies can tell their indexes apart.
    """

    min_samples: int = 2
    parallelism: int = 1
    scale_tag: float = 1.0

    def __post_init__(self) -> None:
        if self.min_samples < 2:
            raise DataError(f"min_samples must be >= 2, got {self.min_samples}")
        if self.parallelism < 1:
            raise DataError(f"parallelism must be >= 1, got {self.parallelism}")
        if not np.isfinite(self.scale_tag):
            raise DataError(f"scale_tag must be finite, got {self.scale_tag}")


@dataclass
class DiffCorpus:
    """Aligned diff vectors for one adapter, float64, one row per (prompt, seed)."""

    adapter_id: str
    keys: list[tuple[str, int]]
    diffs: np.ndarray

    @property
    def sample_count(self) -> int:
        return int(self.diffs.shape[0])


def compute_diffs(
    corpus: EmbeddingCorpus,
    adapter_id: str,
    min_samples: int = 2,
) -> DiffCorpus:
    """Adapter-minus-base diffs for every (prompt, seed) the adapter covers.

    Raises `MissingBaseError` (naming the key) when the vanilla record for
    some (prompt, seed) is absent, and `InsufficientSamplesError` when fewer
    than `min_samples` diffs remain.
    """
    block = corpus.image_block(adapter_id)
    if len(block) < min_samples:
        raise InsufficientSamplesError(
            f"adapter {adapter_id!r}: {len(block)} records < min_samples {min_samples}"
        )
    corpus.check_base_complete(adapter_id)
    base = corpus.image_block(None)
    keys = block.keys()
    if keys == base.keys():
        base_matrix = base.matrix()
    else:
        base_rows = base.key_to_row()
        base_matrix = base.matrix()[[base_rows[k] for k in keys]]
    diffs = block.matrix().astype(np.float64) - base_matrix.astype(np.float64)
    return DiffCorpus(adapter_id=adapter_id, keys=list(keys), diffs=diffs)


def _as_matrix(diffs: DiffCorpus | np.ndarray) -> np.ndarray:
    matrix = diffs.diffs if isinstance(diffs, DiffCorpus) else np.asarray(diffs, dtype=np.float64)
    if matrix.ndim != 2:
        raise DataError(f"expected a 2-D diff matrix, got shape {matrix.shape}")
    if matrix.shape[0] < 1:
        raise InsufficientSamplesError("no diff vectors")
    if not np.all(np.isfinite(matrix)):
        raise DataError("diff matrix has non-finite entries")
    return matrix.astype(np.float64, copy=False)


def semantic_direction(diffs: DiffCorpus | np.ndarray) -> np.ndarray:
    """Mean diff vector (float64). Deliberately not re-normalized: its norm
    still carries how coherent the adapter's effect is."""
    return row_mean(_as_matrix(diffs))


def strength(diffs: DiffCorpus | np.ndarray) -> float:
    """Mean Euclidean norm of the diff vectors."""
    matrix = _as_matrix(diffs)
    norms = np.linalg.norm(matrix, axis=1)
    return float(pairwise_sum(norms[:, None])[0] / norms.shape[0])


@dataclass
class ConsistencyStats:
    value: float
    nonzero_count: int
    excluded_pairs: int


def consistency_stats(diffs: DiffCorpus | np.ndarray) -> ConsistencyStats:
    """Mean pairwise cosine over diffs, with zero-norm exclusions counted."""
    matrix = _as_matrix(diffs)
    n = matrix.shape[0]
    if n < 2:
        raise InsufficientSamplesError(
            f"consistency needs at least 2 diff vectors, got {n}"
        )
    norms = np.linalg.norm(matrix, axis=1)
    nonzero = norms > 0.0
    m = int(np.count_nonzero(nonzero))
    total_pairs = n * (n - 1) // 2
    defined_pairs = m * (m - 1) // 2
    excluded = total_pairs - defined_pairs
    if m < 2:
        raise DegenerateInputError(
            f"consistency undefined: only {m} nonzero diff vector(s) out of {n}"
        )
    units = matrix[nonzero] / norms[nonzero, None]
    total = pairwise_sum(units)
    value = (float(total @ total) - m) / (m * (m - 1))
    value = min(1.0, max(-1.0, value))
    return ConsistencyStats(value=value, nonzero_count=m, excluded_pairs=excluded)


def consistency(diffs: DiffCorpus | np.ndarray) -> float:
    """Mean pairwise cosine similarity between diff vectors, in [-1, 1]."""
    return consistency_stats(diffs).value


def _signature_for(
    corpus: EmbeddingCorpus,
    adapter_id: str,
    config: IndexBuildConfig,
) -> tuple[LoraSignature, BuildReportEntry] | tuple[None, str]:
    try:
        diffs = compute_diffs(corpus, adapter_id, config.min_samples)
    except InsufficientSamplesError as exc:
        return None, str(exc)
    direction = semantic_direction(diffs)
    s = strength(diffs)
    try:
        stats = consistency_stats(diffs)
    except DegenerateInputError as exc:
        return None, str(exc)
    sig = LoraSignature(
        adapter_id=adapter_id,
        direction=direction,
        strength=s,
        consistency=stats.value,
        sample_count=diffs.sample_count,
        dim=corpus.dim,
        encoder_tag=corpus.encoder_tag,
    )
    entry = BuildReportEntry(
        adapter_id=adapter_id,
        sample_count=diffs.sample_count,
        strength=s,
        consistency=stats.value,
        excluded_pairs=stats.excluded_pairs,
    )
    return sig, entry


def build_index(
    corpus: EmbeddingCorpus,
    config: IndexBuildConfig | None = None,
    created_at: str | None = None,
) -> CorpusIndex:
    """Build signatures for every adapter in the corpus.

    Adapters that cannot produce a signature (too few records, or no
    direction defined for any pair) are excluded and listed in the build
    report; a corpus where nothing survives is an error. The result is
    independent of `parallelism`.
    """
    config = config or IndexBuildConfig()
    adapter_ids = corpus.adapter_ids()
    if not adapter_ids:
        raise DataError("corpus has no adapter records to index")

    if config.parallelism == 1:
        outcomes = [_signature_for(corpus, a, config) for a in adapter_ids]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(pool.map(lambda a: _signature_for(corpus, a, config), adapter_ids))

    signatures: dict[str, LoraSignature] = {}
    report = BuildReport()
    for adapter_id, outcome in zip(adapter_ids, outcomes):
        sig, extra = outcome
        if sig is None:
            report.exclusions.append((adapter_id, extra))  # type: ignore[arg-type]
        else:
            signatures[adapter_id] = sig
            report.entries.append(extra)  # type: ignore[arg-type]
    if not signatures:
        raise DataError(
            f"no adapter produced a signature ({len(report.exclusions)} excluded)"
        )
    return CorpusIndex(
        signatures=signatures,
        dim=corpus.dim,
        encoder_tag=corpus.encoder_tag,
        created_at=created_at or utc_now_iso(),
        manifest=corpus.manifest.to_dict(),
        scale_tag=config.scale_tag,
        build_report=report,
    )
