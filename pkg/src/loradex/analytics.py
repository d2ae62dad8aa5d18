"""Evaluation and corpus-health analytics.

Covers four jobs that sit on top of retrieval rather than inside it:

* normalizing evaluator scores so differently-scaled judges can share a
  table (per-evaluator global min-max over every score that evaluator
  produced, across all queries, retrievers, and ranks);
* cumulative top-k quality tables (mean normalized score over queries and
  ranks 1..k, one cell per retriever x evaluator x k);
* diversity of retrieval counts: entropy (normalized), Gini coefficient
  over the full corpus support, and effective adapter count exp(H);
* threshold-free screening of an index into strength/consistency percentile
  quadrants, and strength-versus-scale curves across indexes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, DegenerateInputError, DuplicateKeyError, FormatError
from .query import RetrievalResult
from .store import CorpusIndex

SCREENING_DISCLAIMER = (
    "Quadrant labels are relative percentiles within this corpus, not quality"
    " judgments; a flagged adapter is merely unusually strong and unusually"
    " self-similar here."
)


# ---------------------------------------------------------------------------
# evaluator scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalScoreRecord:
    """One evaluator's raw score for one ranked result of one query."""

    query_id: str
    retriever_id: str
    evaluator_id: str
    rank: int
    raw_score: float


_EVAL_COLUMNS = ("query_id", "retriever_id", "evaluator_id", "rank", "raw_score")


def read_eval_records(path: str | Path) -> list[EvalScoreRecord]:
    """Read evaluator scores from a tab-delimited file (header required)."""
    path = Path(path)
    records: list[EvalScoreRecord] = []
    seen: set[tuple[str, str, str, int]] = set()
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if tuple(header.split("\t")) != _EVAL_COLUMNS:
            raise FormatError(
                f"{path.name}: expected header {'	'.join(_EVAL_COLUMNS)!r}, got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(_EVAL_COLUMNS):
                raise FormatError(f"{path.name}:{lineno}: expected {len(_EVAL_COLUMNS)} columns")
            query_id, retriever_id, evaluator_id, rank_s, score_s = parts
            try:
                rank_v = int(rank_s)
                score = float(score_s)
            except ValueError as exc:
                raise DataError(f"{path.name}:{lineno}: {exc}") from exc
            if rank_v < 1:
                raise DataError(f"{path.name}:{lineno}: rank must be >= 1, got {rank_v}")
            if not math.isfinite(score):
                raise DataError(f"{path.name}:{lineno}: raw_score must be finite")
            key = (query_id, retriever_id, evaluator_id, rank_v)
            if key in seen:
                raise DuplicateKeyError(f"{path.name}:{lineno}: duplicate score for {key!r}")
            seen.add(key)
            records.append(EvalScoreRecord(query_id, retriever_id, evaluator_id, rank_v, score))
    if not records:
        raise DataError(f"{path.name}: no score records")
    return records


def normalize_scores(records: Sequence[EvalScoreRecord]) -> list[EvalScoreRecord]:
    """Min-max normalize scores per evaluator, into [0, 1].

    The min and max are taken over *everything* that evaluator scored —
    every query, retriever, and rank together — so normalized values remain
    comparable across retrievers. Returned records carry the normalized
    value in ``raw_score``. An evaluator whose scores are all identical has
    no scale and is rejected.
    """
    if not records:
        raise DataError("no score records to normalize")
    bounds: dict[str, tuple[float, float]] = {}
    for rec in records:
        lo, hi = bounds.get(rec.evaluator_id, (math.inf, -math.inf))
        bounds[rec.evaluator_id] = (min(lo, rec.raw_score), max(hi, rec.raw_score))
    for evaluator_id, (lo, hi) in bounds.items():
        if hi == lo:
            raise DegenerateInputError(
                f"evaluator {evaluator_id!r} produced a single distinct score ({lo});"
                " min-max normalization is undefined"
            )
    return [
        replace(
            rec,
            raw_score=(rec.raw_score - bounds[rec.evaluator_id][0])
            / (bounds[rec.evaluator_id][1] - bounds[rec.evaluator_id][0]),
        )
        for rec in records
    ]


@dataclass
class TopkTable:
    """Cumulative mean scores: cell (retriever, evaluator, k) averages ranks 1..k."""

    retrievers: list[str]
    evaluators: list[str]
    k_values: list[int]
    cells: dict[tuple[str, str, int], float | None]
    gaps: dict[tuple[str, str, int], list[tuple[str, int]]] = field(default_factory=dict)

    def cell(self, retriever: str, evaluator: str, k: int) -> float | None:
        return self.cells[(retriever, evaluator, k)]

    def to_text(self) -> str:
        lines = []
        for k in self.k_values:
            lines.append(f"top-{k}")
            lines.append("\t".join(["retriever"] + self.evaluators))
            for r in self.retrievers:
                row = [r]
                for e in self.evaluators:
                    v = self.cells[(r, e, k)]
                    row.append("incomplete" if v is None else f"{v:.4f}")
                lines.append("\t".join(row))
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "retrievers": self.retrievers,
            "evaluators": self.evaluators,
            "k_values": self.k_values,
            "cells": [
                {
                    "retriever": r,
                    "evaluator": e,
                    "k": k,
                    "mean": self.cells[(r, e, k)],
                    "missing": [list(g) for g in self.gaps.get((r, e, k), [])],
                }
                for r in self.retrievers
                for e in self.evaluators
                for k in self.k_values
            ],
        }


def topk_table(records: Sequence[EvalScoreRecord], k_max: int) -> TopkTable:
    """Build the cumulative table from (already normalized) score records.

    A cell whose rank coverage has holes (some query lacks a rank <= k for
    that retriever/evaluator) reports the missing (query, rank) pairs and
    carries no mean rather than a silently partial one.
    """
    if k_max < 1:
        raise DataError(f"k_max must be >= 1, got {k_max}")
    if not records:
        raise DataError("no score records")
    by_cell: dict[tuple[str, str], dict[tuple[str, int], float]] = {}
    for rec in records:
        by_cell.setdefault((rec.retriever_id, rec.evaluator_id), {})[(rec.query_id, rec.rank)] = (
            rec.raw_score
        )
    retrievers = sorted({r for r, _ in by_cell})
    evaluators = sorted({e for _, e in by_cell})
    k_values = list(range(1, k_max + 1))
    cells: dict[tuple[str, str, int], float | None] = {}
    gaps: dict[tuple[str, str, int], list[tuple[str, int]]] = {}
    for r in retrievers:
        for e in evaluators:
            scores = by_cell.get((r, e), {})
            queries = sorted({q for q, _ in scores})
            for k in k_values:
                missing = [
                    (q, rank)
                    for q in queries
                    for rank in range(1, k + 1)
                    if (q, rank) not in scores
                ]
                if not scores:
                    missing = [("*", rank) for rank in range(1, k + 1)]
                if missing:
                    cells[(r, e, k)] = None
                    gaps[(r, e, k)] = missing
                else:
                    values = [scores[(q, rank)] for q in queries for rank in range(1, k + 1)]
                    cells[(r, e, k)] = math.fsum(values) / len(values)
    return TopkTable(retrievers, evaluators, k_values, cells, gaps)


# ---------------------------------------------------------------------------
# diversity
# ---------------------------------------------------------------------------


@dataclass
class CountDistribution:
    """How often each adapter appeared, over the full corpus support.

    Adapters that never appeared stay in `counts` with 0 — the support size
    n is the corpus size, not the number of distinct winners.
    """

    counts: dict[str, int]

    def __post_init__(self) -> None:
        if not self.counts:
            raise DataError("empty support: distribution needs at least one adapter")
        for adapter_id, c in self.counts.items():
            if not isinstance(c, int) or isinstance(c, bool) or c < 0:
                raise DataError(f"count for {adapter_id!r} must be a non-negative integer, got {c!r}")

    @property
    def support_size(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def retrieval_counts(
    results: Sequence[RetrievalResult],
    k: int,
    index: CorpusIndex,
) -> CountDistribution:
    """Count appearances within the passed top-k of each result.

    All results must come from `index` (single-index invariant); when a
    result has fewer than k passed entries, only what exists is counted.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if not results:
        raise DataError("no retrieval results")
    counts = {adapter_id: 0 for adapter_id in index.adapter_ids()}
    for result in results:
        if result.index_id != index.index_id:
            raise DataError(
                f"mixed-index results: result for {result.query_text!r} was produced by"
                f" index {result.index_id}, counting against {index.index_id}"
            )
        for adapter_id in result.passed_ids()[:k]:
            if adapter_id not in counts:
                raise DataError(f"result names unknown adapter {adapter_id!r}")
            counts[adapter_id] += 1
    return CountDistribution(counts)


@dataclass
class DiversityMetrics:
    normalized_entropy: float
    gini: float
    effective_count: float


def diversity_metrics(dist: CountDistribution) -> DiversityMetrics:
    """Entropy, Gini, and effective count of a retrieval-count distribution.

    Entropy H = -sum p ln p over nonzero shares, normalized by ln(n) (a
    single-adapter support has no spread and reports 0). The effective count
    is exp(H reconstructed from the normalized value). The Gini coefficient
    is the mean absolute difference form over the **full** support,
    zero-count adapters included: sum_ij |c_i - c_j| / (2 n^2 mean(c)),
    computed exactly in integers as M / (2 n T).
    """
    total = dist.total
    if total < 1:
        raise DegenerateInputError("empty distribution: no retrievals counted")
    n = dist.support_size
    counts = np.fromiter(dist.counts.values(), dtype=np.int64, count=n)

    # Exactly uniform and exactly single-winner supports short-circuit to
    # their closed forms, so the boundary cases come out exact instead of
    # within a few ulp.
    if n == 1:
        return DiversityMetrics(0.0, 0.0, 1.0)
    if np.all(counts == counts[0]):
        return DiversityMetrics(1.0, 0.0, float(n))
    if np.count_nonzero(counts) == 1:
        mad_total = 2 * (n - 1) * total
        return DiversityMetrics(0.0, mad_total / (2 * n * total), 1.0)

    shares = counts[counts > 0].astype(np.float64) / float(total)
    entropy = -math.fsum(float(p) * math.log(p) for p in shares)
    normalized = entropy / math.log(n)
    normalized = min(1.0, max(0.0, normalized))
    effective = math.exp(normalized * math.log(n))
    effective = min(float(n), max(1.0, effective))

    if n <= 2048:
        mad_total = int(np.abs(counts[:, None] - counts[None, :]).sum())
    else:
        # Equivalent sorted form; Python integers keep it exact at any size.
        ordered = np.sort(counts)
        mad_total = 2 * sum(
            (2 * i - n - 1) * int(x) for i, x in enumerate(ordered, start=1)
        )
    gini = mad_total / (2 * n * total)

    return DiversityMetrics(normalized_entropy=normalized, gini=gini, effective_count=effective)


# ---------------------------------------------------------------------------
# screening
# ---------------------------------------------------------------------------


def fractional_ranks(values: Sequence[float]) -> list[float]:
    """Percentile ranks in [0, 1]: mid-rank for ties, single value ranks 0."""
    m = len(values)
    if m == 0:
        raise DataError("no values to rank")
    if m == 1:
        return [0.0]
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError("values to rank must be finite")
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(m, dtype=np.float64)
    pos = 0
    while pos < m:
        end = pos
        while end + 1 < m and arr[order[end + 1]] == arr[order[pos]]:
            end += 1
        mid = (pos + end) / 2.0
        for i in range(pos, end + 1):
            ranks[order[i]] = mid
        pos = end + 1
    return [float(r / (m - 1)) for r in ranks]


_QUADRANTS = {
    (False, False): "weak-inconsistent",
    (False, True): "weak-consistent",
    (True, False): "strong-inconsistent",
    (True, True): "strong-consistent",
}


@dataclass
class ScreeningEntry:
    adapter_id: str
    strength: float
    consistency: float
    strength_rank: float
    consistency_rank: float
    quadrant: str
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "adapter_id": self.adapter_id,
            "strength": self.strength,
            "consistency": self.consistency,
            "strength_rank": self.strength_rank,
            "consistency_rank": self.consistency_rank,
            "quadrant": self.quadrant,
            "flagged": self.flagged,
        }


@dataclass
class ScreeningReport:
    """Percentile quadrants of an index, with the strong-consistent corner flagged."""

    index_id: str
    strength_split: float
    consistency_split: float
    entries: list[ScreeningEntry]
    disclaimer: str = SCREENING_DISCLAIMER

    def flagged_ids(self) -> list[str]:
        return [e.adapter_id for e in self.entries if e.flagged]

    def to_dict(self) -> dict:
        return {
            "index_id": self.index_id,
            "strength_split": self.strength_split,
            "consistency_split": self.consistency_split,
            "disclaimer": self.disclaimer,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_text(self) -> str:
        lines = [
            "adapter_id\tstrength\tconsistency\tstrength_rank\tconsistency_rank\tquadrant\tflagged"
        ]
        for e in self.entries:
            lines.append(
                f"{e.adapter_id}\t{e.strength!r}\t{e.consistency!r}\t{e.strength_rank!r}"
                f"\t{e.consistency_rank!r}\t{e.quadrant}\t{str(e.flagged).lower()}"
            )
        lines.append(f"# {self.disclaimer}")
        return "\n".join(lines) + "\n"


def screening_report(
    index: CorpusIndex,
    strength_split: float = 0.5,
    consistency_split: float = 0.5,
) -> ScreeningReport:
    """Place every adapter in a percentile quadrant; no absolute thresholds.

    An adapter is "strong" when its strength percentile is >= the split
    (same rule for consistency); the strong-consistent quadrant is flagged
    for human review.
    """
    for name, split in (("strength_split", strength_split), ("consistency_split", consistency_split)):
        if not (0.0 <= split <= 1.0):
            raise DataError(f"{name} must be in [0, 1], got {split}")
    adapter_ids = index.adapter_ids()
    strengths = [index.signatures[a].strength for a in adapter_ids]
    consistencies = [index.signatures[a].consistency for a in adapter_ids]
    s_ranks = fractional_ranks(strengths)
    c_ranks = fractional_ranks(consistencies)
    entries = []
    for adapter_id, s, c, sr, cr in zip(adapter_ids, strengths, consistencies, s_ranks, c_ranks):
        strong = sr >= strength_split
        consistent = cr >= consistency_split
        entries.append(
            ScreeningEntry(
                adapter_id=adapter_id,
                strength=s,
                consistency=c,
                strength_rank=sr,
                consistency_rank=cr,
                quadrant=_QUADRANTS[(strong, consistent)],
                flagged=strong and consistent,
            )
        )
    return ScreeningReport(
        index_id=index.index_id,
        strength_split=strength_split,
        consistency_split=consistency_split,
        entries=entries,
    )


# ---------------------------------------------------------------------------
# scale curves
# ---------------------------------------------------------------------------


@dataclass
class ScaleCurve:
    """Strength of one adapter across indexes built at different scales."""

    adapter_id: str
    points: list[tuple[float, float]]  # (scale, strength), ascending by scale
    notes: list[str] = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        return [{"scale": s, "strength": v} for s, v in self.points]


def scale_curve(indices: Mapping[float, CorpusIndex], adapter_id: str) -> ScaleCurve:
    """Trace strength across indexes keyed by scale; missing scales are noted."""
    if not indices:
        raise DataError("no indexes given")
    points: list[tuple[float, float]] = []
    notes: list[str] = []
    for scale in sorted(indices):
        if not math.isfinite(scale):
            raise DataError(f"scale {scale} is not finite")
        sig = indices[scale].get(adapter_id)
        if sig is None:
            notes.append(f"adapter {adapter_id!r} absent from index at scale {scale}")
            continue
        points.append((float(scale), sig.strength))
    if len(points) < 2:
        raise DataError(
            f"adapter {adapter_id!r} appears in {len(points)} index(es); a curve needs >= 2"
        )
    return ScaleCurve(adapter_id=adapter_id, points=points, notes=notes)


def results_from_jsonl(path: str | Path) -> list[RetrievalResult]:
    """Load retrieval results (one JSON document per line)."""
    import json

    path = Path(path)
    results = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                results.append(RetrievalResult.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise FormatError(f"{path.name}:{lineno}: bad result record ({exc})") from exc
    if not results:
        raise DataError(f"{path.name}: no results")
    return results
