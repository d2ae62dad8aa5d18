"""
Measuring retrieval quality and diversity
=========================================

Once a retriever answers queries, two follow-up questions matter. Is it
any good (per human or model judges)? And does it actually use the corpus,
or does it keep recommending the same few favorites?

Run me directly:  python3 demos/03_measure_a_retriever.py
"""

import numpy as np

from loradex.analytics import (
    CountDistribution,
    EvalScoreRecord,
    diversity_metrics,
    fractional_ranks,
    normalize_scores,
    topk_table,
)

rng = np.random.default_rng(3)

# --- judge scores ------------------------------------------------------------
# Two judges scored the top-3 answers of two retrievers for two queries.
# Judge "strict" scores 0-10, judge "gusher" scores 60-100: raw numbers are
# not comparable, which is the whole reason for per-judge normalization.

raw = []
for query in ("q-neon", "q-pastel"):
    for retriever, quality in (("adapter-index", 0.8), ("keyword-match", 0.4)):
        for rank in (1, 2, 3):
            signal = quality * (4 - rank) / 3  # better retrievers decay slower
            raw.append(EvalScoreRecord(query, retriever, "strict",
                                       rank, round(10 * signal + rng.uniform(0, 2), 2)))
            raw.append(EvalScoreRecord(query, retriever, "gusher",
                                       rank, round(60 + 40 * signal + rng.uniform(0, 4), 2)))

normalized = normalize_scores(raw)
print(topk_table(normalized, k_max=3).to_text())
# Same story from both judges once each is min-max scaled over everything
# they scored: adapter-index ahead at every k.

# --- diversity ---------------------------------------------------------------
# Simulate which adapter each retriever surfaces at rank 1 over 500 queries
# against a 40-adapter corpus. keyword-match has favorites; adapter-index
# spreads out.

support = [f"adapter-{i:02d}" for i in range(40)]

spread = {a: 0 for a in support}
for winner in rng.integers(0, 40, size=500):
    spread[support[int(winner)]] += 1

biased = {a: 0 for a in support}
for draw in rng.random(500):
    biased[support[int(min(39, draw * draw * 8))]] += 1  # mass piles onto low ids

for label, counts in (("adapter-index", spread), ("keyword-match", biased)):
    m = diversity_metrics(CountDistribution(counts=counts))
    print(f"{label:15} entropy={m.normalized_entropy:.3f} gini={m.gini:.3f} "
          f"-> effectively {m.effective_count:.1f} of {len(support)} adapters in play")

# --- where a single adapter stands -------------------------------------------
# Percentile ranks place one adapter among its peers; the same machinery
# backs the strength/consistency scatter screening.

strengths = sorted(float(s) for s in rng.uniform(1, 20, size=9))
ranks = fractional_ranks(strengths)
print("\nstrength percentiles over 9 adapters:")
for s, r in zip(strengths, ranks):
    print(f"  strength {s:5.2f} -> rank {r:.2f}")
