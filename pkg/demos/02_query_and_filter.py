"""
Querying an index with plain text
=================================

The index built in demo 01 knows where each adapter pushes embeddings. To
search it with text we need the query's own push direction, measured the
same way: embed a handful of neutral prompts with and without the query
attached, and average the differences.

Run me directly:  python3 demos/02_query_and_filter.py
"""

import hashlib

import numpy as np

from loradex import (
    FileBackedProvider,
    FilterConfig,
    GenerationRecord,
    PromptEntry,
    PromptRole,
    PromptSet,
    build_index,
    ingest_records,
    retrieve,
)

DIM = 32


def fake_embedding(description: str) -> np.ndarray:
    digest = hashlib.sha256(description.encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(DIM).astype(np.float32)


# --- rebuild the demo-01 corpus, compressed into a helper ------------------

prompts = ["a red bicycle", "a foggy harbor", "a bowl of plums"]
seeds = [7, 8]
adapters = {
    "watercolor-wash": (1.5, 0.1),
    "chrome-text": (4.0, 0.2),
    "subtle-grain": (0.4, 0.5),
}

records = [
    GenerationRecord("image", None, p, s, fake_embedding(f"{p}/{s}"))
    for p in prompts for s in seeds
]
for name, (push, jitter) in adapters.items():
    shift = fake_embedding(f"shift:{name}").astype(np.float64)
    for p in prompts:
        for s in seeds:
            vec = (fake_embedding(f"{p}/{s}") + push * shift
                   + jitter * fake_embedding(f"{name}/{p}/{s}"))
            records.append(GenerationRecord("image", name, p, s, vec.astype(np.float32)))

# --- a text encoder, stood in by a file-backed cache ------------------------
#
# In production the encoder is a service; offline, the same interface is
# served from a file of precomputed text embeddings. The cache must cover
# each retrieval prompt as written AND with the query attached as a suffix.
# To make the demo's search meaningful, the suffixed texts embed near the
# direction watercolor-wash pushes toward.

retrieval = PromptSet(
    role=PromptRole.RETRIEVAL,
    prompts=[PromptEntry(f"r{i}", "demo", "demo", text) for i, text in enumerate(prompts)],
)

QUERY = "soft watercolor painting"
target = fake_embedding("shift:watercolor-wash").astype(np.float64)

text_records = []
for p in prompts:
    plain = fake_embedding(f"text:{p}").astype(np.float64)
    text_records.append(GenerationRecord("text", None, p, None, plain.astype(np.float32)))
    shifted = plain + 2.0 * target  # attaching the query moves the embedding
    text_records.append(
        GenerationRecord("text", None, f"{p}, {QUERY}", None, shifted.astype(np.float32))
    )

provider = FileBackedProvider.from_records(text_records, DIM)
index = build_index(ingest_records(records, DIM), created_at="2026-01-01T00:00:00Z")

# --- search ------------------------------------------------------------------

result = retrieve(
    index, QUERY, retrieval, provider,
    FilterConfig(tau_s=9.8, tau_c=0.041, top_k=5),
    include_failed=True,
)

print(f"query: {result.query_text!r}  (variant={result.variant.value},"
      f" tau_s={result.tau_s}, tau_c={result.tau_c})\n")
print(f"{'adapter':18} {'score':>8} {'strength':>9} {'consistency':>12}  verdict")
for e in result.entries:
    verdict = "PASS" if e.passed_filter else f"filtered: {', '.join(e.fail_reasons)}"
    print(f"{e.adapter_id:18} {e.score:8.4f} {e.strength:9.3f} {e.consistency:12.4f}  {verdict}")

# watercolor-wash wins on score because the query's direction was built to
# point its way. chrome-text is up there too (also a clean signature) but
# its strength 22 > 9.8 trips the filter: too heavy-handed to recommend.
# subtle-grain scores near zero -- unrelated direction -- and would pass the
# thresholds, which is exactly why ranking and filtering are separate steps.

# --- thresholds are levers, not constants ------------------------------------

wide_open = retrieve(index, QUERY, retrieval, provider,
                     FilterConfig(tau_s=float("inf"), tau_c=-1.0, top_k=5))
print(f"\nwith filtering disabled, {wide_open.passed_count} of"
      f" {wide_open.total_ranked} adapters pass")

strict = retrieve(index, QUERY, retrieval, provider,
                  FilterConfig(tau_s=9.8, tau_c=0.9, top_k=5))
print(f"demanding consistency > 0.9 leaves {strict.passed_count}:"
      f" {[e.adapter_id for e in strict.entries]}")
