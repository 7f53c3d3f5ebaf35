"""Automatic substitute annotation: rank a candidate pool in context, then
filter the ranking down to the substitutes that actually fit.

Walks through both scoring modes (context-only for curated pools, the full
target-and-context product for noisy paraphrase pools) and all four filters,
then checks filter quality against a gold annotation.
"""

import numpy as np

from usimkit.corpus import CandidatePool, Instance, ParaphraseStore, SubstituteSet
from usimkit.representations import EmbeddingTable
from usimkit.substitutes import (
    FilterConfig,
    apply_filter,
    context_vector_for,
    evaluate_filter,
    filter_embedding,
    filter_ppdb,
    filter_score_gap,
    filter_top_k,
    rank_candidates,
)

# Toy geometry: "paper" the publication sits near news words; the pool also
# contains distractors that should rank low and get filtered away.
words = {
    "the": [0.0, 0.05, 0.0], "to": [0.0, 0.05, 0.0],
    "paper": [0.9, 0.2, 0.1], "letter": [0.85, 0.2, 0.2],
    "wrote": [0.88, 0.15, 0.2],
    "newspaper": [0.92, 0.15, 0.1], "journal": [0.88, 0.2, 0.12],
    "press": [0.7, 0.4, 0.35], "essay": [0.7, 0.35, 0.25],
    "cardboard": [0.05, 0.95, 0.05], "wood": [0.0, 0.9, 0.1],
}
table = EmbeddingTable(3, {w: np.array(v, float) for w, v in words.items()})

instance = Instance("paper.42", "paper", "n",
                    ("the", "letter", "wrote", "to", "the", "paper"), 5)
pool = CandidatePool(pools={("paper", "n"): frozenset(
    {"newspaper", "journal", "press", "essay", "cardboard", "wood"})})

# No encoder export here, so the context vector falls back to the static
# average over the target-excluded sentence (flagged by the provenance).
context, provenance = context_vector_for(instance, table=table)
print(f"context vector provenance: {provenance}")

print("\n== context-only ranking (curated pool) ==")
ranking = rank_candidates(instance, pool, table, context, mode="context-only")
for word, score in ranking.items:
    print(f"  {word:<10} {score:.3f}")

print("\n== full product ranking (noisy pool): target similarity joins in ==")
full = rank_candidates(instance, pool, table, context, mode="target-and-context")
for word, score in full.items:
    print(f"  {word:<10} {score:.3f}")

print("\n== the four filters ==")
store = ParaphraseStore(pairs={("journal", "newspaper"): 4.2,
                               ("essay", "journal"): 3.0})
print("top-5:          ", filter_top_k(ranking, 5).words)
print("score-gap:      ", filter_score_gap(ranking).words)
print("adjacent-cosine:", filter_embedding(ranking, table, T=0.2).words)
print("paraphrase:     ", filter_ppdb(ranking, store).words)

print("\n== filter quality against gold ==")
gold = {"paper.42": SubstituteSet("paper.42",
                                  (("newspaper", 3.0), ("journal", 1.0)))}
for label, config in [("top-k k=2", FilterConfig(kind="top-k", k=2)),
                      ("embedding T=0.2", FilterConfig(kind="embedding-adjacent", T=0.2)),
                      ("score-gap", FilterConfig(kind="score-gap"))]:
    filtered = apply_filter(ranking, config, table=table, store=store)
    f1, fp_ratio = evaluate_filter({"paper.42": filtered}, gold)
    print(f"  {label:<16} kept={filtered.words}  F1={f1:.3f}  FP ratio={fp_ratio:.3f}")
