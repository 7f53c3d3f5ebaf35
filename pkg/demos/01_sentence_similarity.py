"""Scoring how similar two usages of a word are, straight from vectors.

Builds a toy embedding table, loads a few hand-written instances, and
compares usages with whole-sentence averages, context windows, SIF, and
precomputed contextual vectors.
"""

import numpy as np

from usimkit.corpus import Instance, InstancePair
from usimkit.representations import (
    ContextualVectorBundle,
    EmbeddingTable,
    ReprResources,
    ReprSpec,
    SifConfig,
    Window,
    cosine,
    direct_usim,
    fit_sif_over_instances,
    represent,
    window_indices,
)

rng = np.random.default_rng(0)

# A miniature embedding table. Real experiments load a text-format file with
# load_embeddings("vectors.txt"); the geometry here is chosen by hand so the
# results are easy to eyeball: news words cluster, vehicle words cluster.
words = {
    "the": [0.1, 0.1, 0.1], "a": [0.1, 0.1, 0.1],
    "paper": [0.9, 0.3, 0.0], "journal": [0.95, 0.2, 0.0],
    "press": [0.85, 0.3, 0.1], "read": [0.7, 0.2, 0.2],
    "coach": [0.2, 0.9, 0.1], "bus": [0.1, 0.95, 0.0],
    "boarded": [0.2, 0.8, 0.3], "team": [0.3, 0.6, 0.5],
}
table = EmbeddingTable(dimension=3,
                       entries={w: np.array(v, float) for w, v in words.items()})

# Three usages of "paper": two news-like, one odd one out.
instances = {
    "paper.1": Instance("paper.1", "paper", "n",
                        ("the", "paper", "read"), 1),
    "paper.2": Instance("paper.2", "paper", "n",
                        ("a", "journal", "paper", "press"), 2),
    "paper.3": Instance("paper.3", "paper", "n",
                        ("the", "bus", "coach", "paper"), 3),
}

print("== whole-sentence averages ==")
spec = ReprSpec(source="static-average")
for iid, inst in instances.items():
    vec = represent(inst, spec, table=table)
    print(f"{iid}: tokens={inst.tokens} -> {np.round(vec, 3)}")

pairs = [
    InstancePair("news_vs_news", "paper", "paper.1", "paper.2"),
    InstancePair("news_vs_vehicle", "paper", "paper.1", "paper.3"),
]
scores = direct_usim(pairs, spec, ReprResources(instances=instances, table=table))
for pid, score in scores.items():
    print(f"cosine[{pid}] = {score:.3f}")
print("the news/news pair should clearly beat the news/vehicle pair\n")

print("== context windows around the target ==")
inst = instances["paper.3"]
for w in (2, 3):
    idx = window_indices(inst, w, include_target=False)
    print(f"window w={w} (target excluded): indices {idx} ->",
          [inst.tokens[i] for i in idx])
windowed = ReprSpec(source="static-average", window=Window(2, include_target=False))
print("windowed representation:",
      np.round(represent(inst, windowed, table=table), 3), "\n")

print("== SIF: reweight by frequency, drop the shared direction ==")
sif_state = fit_sif_over_instances(instances.values(), table, SifConfig(a=1e-3))
print("fitted common component:", np.round(sif_state.direction, 3))
sif_spec = ReprSpec(source="sif")
sif_scores = direct_usim(
    pairs, sif_spec, ReprResources(instances=instances, table=table, sif=sif_state))
for pid, score in sif_scores.items():
    print(f"sif cosine[{pid}] = {score:.3f}")
print()

print("== contextual vectors from an encoder export ==")
# Bundles normally come from the extraction tool as JSONL; here we fake a
# 2-layer encoder that, like a real one, pulls each token's vector toward
# its sentence, so the same target word gets usage-specific vectors.
bundles = {}
for iid, inst in instances.items():
    base = np.stack([table.vector(t) for t in inst.tokens])
    contextualized = 0.4 * base + 0.6 * base.mean(axis=0)
    bundles[iid] = ContextualVectorBundle(
        iid,
        {"layer_1": contextualized + rng.normal(scale=0.01, size=base.shape),
         "layer_2": contextualized + rng.normal(scale=0.01, size=base.shape)},
        context_vector=base.mean(axis=0),
    )
target_spec = ReprSpec(source="contextual-target", layer_combination="average-of-layers")
res = ReprResources(instances=instances, bundles=bundles)
for pid, score in direct_usim(pairs, target_spec, res).items():
    print(f"contextual target cosine[{pid}] = {score:.3f}")
sentence_spec = ReprSpec(source="sentence-vector")
for pid, score in direct_usim(pairs, sentence_spec, res).items():
    print(f"sentence-vector cosine[{pid}] = {score:.3f}")
