"""Binary same/different classification with dev-set feature selection and
the embedding-only back-off for pairs lacking substitute annotations.

Mirrors the word-in-context protocol: train/dev/test splits, a registered
list of feature combinations compared on dev, accuracy reported on test.
"""

import numpy as np

from usimkit.corpus import InstancePair
from usimkit.features import FeatureVector, SUBSTITUTE_FEATURES
from usimkit.models import LogisticConfig, predict, run_binary

rng = np.random.default_rng(13)


def make_split(name, size, start):
    pairs, fvs = [], {}
    for i in range(size):
        pid = f"{name}.p{start + i}"
        label = "T" if rng.random() < 0.5 else "F"
        signal = 1.0 if label == "T" else -1.0
        target_cos = signal * 0.8 + rng.normal(scale=0.45)
        sentence_cos = signal * 0.3 + rng.normal(scale=0.8)
        features = {"cos_contextual_target_av4": float(target_cos),
                    "cos_sentence_vector": float(sentence_cos)}
        mask = frozenset()
        if rng.random() < 0.1:  # ~10% of pairs have no paraphrases available
            mask = frozenset(SUBSTITUTE_FEATURES)
        else:
            overlap = 0.5 + signal * 0.15 + rng.normal(scale=0.2)
            features.update(common=float(np.clip(overlap, 0, 1)),
                            gap=float(np.clip(overlap + rng.normal(scale=0.1), 0, 1)),
                            sub_cosine=float(np.clip(overlap, 0, 1)))
        pairs.append(InstancePair(pid, f"w{i % 9}", f"{pid}.a", f"{pid}.b",
                                  gold_label=label))
        fvs[pid] = FeatureVector(pid, features, mask=mask)
    return pairs, fvs


train = make_split("train", 400, 0)
dev = make_split("dev", 100, 400)
test = make_split("test", 100, 500)

result = run_binary(train, dev, test, config=LogisticConfig(seed=13))

print("dev accuracy per registered feature combination:")
for combo, acc in result.dev_accuracies.items():
    marker = " <- selected" if combo == result.chosen_features else ""
    print(f"  {', '.join(combo):<70} {acc:.3f}{marker}")

print(f"\ntest accuracy: {result.accuracy:.3f}")

masked_test = [p for p in test[0] if test[1][p.pair_id].mask]
print(f"{len(masked_test)} test pairs had no substitute annotation and were "
      "routed to the embedding-only back-off:")
for p in masked_test[:3]:
    fv = test[1][p.pair_id]
    main_model = result.model
    print(f"  {p.pair_id}: backoff prediction = {predict(main_model, fv):.3f} "
          f"(gold {p.gold_label})")

# determinism: same seed, same weights, bit for bit
again = run_binary(train, dev, test, config=LogisticConfig(seed=13))
assert again.decisions == result.decisions
print("\nre-running with the same seed reproduces every decision exactly")
