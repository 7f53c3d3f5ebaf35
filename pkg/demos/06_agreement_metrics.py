"""Annotation diagnostics: rank correlation with ties, inter-annotator
agreement, and the proportion of mid-range judgments.

Lemmas whose annotators disagree (low agreement) tend to collect mid-range
scores (high mid proportion); the synthetic data below makes that visible.
"""

import numpy as np

from usimkit.corpus import AnnotatorJudgments
from usimkit.errors import UndefinedMetricError
from usimkit.metrics import accuracy, spearman, uiaa, umid

print("== rank correlation with ties ==")
x = [1, 2, 2, 4]
y = [1, 3, 2, 4]
print(f"spearman({x}, {y}) = {spearman(x, y):.6f}  (average ranks handle the tie)")
print(f"reversed lists: {spearman([1, 2, 3], [3, 2, 1]):+.1f}")
try:
    spearman([2, 2, 2], [1, 2, 3])
except UndefinedMetricError as exc:
    print(f"constant input -> excluded, not zero: {exc}")

print("\n== accuracy ==")
print("3 of 4 match:", accuracy(["T", "F", "T", "T"], ["T", "F", "T", "F"]))

rng = np.random.default_rng(2)
pair_ids = [f"p{i}" for i in range(12)]


def lemma_judgments(lemma, disagreement):
    """Three annotators scoring the same pairs; higher disagreement pushes
    scores toward the middle of the 1..5 scale and shuffles the ranking."""
    base = rng.uniform(1, 5, size=len(pair_ids))
    scores = {}
    for ann in ("a1", "a2", "a3"):
        noisy = base + rng.normal(scale=disagreement, size=len(base))
        squeezed = 3.0 + (noisy - 3.0) / (1.0 + disagreement)
        for pid, s in zip(pair_ids, np.clip(np.round(squeezed), 1, 5)):
            scores[(ann, pid)] = float(s)
    return AnnotatorJudgments(lemma=lemma, scores=scores)


print("\n== agreement vs mid-range judgments ==")
print(f"{'lemma':<10} {'agreement':>10} {'mid-range':>10}")
for lemma, disagreement in [("easy", 0.1), ("medium", 1.0), ("fuzzy", 3.0)]:
    j = lemma_judgments(lemma, disagreement)
    print(f"{lemma:<10} {uiaa(j):>10.3f} {umid(j):>10.3f}")
print("agreement falls as judgments crowd into the 2..4 band")
