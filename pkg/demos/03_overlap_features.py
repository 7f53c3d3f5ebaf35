"""The three substitute-overlap features that feed the supervised models.

Two instances whose annotators proposed similar substitutes are probably
similar usages. This script shows the shared-substitute proportion, the
weighted rank agreement (GAP, taken in both directions), and the average
cross-set vector similarity, on annotations of decreasing overlap.
"""

import numpy as np

from usimkit.corpus import SubstituteSet
from usimkit.features import (
    common_substitutes,
    gap,
    gap_bidirectional,
    substitute_cosine,
)
from usimkit.representations import EmbeddingTable

words = {
    "newspaper": [0.9, 0.1], "journal": [0.88, 0.12], "press": [0.85, 0.2],
    "essay": [0.7, 0.3], "bus": [0.1, 0.9], "carriage": [0.15, 0.85],
}
table = EmbeddingTable(2, {w: np.array(v, float) for w, v in words.items()})

news_a = SubstituteSet("a", (("newspaper", 3.0), ("journal", 2.0), ("press", 1.0)))
news_b = SubstituteSet("b", (("newspaper", 2.0), ("journal", 1.0), ("essay", 1.0)))
vehicle = SubstituteSet("c", (("bus", 3.0), ("carriage", 1.0)))

print("annotations:")
for s in (news_a, news_b, vehicle):
    print(f"  {s.instance_id}: {dict(s.entries)}")

for left, right, label in [(news_a, news_b, "news vs news"),
                           (news_a, vehicle, "news vs vehicle")]:
    print(f"\n== {label} ==")
    print(f"shared substitutes (Jaccard): {common_substitutes(left, right):.3f}")
    # gold annotations act as their own ranking, ordered by annotator count
    print(f"GAP {left.instance_id}->{right.instance_id}: {gap(left, right):.3f}")
    print(f"GAP {right.instance_id}->{left.instance_id}: {gap(right, left):.3f}")
    both = gap_bidirectional(left, left, right, right)
    print(f"GAP both directions: {both:.3f}")
    print(f"average substitute cosine: {substitute_cosine(left, right, table):.3f}")

print("\nGAP rewards putting heavily-proposed substitutes first:")
gold = SubstituteSet("gold", (("newspaper", 3.0), ("journal", 1.0)))
good_order = SubstituteSet("sys1", (("newspaper", 0.9), ("journal", 0.5)))
bad_order = SubstituteSet("sys2", (("journal", 0.9), ("newspaper", 0.5)))
print(f"  heavy item first: {gap(good_order, gold):.3f}")
print(f"  heavy item last:  {gap(bad_order, gold):.3f}")
