"""Per-pair numeric features from substitute annotations and representation cosines.

The graded default schema is ``cos_contextual_target_av4, cos_sentence_vector,
common, gap, sub_cosine``. Substitute features carry a provenance tag (gold,
auto-curated, auto-paraphrase) and are masked when a pair has no usable
annotation, which later routes predictions to a back-off model.

Feature matrices serialize to TSV with a fixed header; masked entries
are written as ``NA``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import InstancePair, SubstituteSet
from .errors import DataError
from .representations import (
    EmbeddingTable,
    ReprResources,
    ReprSpec,
    cosine,
    represent_with_resources,
)
from .substitutes import SubstituteRanking

SUBSTITUTE_FEATURES = ("common", "gap", "sub_cosine")
COS_CONTEXTUAL_TARGET_AV4 = "cos_contextual_target_av4"
COS_SENTENCE_VECTOR = "cos_sentence_vector"
GRADED_SCHEMA = (COS_CONTEXTUAL_TARGET_AV4, COS_SENTENCE_VECTOR) + SUBSTITUTE_FEATURES
PROVENANCES = ("gold", "auto-curated", "auto-paraphrase")


def embedding_only(schema: Sequence[str]) -> tuple[str, ...]:
    """The schema with the substitute-based features removed."""
    return tuple(name for name in schema if name not in SUBSTITUTE_FEATURES)


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values for one pair; `mask` lists the unavailable ones."""

    pair_id: str
    features: Mapping[str, float]
    provenance: str | None = None
    mask: frozenset[str] = frozenset()

    def __post_init__(self):
        overlap = self.mask & set(self.features)
        if overlap:
            raise DataError(f"pair {self.pair_id!r}: masked features have values: {overlap}")

    def value(self, name: str) -> float | None:
        return self.features.get(name)

    def is_masked(self, name: str) -> bool:
        return name in self.mask

    def names(self) -> set[str]:
        return set(self.features) | set(self.mask)


@dataclass(frozen=True)
class EmbeddingFeature:
    """A named representation-cosine feature bound to its resources."""

    name: str
    spec: ReprSpec
    resources: ReprResources


# ---------------------------------------------------------------------------
# Substitute-based features
# ---------------------------------------------------------------------------

def common_substitutes(a: SubstituteSet, b: SubstituteSet) -> float:
    """Jaccard overlap of the substitute word sets; 0 when both are empty."""
    wa, wb = a.words, b.words
    union = wa | wb
    if not union:
        return 0.0
    return len(wa & wb) / len(union)


def _system_order(system) -> list[str]:
    """The ranked word order of a system annotation.

    Accepts a SubstituteRanking (already ordered) or a SubstituteSet, whose
    order is weight descending with lexicographic tie-break.
    """
    if isinstance(system, SubstituteRanking):
        return system.words
    if isinstance(system, SubstituteSet):
        return system.ordered_words()
    return list(system)


def gap(system, gold: SubstituteSet) -> float:
    """Generalized Average Precision of a system ranking against weighted gold.

    With x_i the gold weight of the system item at rank i (0 when absent) and
    y the gold weights sorted descending:

        GAP = [sum over i with x_i > 0 of (1/i) * sum_{j<=i} x_j]
              / [sum over i of (1/i) * sum_{j<=i} y_j]

    Items absent from gold contribute x_i = 0 but still advance the rank.
    Returns 0 for empty gold or an empty intersection.
    """
    for word, weight in gold.entries:
        if weight < 0:
            raise DataError(f"negative gold weight for {word!r}")
    order = _system_order(system)
    if not gold.entries or not order:
        return 0.0

    y = sorted((w for _, w in gold.entries), reverse=True)
    denominator = 0.0
    prefix = 0.0
    for i, weight in enumerate(y, start=1):
        prefix += weight
        denominator += prefix / i
    if denominator == 0.0:
        return 0.0

    numerator = 0.0
    prefix = 0.0
    for i, word in enumerate(order, start=1):
        x = gold.weight_of(word)
        prefix += x
        if x > 0:
            numerator += prefix / i
    return numerator / denominator


def gap_bidirectional(a_rank, a_set: SubstituteSet, b_rank, b_set: SubstituteSet) -> float:
    """Mean of GAP taken in both directions between two annotated instances."""
    return 0.5 * (gap(a_rank, b_set) + gap(b_rank, a_set))


def substitute_cosine(
    a: SubstituteSet, b: SubstituteSet, table: EmbeddingTable
) -> float | None:
    """Mean pairwise cosine over the cross product of embeddable substitutes.

    Returns None (to be masked) when either side has no embeddable substitute.
    """
    vectors_a = [v for v in (table.phrase_vector(w) for w in sorted(a.words)) if v is not None]
    vectors_b = [v for v in (table.phrase_vector(w) for w in sorted(b.words)) if v is not None]
    if not vectors_a or not vectors_b:
        return None
    total = 0.0
    for va in vectors_a:
        for vb in vectors_b:
            total += cosine(va, vb)
    return total / (len(vectors_a) * len(vectors_b))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def build_features(
    pair: InstancePair,
    embedding_features: Sequence[EmbeddingFeature],
    substitutes: Mapping[str, SubstituteSet] | None = None,
    table: EmbeddingTable | None = None,
    provenance: str | None = None,
) -> FeatureVector:
    """One cosine feature per representation spec plus the substitute features.

    Substitute features are included whenever a `substitutes` mapping is given
    and masked for pairs without usable annotations on both sides; without a
    mapping they are omitted from the vector entirely.
    """
    values: dict[str, float] = {}
    mask: set[str] = set()

    for feature in embedding_features:
        try:
            va = represent_with_resources(pair.first, feature.spec, feature.resources)
            vb = represent_with_resources(pair.second, feature.spec, feature.resources)
        except DataError as exc:
            raise DataError(f"pair {pair.pair_id!r}, feature {feature.name!r}: {exc}") from exc
        values[feature.name] = cosine(va, vb)

    if substitutes is not None:
        a = substitutes.get(pair.first)
        b = substitutes.get(pair.second)
        if a is None or b is None or not a.entries or not b.entries:
            mask.update(SUBSTITUTE_FEATURES)
        else:
            values["common"] = common_substitutes(a, b)
            values["gap"] = gap_bidirectional(a, a, b, b)
            if table is None:
                mask.add("sub_cosine")
            else:
                sub_cos = substitute_cosine(a, b, table)
                if sub_cos is None:
                    mask.add("sub_cosine")
                else:
                    values["sub_cosine"] = sub_cos

    return FeatureVector(
        pair_id=pair.pair_id, features=values, provenance=provenance, mask=frozenset(mask)
    )


def build_feature_matrix(
    pairs: Sequence[InstancePair],
    embedding_features: Sequence[EmbeddingFeature],
    substitutes: Mapping[str, SubstituteSet] | None = None,
    table: EmbeddingTable | None = None,
    provenance: str | None = None,
    jobs: int = 1,
) -> list[FeatureVector]:
    """build_features over many pairs, optionally in parallel, order preserved."""
    from .util import parallel_map

    def one(pair):
        return build_features(pair, embedding_features, substitutes=substitutes,
                              table=table, provenance=provenance)

    return parallel_map(one, pairs, jobs=jobs)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def serialize_feature_matrix(fvs: Iterable[FeatureVector], schema: Sequence[str]) -> str:
    """TSV with a header line; masked or absent entries become NA."""
    lines = ["pair_id\t" + "\t".join(schema)]
    for fv in fvs:
        row = [fv.pair_id]
        for name in schema:
            value = fv.features.get(name)
            row.append("NA" if value is None else repr(float(value)))
        lines.append("\t".join(row))
    return "".join(line + "\n" for line in lines)


def load_feature_matrix(path) -> tuple[list[str], list[FeatureVector]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataError(f"{path}: empty feature matrix")
    header = lines[0].split("\t")
    if header[0] != "pair_id" or len(header) < 2:
        raise DataError(f"{path}:1: header must start with pair_id and name features")
    schema = header[1:]
    fvs = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split("\t")
        if len(cols) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(cols)}")
        pair_id = cols[0]
        if pair_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate pair_id {pair_id!r}")
        seen.add(pair_id)
        values: dict[str, float] = {}
        mask: set[str] = set()
        for name, cell in zip(schema, cols[1:]):
            if cell == "NA":
                mask.add(name)
            else:
                try:
                    values[name] = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad value {cell!r} for {name!r}") from None
        fvs.append(FeatureVector(pair_id=pair_id, features=values, mask=frozenset(mask)))
    return schema, fvs
