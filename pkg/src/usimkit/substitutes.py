"""Candidate substitute ranking, ranking filters, and filter evaluation.

Candidates are scored against a blank-slot context vector. In
``context-only`` mode (curated pools) a substitute scores by its shifted
context cosine, (cos + 1) / 2; in ``target-and-context`` mode (noisy
paraphrase pools) that is multiplied by the shifted substitute-target
cosine, which pushes loose paraphrases down. Both scores land in [0,1].

Every filter returns a prefix of its input ranking, order and scores
untouched; all filters except the score-gap cut are also idempotent (the
score-gap cut excludes the gap pair's lower element, so reapplying it to
its own output finds a new largest gap).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .corpus import CandidatePool, Instance, ParaphraseStore, SubstituteSet
from .errors import DataError
from .representations import EmbeddingTable, cosine

FILTER_KINDS = ("ppdb-adjacent", "embedding-adjacent", "score-gap", "top-k")


@dataclass(frozen=True)
class SubstituteRanking:
    """Scored candidates for one instance, best first."""

    instance_id: str
    items: tuple[tuple[str, float], ...]

    def __post_init__(self):
        words = [w for w, _ in self.items]
        if len(set(words)) != len(words):
            raise DataError(f"ranking for {self.instance_id!r}: duplicate words")
        scores = [s for _, s in self.items]
        for s in scores:
            if not 0.0 <= s <= 1.0:
                raise DataError(f"ranking for {self.instance_id!r}: score {s} outside [0,1]")
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise DataError(f"ranking for {self.instance_id!r}: scores must be non-increasing")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def words(self) -> list[str]:
        return [w for w, _ in self.items]

    def prefix(self, n: int) -> "SubstituteRanking":
        return SubstituteRanking(self.instance_id, self.items[:n])

    def to_substitute_set(self) -> SubstituteSet:
        """Ranking as a weighted set (score as weight), the on-disk form."""
        return SubstituteSet(instance_id=self.instance_id, entries=self.items)


@dataclass(frozen=True)
class FilterConfig:
    """One of the four ranking filters with its parameter."""

    kind: str
    T: float = 0.2  # embedding-adjacent only
    k: int = 5      # top-k only

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise DataError(f"unknown filter kind {self.kind!r}; expected one of {FILTER_KINDS}")
        if not 0.0 <= self.T < 1.0:
            raise DataError(f"filter threshold T must be in [0,1), got {self.T}")
        if self.k < 1:
            raise DataError(f"filter k must be >= 1, got {self.k}")

    @classmethod
    def parse(cls, text: str) -> "FilterConfig":
        """Parse CLI syntax like "embedding:T=0.2", "top-k:k=10", "ppdb", "score-gap"."""
        name, _, params = text.partition(":")
        aliases = {"ppdb": "ppdb-adjacent", "embedding": "embedding-adjacent"}
        kind = aliases.get(name, name)
        kwargs = {}
        if params:
            for item in params.split(","):
                key, _, value = item.partition("=")
                if key == "T":
                    kwargs["T"] = float(value)
                elif key == "k":
                    kwargs["k"] = int(value)
                else:
                    raise DataError(f"unknown filter parameter {key!r} in {text!r}")
        return cls(kind=kind, **kwargs)


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------

def fit_score(cos_st: float, cos_sc: float) -> float:
    """Fit score from the two shifted cosines; monotone in each factor."""
    return ((cos_st + 1.0) / 2.0) * ((cos_sc + 1.0) / 2.0)


def rank_candidates(
    instance: Instance,
    pool: CandidatePool,
    table: EmbeddingTable,
    context_vector: np.ndarray,
    mode: str = "context-only",
) -> SubstituteRanking:
    """Score the instance's candidate pool against the context vector.

    Candidates without any vector are skipped; multiword candidates use the
    average of their component vectors. Ties break lexicographically.
    """
    if mode not in ("context-only", "target-and-context"):
        raise DataError(f"unknown ranking mode {mode!r}")
    candidates = pool.candidates_for(instance.lemma, instance.pos)
    target_vector = None
    if mode == "target-and-context":
        target_vector = table.phrase_vector(instance.lemma)
        if target_vector is None:
            raise DataError(
                f"target {instance.lemma!r} has no vector; target-and-context scoring needs one"
            )
    scored = []
    for candidate in sorted(candidates):
        if candidate == instance.lemma:
            continue
        vec = table.phrase_vector(candidate)
        if vec is None:
            continue
        cos_sc = cosine(vec, context_vector)
        if mode == "context-only":
            score = (cos_sc + 1.0) / 2.0
        else:
            score = fit_score(cosine(vec, target_vector), cos_sc)
        scored.append((candidate, score))
    if not scored:
        raise DataError(f"no scorable candidates for instance {instance.instance_id!r}")
    scored.sort(key=lambda item: (-item[1], item[0]))
    return SubstituteRanking(instance_id=instance.instance_id, items=tuple(scored))


def context_vector_for(
    instance: Instance,
    table: EmbeddingTable | None = None,
    bundle=None,
) -> tuple[np.ndarray, str]:
    """The blank-slot vector C for an instance, with its provenance.

    Prefers an encoder-produced context vector from the bundle; otherwise
    falls back to the static average over the target-excluded sentence,
    which degrades ranking quality and is flagged in the returned provenance.
    """
    if bundle is not None and bundle.context_vector is not None:
        return np.asarray(bundle.context_vector, dtype=np.float64), "encoder"
    if table is None:
        raise DataError(
            f"no context vector for instance {instance.instance_id!r} and no "
            "embedding table to fall back on"
        )
    tokens = [t for i, t in enumerate(instance.tokens) if i != instance.target_index]
    found = [v for v in (table.vector(t) for t in tokens) if v is not None]
    if not found:
        raise DataError(f"empty context representation for {instance.instance_id!r}")
    return np.mean(found, axis=0), "static-average-fallback"


# ---------------------------------------------------------------------------
# Filters (each returns a prefix of its input)
# ---------------------------------------------------------------------------

def filter_ppdb(r: SubstituteRanking, store: ParaphraseStore) -> SubstituteRanking:
    """Cut at the first adjacent pair that is not a known paraphrase pair."""
    if len(r) <= 1:
        return r
    words = r.words
    for i in range(len(words) - 1):
        if not store.contains(words[i], words[i + 1]):
            return r.prefix(i + 1)
    return r


def _neighbor_similarity(a: str, b: str, table: EmbeddingTable) -> float:
    va = table.phrase_vector(a)
    vb = table.phrase_vector(b)
    if va is None or vb is None:
        return 0.0
    return cosine(va, vb)


def filter_embedding(r: SubstituteRanking, table: EmbeddingTable, T: float) -> SubstituteRanking:
    """Adjacent-similarity filter with an adaptive threshold.

    cos(s1,s2) below T means no reference similarity can be established and
    only s1 survives. Otherwise S = cos(s1,s2) and the scan cuts at the first
    i >= 2 with cos(s_i, s_{i+1}) < (T+S)/2. Comparisons are strict, so an
    exactly-at-threshold similarity passes.
    """
    if len(r) < 2:
        return r
    words = r.words
    first = _neighbor_similarity(words[0], words[1], table)
    if first < T:
        return r.prefix(1)
    m = (T + first) / 2.0
    for i in range(1, len(words) - 1):
        if _neighbor_similarity(words[i], words[i + 1], table) < m:
            return r.prefix(i + 1)
    return r


def filter_score_gap(r: SubstituteRanking) -> SubstituteRanking:
    """Cut after the largest drop between adjacent scores (first drop on ties)."""
    if len(r) < 2:
        return r
    scores = [s for _, s in r.items]
    gaps = [scores[i] - scores[i + 1] for i in range(len(scores) - 1)]
    cut = int(np.argmax(gaps))  # first occurrence on ties
    return r.prefix(cut + 1)


def filter_top_k(r: SubstituteRanking, k: int) -> SubstituteRanking:
    if k < 1:
        raise DataError(f"top-k filter needs k >= 1, got {k}")
    return r.prefix(min(k, len(r)))


def apply_filter(
    r: SubstituteRanking,
    config: FilterConfig,
    table: EmbeddingTable | None = None,
    store: ParaphraseStore | None = None,
) -> SubstituteRanking:
    if config.kind == "ppdb-adjacent":
        if store is None:
            raise DataError("ppdb-adjacent filter needs a paraphrase store")
        return filter_ppdb(r, store)
    if config.kind == "embedding-adjacent":
        if table is None:
            raise DataError("embedding-adjacent filter needs an embedding table")
        return filter_embedding(r, table, config.T)
    if config.kind == "score-gap":
        return filter_score_gap(r)
    if config.kind == "top-k":
        return filter_top_k(r, config.k)
    raise DataError(f"unknown filter kind {config.kind!r}")


# ---------------------------------------------------------------------------
# Batch annotation
# ---------------------------------------------------------------------------

def annotate_all(
    instances: Mapping[str, Instance],
    pool: CandidatePool,
    table: EmbeddingTable,
    bundles: Mapping | None = None,
    mode: str = "context-only",
    filter_config: FilterConfig | None = None,
    store: ParaphraseStore | None = None,
    jobs: int = 1,
) -> tuple[dict[str, SubstituteRanking], dict[str, str], int]:
    """Rank and filter every instance that has a pool and scorable candidates.

    Returns (rankings, skipped instance -> reason, count of instances whose
    context vector fell back to the static average).
    """
    from .util import parallel_map

    bundles = bundles or {}
    skipped: dict[str, str] = {}
    fallbacks = [0]

    def one(instance_id: str):
        instance = instances[instance_id]
        if (instance.lemma, instance.pos) not in pool:
            return instance_id, None, "no candidate pool"
        context, provenance = context_vector_for(
            instance, table=table, bundle=bundles.get(instance_id)
        )
        if provenance != "encoder":
            fallbacks[0] += 1
        try:
            ranking = rank_candidates(instance, pool, table, context, mode=mode)
        except DataError as exc:
            return instance_id, None, str(exc)
        if filter_config is not None:
            ranking = apply_filter(ranking, filter_config, table=table, store=store)
        return instance_id, ranking, None

    rankings: dict[str, SubstituteRanking] = {}
    for instance_id, ranking, reason in parallel_map(one, sorted(instances), jobs=jobs):
        if ranking is None:
            skipped[instance_id] = reason
        else:
            rankings[instance_id] = ranking
    return rankings, skipped, fallbacks[0]


# ---------------------------------------------------------------------------
# Filter evaluation
# ---------------------------------------------------------------------------

def evaluate_filter(
    predicted: Mapping[str, SubstituteRanking],
    gold: Mapping[str, SubstituteSet],
) -> tuple[float, float]:
    """Micro-averaged (F1, false-positive ratio) of kept words vs gold words."""
    tp = fp = fn = 0
    for instance_id, ranking in predicted.items():
        if instance_id not in gold:
            raise DataError(f"no gold substitutes for evaluated instance {instance_id!r}")
        predicted_words = set(ranking.words)
        gold_words = set(gold[instance_id].words)
        tp += len(predicted_words & gold_words)
        fp += len(predicted_words - gold_words)
        fn += len(gold_words - predicted_words)
    if tp == fp == fn == 0:
        raise DataError("nothing to evaluate: no predicted or gold substitutes")
    f1 = 2.0 * tp / (2.0 * tp + fp + fn)
    fp_ratio = fp / (tp + fp) if (tp + fp) > 0 else 0.0
    return f1, fp_ratio
