"""Vector representations of instances and cosine-based pair scoring.

Supported sources:

* ``static-average``     mean of static word vectors over the sentence or a window
* ``sif``                frequency-weighted average with the common component removed
* ``contextual-target``  the target token's contextual vector under a layer combination
* ``contextual-average`` mean of contextual token vectors over the sentence or a window
* ``sentence-vector``    a single precomputed per-instance vector (blank-slot context
                         vectors, doc2vec, sentence-encoder outputs)

Contextual sources read per-token vectors from bundle files; the bundle's
layer order follows the file (shallowest first), so ``top`` is the last
layer listed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .corpus import Instance, InstancePair
from .errors import DataError, NumericError

log = logging.getLogger(__name__)

SOURCES = ("static-average", "sif", "contextual-target", "contextual-average", "sentence-vector")
CONTEXTUAL_SOURCES = ("contextual-target", "contextual-average")
LAYER_COMBINATIONS = ("top", "average-of-layers", "concat-last-4", "second-to-last")
WINDOWED_SOURCES = ("static-average", "contextual-average")
WINDOW_SIZES = (2, 3, 4, 5)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingTable:
    """Static per-word vectors plus optional unigram probabilities."""

    dimension: int
    entries: Mapping[str, np.ndarray]
    unigram_probability: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.dimension <= 0:
            raise DataError(f"embedding dimension must be positive, got {self.dimension}")

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def vector(self, word: str) -> np.ndarray | None:
        return self.entries.get(word.lower())

    def phrase_vector(self, text: str) -> np.ndarray | None:
        """Vector for a possibly multiword entry: average of component vectors.

        Returns None when no component word has a vector.
        """
        direct = self.vector(text)
        if direct is not None:
            return direct
        found = [self.entries[p] for p in text.lower().split() if p in self.entries]
        if not found:
            return None
        return np.mean(found, axis=0)

    def probability(self, word: str) -> float:
        """Unigram probability; uniform over the vocabulary when no frequencies exist."""
        uniform = 1.0 / max(len(self.entries), 1)
        if self.unigram_probability is None:
            return uniform
        return self.unigram_probability.get(word.lower(), uniform)


@dataclass(frozen=True)
class ContextualVectorBundle:
    """Per-token encoder vectors for one instance, by layer, plus an optional
    single vector for the sentence with the target position blanked."""

    instance_id: str
    layers: Mapping[str, np.ndarray]  # layer name -> (n_tokens, dim), file order kept
    context_vector: np.ndarray | None = None

    def __post_init__(self):
        counts = {name: mat.shape[0] for name, mat in self.layers.items()}
        if len(set(counts.values())) > 1:
            raise DataError(
                f"bundle {self.instance_id!r}: layers disagree on token count {counts}"
            )

    @property
    def token_count(self) -> int:
        for mat in self.layers.values():
            return mat.shape[0]
        return 0

    def layer_order(self) -> list[str]:
        return list(self.layers)


@dataclass(frozen=True)
class Window:
    size: int
    include_target: bool = False

    def __post_init__(self):
        if self.size not in WINDOW_SIZES:
            raise DataError(f"window size must be one of {WINDOW_SIZES}, got {self.size}")


@dataclass(frozen=True)
class ReprSpec:
    """How to turn an instance into a vector."""

    source: str
    layer_combination: str | None = None
    window: Window | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise DataError(f"unknown representation source {self.source!r}")
        if self.source in CONTEXTUAL_SOURCES:
            if self.layer_combination not in LAYER_COMBINATIONS:
                raise DataError(
                    f"{self.source} requires a layer combination from {LAYER_COMBINATIONS}"
                )
        elif self.layer_combination is not None:
            raise DataError(f"layer combination is only valid for contextual sources")
        if self.window is not None and self.source not in WINDOWED_SOURCES:
            raise DataError(f"window is not supported for source {self.source!r}")


@dataclass(frozen=True)
class SifConfig:
    a: float = 1e-3
    component_scope: str = "whole-dataset"

    def __post_init__(self):
        if self.a <= 0:
            raise DataError(f"SIF weighting parameter must be positive, got {self.a}")
        if self.component_scope != "whole-dataset":
            raise DataError(f"unsupported SIF component scope {self.component_scope!r}")


@dataclass(frozen=True)
class SifState:
    """Fitted SIF state: the first principal direction and the weighting parameter."""

    direction: np.ndarray
    a: float = 1e-3


@dataclass(frozen=True)
class ReprResources:
    """Everything `represent` may need, shareable across threads."""

    instances: Mapping[str, Instance]
    table: EmbeddingTable | None = None
    bundles: Mapping[str, ContextualVectorBundle] | None = None
    sif: SifState | None = None


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_embeddings(path, frequencies_path=None) -> EmbeddingTable:
    """Load text-format embeddings: one "word v1 v2 ... vd" line per word.

    A duplicate word keeps its first vector. With `frequencies_path`
    (TSV word<TAB>count), counts are normalized into unigram probabilities.
    """
    entries: dict[str, np.ndarray] = {}
    dimension = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise DataError(f"{path}:{lineno}: expected 'word v1 ... vd'")
            word = parts[0].lower()
            try:
                vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector component") from None
            if dimension is None:
                dimension = vec.shape[0]
            elif vec.shape[0] != dimension:
                raise DataError(
                    f"{path}:{lineno}: dimension {vec.shape[0]} differs from {dimension}"
                )
            entries.setdefault(word, vec)
    if dimension is None:
        raise DataError(f"{path}: no embeddings found")
    probabilities = None
    if frequencies_path is not None:
        probabilities = load_word_frequencies(frequencies_path)
    return EmbeddingTable(dimension=dimension, entries=entries,
                          unigram_probability=probabilities)


def load_word_frequencies(path) -> dict[str, float]:
    """TSV word<TAB>count -> normalized probabilities."""
    counts: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 2:
                raise DataError(f"{path}:{lineno}: expected word<TAB>count")
            try:
                count = float(cols[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: count {cols[1]!r} is not a number") from None
            if count <= 0:
                raise DataError(f"{path}:{lineno}: count must be positive")
            counts[cols[0].lower()] = counts.get(cols[0].lower(), 0.0) + count
    total = sum(counts.values())
    if total <= 0:
        raise DataError(f"{path}: no usable frequencies")
    return {w: c / total for w, c in counts.items()}


def load_bundles(path) -> dict[str, ContextualVectorBundle]:
    """Load contextual bundle JSONL; layer order follows the file."""
    bundles: dict[str, ContextualVectorBundle] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            try:
                instance_id = str(obj["instance_id"])
                layers = {
                    str(name): np.asarray(rows, dtype=np.float64)
                    for name, rows in obj.get("layers", {}).items()
                }
            except (TypeError, ValueError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            for name, mat in layers.items():
                if mat.ndim != 2:
                    raise DataError(
                        f"{path}:{lineno}: layer {name!r} is not a rectangular matrix"
                    )
            context_vector = None
            if obj.get("context_vector") is not None:
                context_vector = np.asarray(obj["context_vector"], dtype=np.float64)
                if context_vector.ndim != 1:
                    raise DataError(f"{path}:{lineno}: context_vector is not a flat vector")
            if instance_id in bundles:
                raise DataError(f"{path}:{lineno}: duplicate instance_id {instance_id!r}")
            try:
                bundles[instance_id] = ContextualVectorBundle(
                    instance_id=instance_id, layers=layers, context_vector=context_vector
                )
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return bundles


def serialize_bundles(bundles: Mapping[str, ContextualVectorBundle] | Iterable[ContextualVectorBundle]) -> str:
    items = bundles.values() if isinstance(bundles, Mapping) else bundles
    compact = {"separators": (",", ":")}
    lines = []
    for b in items:
        layers = ",".join(
            "%s:%s" % (json.dumps(name),
                       json.dumps([[float(x) for x in row] for row in mat], **compact))
            for name, mat in b.layers.items()
        )
        parts = ['"instance_id":%s' % json.dumps(b.instance_id), '"layers":{%s}' % layers]
        if b.context_vector is not None:
            parts.append('"context_vector":%s'
                         % json.dumps([float(x) for x in b.context_vector], **compact))
        lines.append("{%s}" % ",".join(parts))
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def window_indices(instance: Instance, w: int, include_target: bool) -> list[int]:
    """Token indices within w positions of the target, truncated at the sentence
    boundaries, optionally without the target itself."""
    if w < 1:
        raise ValueError(f"window size must be >= 1, got {w}")
    t = instance.target_index
    lo = max(0, t - w)
    hi = min(len(instance.tokens) - 1, t + w)
    return [i for i in range(lo, hi + 1) if include_target or i != t]


def combine_layers(bundle: ContextualVectorBundle, combination: str) -> np.ndarray:
    """Collapse a bundle's layers into one (n_tokens, dim') matrix.

    ``concat-last-4`` concatenates the four deepest layers, deepest first.
    """
    order = bundle.layer_order()
    if not order:
        raise DataError(f"bundle {bundle.instance_id!r} has no layers")
    if combination == "top":
        return bundle.layers[order[-1]]
    if combination == "second-to-last":
        if len(order) < 2:
            raise DataError(f"bundle {bundle.instance_id!r}: second-to-last needs >= 2 layers")
        return bundle.layers[order[-2]]
    if combination == "average-of-layers":
        return np.mean([bundle.layers[name] for name in order], axis=0)
    if combination == "concat-last-4":
        if len(order) < 4:
            raise DataError(f"bundle {bundle.instance_id!r}: concat-last-4 needs >= 4 layers")
        return np.concatenate([bundle.layers[name] for name in order[-1:-5:-1]], axis=1)
    raise DataError(f"unknown layer combination {combination!r}")


def _selected_indices(instance: Instance, spec: ReprSpec) -> list[int]:
    if spec.window is None:
        return list(range(len(instance.tokens)))
    return window_indices(instance, spec.window.size, spec.window.include_target)


def sif_weighted_average(instance: Instance, table: EmbeddingTable, a: float) -> np.ndarray:
    """Mean of a/(a+p(w))-weighted vectors over the in-vocabulary tokens."""
    found = []
    for token in instance.tokens:
        vec = table.vector(token)
        if vec is not None:
            found.append((a / (a + table.probability(token))) * vec)
    if not found:
        raise DataError(f"empty representation for instance {instance.instance_id!r}")
    return np.mean(found, axis=0)


def represent(
    instance: Instance,
    spec: ReprSpec,
    table: EmbeddingTable | None = None,
    bundle: ContextualVectorBundle | None = None,
    sif: SifState | None = None,
) -> np.ndarray:
    """Build the vector for one instance under `spec`.

    Out-of-vocabulary tokens are skipped; raising on zero found tokens keeps
    silent zero vectors out of downstream cosines.
    """
    if spec.source == "static-average":
        if table is None:
            raise DataError("static-average requires an embedding table")
        indices = _selected_indices(instance, spec)
        found = [v for v in (table.vector(instance.tokens[i]) for i in indices) if v is not None]
        if not found:
            raise DataError(f"empty representation for instance {instance.instance_id!r}")
        return np.mean(found, axis=0)

    if spec.source == "sif":
        if table is None or sif is None:
            raise DataError("sif requires an embedding table and a fitted SIF state")
        return apply_sif(sif_weighted_average(instance, table, sif.a), sif)

    if spec.source in CONTEXTUAL_SOURCES:
        if bundle is None:
            raise DataError(
                f"{spec.source} requires a contextual bundle for {instance.instance_id!r}"
            )
        if bundle.token_count != len(instance.tokens):
            raise DataError(
                f"bundle {instance.instance_id!r} has {bundle.token_count} token vectors "
                f"for {len(instance.tokens)} tokens"
            )
        combined = combine_layers(bundle, spec.layer_combination)
        if spec.source == "contextual-target":
            return np.array(combined[instance.target_index], dtype=np.float64)
        indices = _selected_indices(instance, spec)
        if not indices:
            raise DataError(f"empty representation for instance {instance.instance_id!r}")
        return np.mean(combined[indices], axis=0)

    if spec.source == "sentence-vector":
        if bundle is None or bundle.context_vector is None:
            raise DataError(
                f"no sentence vector available for instance {instance.instance_id!r}"
            )
        return np.array(bundle.context_vector, dtype=np.float64)

    raise DataError(f"unknown representation source {spec.source!r}")


def fit_sif(sentence_vectors, config: SifConfig = SifConfig()) -> SifState:
    """First principal direction of the stacked sentence vectors.

    Power iteration on the Gram product X^T(Xv), so the d x d covariance is
    never formed. The sign is fixed so the largest-magnitude coordinate is
    positive.
    """
    X = np.asarray(list(sentence_vectors), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("SIF fitting needs at least 2 sentence vectors")
    if not np.any(X):
        raise NumericError("degenerate SIF fit: all sentence vectors are zero")

    norms = np.linalg.norm(X, axis=1)
    v = X[int(np.argmax(norms))].copy()
    v /= np.linalg.norm(v)
    for _ in range(5000):
        w = X.T @ (X @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector landed in the null space; restart off a basis vector
            v = np.zeros_like(v)
            v[0] = 1.0
            continue
        w /= norm
        if np.linalg.norm(w - v) < 1e-13:
            v = w
            break
        v = w

    peak = int(np.argmax(np.abs(v)))
    if v[peak] < 0:
        v = -v
    return SifState(direction=v, a=config.a)


def fit_sif_over_instances(
    instances: Iterable[Instance], table: EmbeddingTable, config: SifConfig = SifConfig()
) -> SifState:
    """Fit the common component once over a whole dataset's weighted averages."""
    vectors = [sif_weighted_average(inst, table, config.a) for inst in instances]
    return fit_sif(vectors, config)


def apply_sif(v: np.ndarray, state: SifState) -> np.ndarray:
    """Remove the fitted common component: v - u (u^T v)."""
    u = state.direction
    v = np.asarray(v, dtype=np.float64)
    if v.shape != u.shape:
        raise DataError(f"SIF dimension mismatch: vector {v.shape} vs direction {u.shape}")
    return v - u * (u @ v)


def cosine(x, y) -> float:
    """Cosine similarity; zero-norm inputs score 0 (logged) instead of raising."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"cosine dimension mismatch: {x.shape} vs {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        log.warning("cosine of a zero-norm vector, returning 0")
        return 0.0
    return float(np.dot(x, y) / (nx * ny))


def represent_with_resources(instance_id: str, spec: ReprSpec, res: ReprResources) -> np.ndarray:
    instance = res.instances.get(instance_id)
    if instance is None:
        raise DataError(f"unknown instance {instance_id!r}")
    bundle = res.bundles.get(instance_id) if res.bundles is not None else None
    return represent(instance, spec, table=res.table, bundle=bundle, sif=res.sif)


def direct_usim(
    pairs: Iterable[InstancePair], spec: ReprSpec, res: ReprResources
) -> dict[str, float]:
    """Cosine of the two instances' representations, per pair."""
    scores: dict[str, float] = {}
    for pair in pairs:
        try:
            a = represent_with_resources(pair.first, spec, res)
            b = represent_with_resources(pair.second, spec, res)
            scores[pair.pair_id] = cosine(a, b)
        except DataError as exc:
            raise DataError(f"pair {pair.pair_id!r}: {exc}") from exc
    return scores
