"""Datasets and lexical resources: loading, validation, serialization, pairing.

File formats (all UTF-8, LF line endings, words canonically lower-case):

* instances            JSONL ``{"instance_id","lemma","pos","tokens":[...],"target_index"}``
* usim-pairs/wic-pairs TSV ``pair_id  lemma  instance_1  instance_2  gold``
                       (gold is a float in [1,5], "T", "F", or "-")
* gold-substitutes     JSONL ``{"instance_id","substitutes":[{"word","weight"}]}``
* candidate-pool       TSV ``lemma.pos  candidate`` (one candidate per line)
* paraphrases          TSV ``word1  word2  score`` (score optional, "-" allowed)
* annotator-judgments  TSV ``lemma  pair_id  annotator_id  score``

Loaders lower-case all lexical material (lemmas, tokens, substitutes,
candidates, paraphrase words) at ingestion; identifiers are kept verbatim.
Serializers emit canonical form, so ``serialize(load(path)) == read(path)``
holds byte-for-byte for canonically written files.

All returned collections are immutable after loading and safe to share
across worker threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError

PAIR_KINDS = ("usim-pairs", "wic-pairs")
DATASET_KINDS = PAIR_KINDS + (
    "instances",
    "gold-substitutes",
    "candidate-pool",
    "paraphrases",
    "annotator-judgments",
)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    """One tokenized sentence with a marked target word occurrence."""

    instance_id: str
    lemma: str
    pos: str
    tokens: tuple[str, ...]
    target_index: int

    def __post_init__(self):
        if not self.tokens:
            raise DataError(f"instance {self.instance_id!r}: tokens empty")
        if not 0 <= self.target_index < len(self.tokens):
            raise DataError(
                f"instance {self.instance_id!r}: target index out of range "
                f"({self.target_index} not in [0, {len(self.tokens)}))"
            )

    @property
    def target_token(self) -> str:
        return self.tokens[self.target_index]


@dataclass(frozen=True)
class InstancePair:
    """Two instances of the same lemma, optionally labeled.

    Labeled pairs carry exactly one of ``gold_score`` (graded, in [1,5]) or
    ``gold_label`` ("T"/"F"); prediction-only pairs carry neither.
    """

    pair_id: str
    lemma: str
    first: str
    second: str
    gold_score: float | None = None
    gold_label: str | None = None

    def __post_init__(self):
        if self.gold_score is not None and self.gold_label is not None:
            raise DataError(f"pair {self.pair_id!r}: both gold score and label present")
        if self.gold_score is not None and not 1.0 <= self.gold_score <= 5.0:
            raise DataError(f"pair {self.pair_id!r}: gold score {self.gold_score} outside [1,5]")
        if self.gold_label is not None and self.gold_label not in ("T", "F"):
            raise DataError(f"pair {self.pair_id!r}: gold label must be T or F")

    @property
    def labeled(self) -> bool:
        return self.gold_score is not None or self.gold_label is not None


@dataclass(frozen=True)
class SubstituteSet:
    """Weighted substitutes for one instance.

    For gold data the weight is the number of annotators who proposed the
    substitute; for automatic annotations it is the ranking score.
    """

    instance_id: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        words = [w for w, _ in self.entries]
        if len(set(words)) != len(words):
            raise DataError(f"substitutes for {self.instance_id!r}: duplicate words")
        for word, weight in self.entries:
            if weight < 0:
                raise DataError(
                    f"substitutes for {self.instance_id!r}: negative weight for {word!r}"
                )

    @property
    def words(self) -> frozenset[str]:
        return frozenset(w for w, _ in self.entries)

    def weight_of(self, word: str) -> float:
        for w, weight in self.entries:
            if w == word:
                return weight
        return 0.0

    def ordered_words(self) -> list[str]:
        """Words by weight descending, ties broken lexicographically."""
        return [w for w, _ in sorted(self.entries, key=lambda e: (-e[1], e[0]))]


@dataclass(frozen=True)
class CandidatePool:
    """Closed substitute candidate sets keyed by (lemma, pos)."""

    pools: Mapping[tuple[str, str], frozenset[str]]

    def candidates_for(self, lemma: str, pos: str) -> frozenset[str]:
        key = (lemma.lower(), pos.lower())
        try:
            return self.pools[key]
        except KeyError:
            raise DataError(f"no candidate pool for {key[0]}.{key[1]}") from None

    def __contains__(self, key: tuple[str, str]) -> bool:
        return (key[0].lower(), key[1].lower()) in self.pools


@dataclass(frozen=True)
class ParaphraseStore:
    """Unordered word pairs with optional quality scores; membership is symmetric."""

    pairs: Mapping[tuple[str, str], float | None]

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        a, b = a.lower(), b.lower()
        return (a, b) if a <= b else (b, a)

    def contains(self, a: str, b: str) -> bool:
        return self._key(a, b) in self.pairs

    def score(self, a: str, b: str) -> float | None:
        return self.pairs.get(self._key(a, b))

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class AnnotatorJudgments:
    """Per-annotator graded judgments for one lemma's pairs."""

    lemma: str
    scores: Mapping[tuple[str, str], float] = field(default_factory=dict)
    # keys are (annotator_id, pair_id)

    def annotators(self) -> list[str]:
        return sorted({a for a, _ in self.scores})

    def judgments_of(self, annotator: str) -> dict[str, float]:
        return {p: s for (a, p), s in self.scores.items() if a == annotator}

    def all_judgments(self) -> list[float]:
        return [self.scores[k] for k in sorted(self.scores)]


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def _fail(path, lineno, message):
    raise DataError(f"{path}:{lineno}: {message}")


def _read_lines(path):
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            yield lineno, line


def format_number(value: float) -> str:
    """Canonical decimal text: integers without a trailing .0, floats via repr."""
    if float(value) == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _parse_gold(field_text: str, kind: str, path, lineno):
    """Gold column of a pairs file -> (score, label).

    kind "any-pairs" accepts both flavors; the named kinds reject the other's.
    """
    if field_text == "-":
        return None, None
    if field_text in ("T", "F"):
        if kind == "usim-pairs":
            _fail(path, lineno, f"binary label {field_text!r} in a graded pairs file")
        return None, field_text
    try:
        score = float(field_text)
    except ValueError:
        _fail(path, lineno, f"gold field {field_text!r} is not a score, T, F, or -")
    if kind == "wic-pairs":
        _fail(path, lineno, f"graded score {field_text!r} in a binary pairs file")
    return score, None


# ---------------------------------------------------------------------------
# Loaders
# ---------------------------------------------------------------------------

def load_instances(path) -> dict[str, Instance]:
    instances: dict[str, Instance] = {}
    for lineno, line in _read_lines(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            _fail(path, lineno, f"invalid JSON: {exc.msg}")
        try:
            instance = Instance(
                instance_id=str(obj["instance_id"]),
                lemma=str(obj["lemma"]).lower(),
                pos=str(obj["pos"]).lower(),
                tokens=tuple(str(t).lower() for t in obj["tokens"]),
                target_index=int(obj["target_index"]),
            )
        except KeyError as exc:
            _fail(path, lineno, f"missing field {exc.args[0]!r}")
        except (TypeError, ValueError) as exc:
            _fail(path, lineno, str(exc))
        except DataError as exc:
            _fail(path, lineno, str(exc))
        if instance.instance_id in instances:
            _fail(path, lineno, f"duplicate instance_id {instance.instance_id!r}")
        instances[instance.instance_id] = instance
    return instances


def load_pairs(path, kind="usim-pairs", instances=None) -> list[InstancePair]:
    """Load a pairs TSV; with `instances`, referential integrity is enforced."""
    pairs: list[InstancePair] = []
    seen: set[str] = set()
    for lineno, line in _read_lines(path):
        cols = line.split("\t")
        if len(cols) != 5:
            _fail(path, lineno, f"expected 5 tab-separated columns, got {len(cols)}")
        pair_id, lemma, inst1, inst2, gold = cols
        score, label = _parse_gold(gold, kind, path, lineno)
        if pair_id in seen:
            _fail(path, lineno, f"duplicate pair_id {pair_id!r}")
        seen.add(pair_id)
        try:
            pair = InstancePair(
                pair_id=pair_id,
                lemma=lemma.lower(),
                first=inst1,
                second=inst2,
                gold_score=score,
                gold_label=label,
            )
        except DataError as exc:
            _fail(path, lineno, str(exc))
        if instances is not None:
            for ref in (pair.first, pair.second):
                if ref not in instances:
                    _fail(path, lineno, f"pair {pair_id!r} references unknown instance {ref!r}")
                if instances[ref].lemma != pair.lemma:
                    _fail(
                        path, lineno,
                        f"pair {pair_id!r}: instance {ref!r} has lemma "
                        f"{instances[ref].lemma!r}, expected {pair.lemma!r}",
                    )
        if pair.first == pair.second:
            _fail(path, lineno, f"pair {pair_id!r} pairs an instance with itself")
        pairs.append(pair)
    return pairs


def load_substitute_sets(path, instances=None) -> dict[str, SubstituteSet]:
    sets: dict[str, SubstituteSet] = {}
    for lineno, line in _read_lines(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            _fail(path, lineno, f"invalid JSON: {exc.msg}")
        try:
            instance_id = str(obj["instance_id"])
            entries = tuple(
                (str(e["word"]).lower(), float(e["weight"])) for e in obj["substitutes"]
            )
        except KeyError as exc:
            _fail(path, lineno, f"missing field {exc.args[0]!r}")
        except (TypeError, ValueError) as exc:
            _fail(path, lineno, str(exc))
        if instance_id in sets:
            _fail(path, lineno, f"duplicate instance_id {instance_id!r}")
        if instances is not None and instance_id not in instances:
            _fail(path, lineno, f"substitutes reference unknown instance {instance_id!r}")
        try:
            sets[instance_id] = SubstituteSet(instance_id=instance_id, entries=entries)
        except DataError as exc:
            _fail(path, lineno, str(exc))
    return sets


def load_candidate_pool(path) -> CandidatePool:
    """Load a candidate pool; candidates equal to their own lemma are dropped."""
    pools: dict[tuple[str, str], set[str]] = {}
    for lineno, line in _read_lines(path):
        cols = line.split("\t")
        if len(cols) != 2:
            _fail(path, lineno, f"expected 2 tab-separated columns, got {len(cols)}")
        key_text, candidate = cols
        if "." not in key_text:
            _fail(path, lineno, f"pool key {key_text!r} is not of the form lemma.pos")
        lemma, pos = key_text.lower().rsplit(".", 1)
        candidate = candidate.lower()
        if candidate == lemma:
            continue
        pools.setdefault((lemma, pos), set()).add(candidate)
    return CandidatePool(pools={k: frozenset(v) for k, v in pools.items()})


def load_paraphrases(path) -> ParaphraseStore:
    pairs: dict[tuple[str, str], float | None] = {}
    for lineno, line in _read_lines(path):
        cols = line.split("\t")
        if len(cols) not in (2, 3):
            _fail(path, lineno, f"expected 2 or 3 tab-separated columns, got {len(cols)}")
        word1, word2 = cols[0].lower(), cols[1].lower()
        score: float | None = None
        if len(cols) == 3 and cols[2] != "-":
            try:
                score = float(cols[2])
            except ValueError:
                _fail(path, lineno, f"paraphrase score {cols[2]!r} is not a number")
        pairs[ParaphraseStore._key(word1, word2)] = score
    return ParaphraseStore(pairs=pairs)


def load_annotator_judgments(path) -> dict[str, AnnotatorJudgments]:
    by_lemma: dict[str, dict[tuple[str, str], float]] = {}
    for lineno, line in _read_lines(path):
        cols = line.split("\t")
        if len(cols) != 4:
            _fail(path, lineno, f"expected 4 tab-separated columns, got {len(cols)}")
        lemma, pair_id, annotator_id, score_text = cols
        lemma = lemma.lower()
        try:
            score = float(score_text)
        except ValueError:
            _fail(path, lineno, f"judgment score {score_text!r} is not a number")
        if not 1.0 <= score <= 5.0:
            _fail(path, lineno, f"judgment score {score} outside [1,5]")
        key = (annotator_id, pair_id)
        lemma_scores = by_lemma.setdefault(lemma, {})
        if key in lemma_scores:
            _fail(path, lineno, f"duplicate judgment for {key} under lemma {lemma!r}")
        lemma_scores[key] = score
    return {
        lemma: AnnotatorJudgments(lemma=lemma, scores=scores)
        for lemma, scores in by_lemma.items()
    }


def load_dataset(path, kind, instances=None):
    """Dispatch on `kind`; see module docstring for the formats.

    Passing the already-loaded instances collection enables referential
    integrity checks for pairs and substitute files.
    """
    if kind == "instances":
        return load_instances(path)
    if kind in PAIR_KINDS:
        return load_pairs(path, kind=kind, instances=instances)
    if kind == "gold-substitutes":
        return load_substitute_sets(path, instances=instances)
    if kind == "candidate-pool":
        return load_candidate_pool(path)
    if kind == "paraphrases":
        return load_paraphrases(path)
    if kind == "annotator-judgments":
        return load_annotator_judgments(path)
    raise ValueError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")


# ---------------------------------------------------------------------------
# Serializers (canonical form; inverse of the loaders)
# ---------------------------------------------------------------------------

def serialize_instances(instances: Mapping[str, Instance] | Iterable[Instance]) -> str:
    items = instances.values() if isinstance(instances, Mapping) else instances
    lines = []
    for inst in items:
        obj = {
            "instance_id": inst.instance_id,
            "lemma": inst.lemma,
            "pos": inst.pos,
            "tokens": list(inst.tokens),
            "target_index": inst.target_index,
        }
        lines.append(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def serialize_pairs(pairs: Iterable[InstancePair]) -> str:
    lines = []
    for pair in pairs:
        if pair.gold_score is not None:
            gold = format_number(pair.gold_score)
        elif pair.gold_label is not None:
            gold = pair.gold_label
        else:
            gold = "-"
        lines.append("\t".join([pair.pair_id, pair.lemma, pair.first, pair.second, gold]))
    return "".join(line + "\n" for line in lines)


def serialize_substitute_sets(sets: Mapping[str, SubstituteSet] | Iterable[SubstituteSet]) -> str:
    items = sets.values() if isinstance(sets, Mapping) else sets
    lines = []
    for s in items:
        subs = ",".join(
            '{"word":%s,"weight":%s}' % (json.dumps(w, ensure_ascii=False), format_number(weight))
            for w, weight in s.entries
        )
        lines.append('{"instance_id":%s,"substitutes":[%s]}' % (json.dumps(s.instance_id), subs))
    return "".join(line + "\n" for line in lines)


def serialize_candidate_pool(pool: CandidatePool) -> str:
    lines = []
    for (lemma, pos), candidates in sorted(pool.pools.items()):
        for candidate in sorted(candidates):
            lines.append(f"{lemma}.{pos}\t{candidate}")
    return "".join(line + "\n" for line in lines)


def serialize_paraphrases(store: ParaphraseStore) -> str:
    lines = []
    for (w1, w2), score in sorted(store.pairs.items()):
        lines.append(f"{w1}\t{w2}\t{'-' if score is None else format_number(score)}")
    return "".join(line + "\n" for line in lines)


def serialize_annotator_judgments(judgments: Mapping[str, AnnotatorJudgments]) -> str:
    lines = []
    for lemma in sorted(judgments):
        j = judgments[lemma]
        for (annotator_id, pair_id) in sorted(j.scores):
            score = j.scores[(annotator_id, pair_id)]
            lines.append(f"{lemma}\t{pair_id}\t{annotator_id}\t{format_number(score)}")
    return "".join(line + "\n" for line in lines)


def serialize_dataset(data, kind) -> str:
    if kind == "instances":
        return serialize_instances(data)
    if kind in PAIR_KINDS:
        return serialize_pairs(data)
    if kind == "gold-substitutes":
        return serialize_substitute_sets(data)
    if kind == "candidate-pool":
        return serialize_candidate_pool(data)
    if kind == "paraphrases":
        return serialize_paraphrases(data)
    if kind == "annotator-judgments":
        return serialize_annotator_judgments(data)
    raise ValueError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")


def pool_from_paraphrases(store: ParaphraseStore,
                          keys: Iterable[tuple[str, str]]) -> CandidatePool:
    """Derive candidate pools from a paraphrase store: each (lemma, pos) key
    gets every word paired with the lemma, the lemma itself excluded. Keys
    with no paraphrases are omitted, so membership checks stay meaningful."""
    partners: dict[str, set[str]] = {}
    for a, b in store.pairs:
        partners.setdefault(a, set()).add(b)
        partners.setdefault(b, set()).add(a)
    pools = {}
    for lemma, pos in keys:
        lemma, pos = lemma.lower(), pos.lower()
        candidates = partners.get(lemma, set()) - {lemma}
        if candidates:
            pools[(lemma, pos)] = frozenset(candidates)
    return CandidatePool(pools=pools)


# ---------------------------------------------------------------------------
# Same/different pair construction
# ---------------------------------------------------------------------------

def substitute_overlap_ratio(a: SubstituteSet, b: SubstituteSet) -> float:
    """|A∩B| / min(|A|,|B|) over substitute words, ignoring weights."""
    wa, wb = a.words, b.words
    if not wa or not wb:
        return 0.0
    return len(wa & wb) / min(len(wa), len(wb))


def build_coinco_pairs(
    substitute_sets: Mapping[str, SubstituteSet],
    instances: Mapping[str, Instance],
    vocabulary: set[str] | None = None,
    min_substitutes: int = 4,
    same_threshold: float = 0.75,
) -> tuple[list[InstancePair], list[InstancePair]]:
    """Construct balanced SAME ("T") and DIFF ("F") training pairs.

    Instances need at least `min_substitutes` distinct substitutes to
    participate. Within a lemma every unordered instance pair is scored by
    substitute overlap: zero overlap makes a DIFF candidate, overlap ratio
    >= `same_threshold` a SAME candidate. When a vocabulary is given,
    instances whose lemma is missing from it are dropped first, so the
    balancing below is exact. DIFF is then truncated to |SAME| keeping the
    pairs with the highest combined substitute count (ties broken by
    pair_id). Only DIFF is ever down-sampled; with no SAME pairs at all the
    DIFF pairs are returned untouched.
    """
    eligible: dict[str, list[SubstituteSet]] = {}
    for instance_id in sorted(substitute_sets):
        subs = substitute_sets[instance_id]
        if len(subs.words) < min_substitutes:
            continue
        instance = instances.get(instance_id)
        if instance is None:
            raise DataError(f"substitute set references unknown instance {instance_id!r}")
        if vocabulary is not None and instance.lemma not in vocabulary:
            continue
        eligible.setdefault(instance.lemma, []).append(subs)

    same: list[InstancePair] = []
    diff: list[tuple[int, InstancePair]] = []
    for lemma in sorted(eligible):
        sets = sorted(eligible[lemma], key=lambda s: s.instance_id)
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                a, b = sets[i], sets[j]
                ratio = substitute_overlap_ratio(a, b)
                pair_id = f"{a.instance_id}__{b.instance_id}"
                if ratio == 0.0:
                    pair = InstancePair(pair_id, lemma, a.instance_id, b.instance_id,
                                        gold_label="F")
                    diff.append((len(a.words) + len(b.words), pair))
                elif ratio >= same_threshold:
                    same.append(InstancePair(pair_id, lemma, a.instance_id, b.instance_id,
                                             gold_label="T"))

    same.sort(key=lambda p: p.pair_id)
    diff.sort(key=lambda item: (-item[0], item[1].pair_id))
    if same:
        diff = diff[: len(same)]
    return same, [pair for _, pair in diff]
