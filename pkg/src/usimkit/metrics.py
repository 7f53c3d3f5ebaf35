"""Correlation and agreement metrics with per-lemma aggregation.

Spearman's rho is the Pearson correlation of average (fractional) ranks, so
ties are handled exactly. Lemmas where the metric is undefined (constant
predictions or gold) are excluded from means and counted, never coerced to 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import AnnotatorJudgments, InstancePair
from .errors import DataError, UndefinedMetricError

# Mid-range band for Umid: judgments strictly between the scale extremes,
# i.e. {2,3,4} for integer judgments on the 1-5 scale.
UMID_BAND = (1.0, 5.0)


def average_ranks(values) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the mean of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Rank correlation via Pearson on average ranks.

    Raises UndefinedMetricError when either side is constant, so callers can
    exclude the case rather than report a fake 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.ndim != 1 or len(x) < 2:
        raise DataError("spearman needs two equal-length lists of at least 2 values")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sx = float(np.dot(dx, dx))
    sy = float(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedMetricError("spearman undefined for constant input")
    return float(np.dot(dx, dy) / math.sqrt(sx * sy))


def accuracy(pred: Sequence, gold: Sequence) -> float:
    if len(pred) != len(gold):
        raise DataError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold")
    if not pred:
        raise DataError("accuracy needs at least one item")
    return sum(p == g for p, g in zip(pred, gold)) / len(pred)


def uiaa(j: AnnotatorJudgments) -> float:
    """Inter-annotator agreement: mean pairwise Spearman between annotators'
    judgments over their shared pairs. Annotator pairs with fewer than 2
    shared pairs, or with constant judgments, are skipped."""
    annotators = j.annotators()
    if len(annotators) < 2:
        raise UndefinedMetricError(f"uiaa for {j.lemma!r} needs at least 2 annotators")
    judgments = {a: j.judgments_of(a) for a in annotators}
    correlations = []
    for i in range(len(annotators)):
        for k in range(i + 1, len(annotators)):
            a, b = judgments[annotators[i]], judgments[annotators[k]]
            shared = sorted(set(a) & set(b))
            if len(shared) < 2:
                continue
            try:
                correlations.append(spearman([a[p] for p in shared], [b[p] for p in shared]))
            except UndefinedMetricError:
                continue
    if not correlations:
        raise UndefinedMetricError(f"uiaa for {j.lemma!r}: no valid annotator pair")
    return float(np.mean(correlations))


def umid(j: AnnotatorJudgments) -> float:
    """Proportion of mid-range judgments (strictly between the scale extremes)
    over all pairs and annotators of the lemma."""
    scores = j.all_judgments()
    if not scores:
        raise DataError(f"umid for {j.lemma!r}: no judgments")
    lo, hi = UMID_BAND
    return sum(lo < s < hi for s in scores) / len(scores)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    """Per-lemma metric values plus their aggregate and bookkeeping counts."""

    metric: str
    grouping: str
    aggregate: float
    per_lemma: Mapping[str, float]
    counts: Mapping[str, int]
    excluded: tuple[str, ...] = ()
    metadata: Mapping[str, object] = field(default_factory=dict)

    def to_tsv(self) -> str:
        lines = ["lemma\t%s\tn" % self.metric]
        for lemma in sorted(self.counts):
            value = self.per_lemma.get(lemma)
            cell = "NA" if value is None else repr(float(value))
            lines.append(f"{lemma}\t{cell}\t{self.counts[lemma]}")
        lines.append(f"ALL\t{self.aggregate!r}\t{sum(self.counts.values())}")
        return "".join(line + "\n" for line in lines)

    def to_json(self) -> str:
        payload = {
            "metric": self.metric,
            "grouping": self.grouping,
            "aggregate": self.aggregate,
            "per_lemma": dict(sorted(self.per_lemma.items())),
            "counts": dict(sorted(self.counts.items())),
            "excluded": list(self.excluded),
            "metadata": dict(self.metadata),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _binary_decision(value) -> str:
    if value in ("T", "F"):
        return value
    return "T" if float(value) >= 0.5 else "F"


def report(
    predictions: Mapping[str, float],
    pairs: Sequence[InstancePair],
    grouping: str = "by-lemma",
    metadata: Mapping[str, object] | None = None,
) -> MetricReport:
    """Score predictions against the pairs' gold annotations.

    Graded pairs get Spearman (per lemma and mean, or pooled); binary pairs
    get accuracy with probabilities thresholded at 0.5. Every prediction must
    have a labeled gold pair.
    """
    if grouping not in ("by-lemma", "pooled"):
        raise DataError(f"unknown grouping {grouping!r}")
    by_id = {p.pair_id: p for p in pairs if p.labeled}
    missing = sorted(set(predictions) - set(by_id))
    if missing:
        raise DataError(f"no gold for predicted pairs: {', '.join(missing)}")
    evaluated = [by_id[pid] for pid in sorted(predictions)]
    if not evaluated:
        raise DataError("no predictions to evaluate")
    graded = [p for p in evaluated if p.gold_score is not None]
    if graded and len(graded) != len(evaluated):
        raise DataError("cannot mix graded and binary gold in one report")
    metric = "spearman" if graded else "accuracy"

    by_lemma: dict[str, list[InstancePair]] = {}
    for p in evaluated:
        by_lemma.setdefault(p.lemma, []).append(p)
    counts = {lemma: len(ps) for lemma, ps in by_lemma.items()}
    meta = dict(metadata or {})
    meta.setdefault("n_pairs", len(evaluated))

    def lemma_value(ps: list[InstancePair]) -> float:
        if metric == "spearman":
            return spearman(
                [predictions[p.pair_id] for p in ps], [p.gold_score for p in ps]
            )
        return accuracy(
            [_binary_decision(predictions[p.pair_id]) for p in ps],
            [p.gold_label for p in ps],
        )

    if grouping == "pooled":
        aggregate = lemma_value(evaluated)
        return MetricReport(metric=metric, grouping=grouping, aggregate=aggregate,
                            per_lemma={}, counts=counts, metadata=meta)

    per_lemma: dict[str, float] = {}
    excluded: list[str] = []
    for lemma in sorted(by_lemma):
        ps = by_lemma[lemma]
        if len(ps) < 2 and metric == "spearman":
            excluded.append(lemma)
            continue
        try:
            per_lemma[lemma] = lemma_value(ps)
        except UndefinedMetricError:
            excluded.append(lemma)
    if not per_lemma:
        raise UndefinedMetricError("metric undefined for every lemma")
    aggregate = float(np.mean(list(per_lemma.values())))
    return MetricReport(metric=metric, grouping=grouping, aggregate=aggregate,
                        per_lemma=per_lemma, counts=counts, excluded=tuple(excluded),
                        metadata=meta)


def serialize_predictions(predictions: Mapping[str, object]) -> str:
    """TSV pair_id<TAB>prediction; floats via repr, labels verbatim."""
    lines = []
    for pair_id in sorted(predictions):
        value = predictions[pair_id]
        cell = value if isinstance(value, str) else repr(float(value))
        lines.append(f"{pair_id}\t{cell}")
    return "".join(line + "\n" for line in lines)


def load_predictions(path) -> dict[str, object]:
    """Inverse of serialize_predictions; numeric cells become floats."""
    predictions: dict[str, object] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise DataError(f"{path}:{lineno}: expected pair_id<TAB>prediction")
        pair_id, cell = cols
        if pair_id in predictions:
            raise DataError(f"{path}:{lineno}: duplicate pair_id {pair_id!r}")
        try:
            predictions[pair_id] = float(cell)
        except ValueError:
            predictions[pair_id] = cell
    if not predictions:
        raise DataError(f"{path}: no predictions")
    return predictions


def plot_report(predictions: Mapping[str, float], pairs: Sequence[InstancePair], out_path) -> None:
    """Write an SVG of predicted vs gold scores, one panel per lemma."""
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    by_id = {p.pair_id: p for p in pairs if p.gold_score is not None}
    by_lemma: dict[str, list[tuple[float, float]]] = {}
    for pid, value in predictions.items():
        pair = by_id.get(pid)
        if pair is not None:
            by_lemma.setdefault(pair.lemma, []).append((pair.gold_score, value))
    if not by_lemma:
        raise DataError("nothing to plot: no graded gold for these predictions")
    lemmas = sorted(by_lemma)
    ncols = min(6, max(1, math.ceil(math.sqrt(len(lemmas)))))
    nrows = math.ceil(len(lemmas) / ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 2.5 * nrows), squeeze=False)
    for ax, lemma in zip(axes.flat, lemmas):
        gold, pred = zip(*by_lemma[lemma])
        ax.scatter(gold, pred, s=12, alpha=0.7)
        ax.set_title(lemma, fontsize=8)
        ax.set_xlabel("gold", fontsize=7)
        ax.set_ylabel("predicted", fontsize=7)
    for ax in axes.flat[len(lemmas):]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
