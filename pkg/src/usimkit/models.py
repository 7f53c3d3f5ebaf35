"""Supervised prediction: linear regression for graded similarity, logistic
regression for binary decisions, with leave-one-lemma-out and fixed-split
training protocols.

Features are standardized with statistics from the training rows only.
Pairs whose substitute features are masked never reach the main model: they
train and are predicted by a back-off model over the embedding-only schema.
All fitting is deterministic; a fixed seed reproduces weights bitwise.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import InstancePair
from .errors import DataError, NumericError, UndefinedMetricError
from .features import FeatureVector, SUBSTITUTE_FEATURES, embedding_only
from .metrics import report, spearman

log = logging.getLogger(__name__)

RIDGE_DAMPING = 1e-8
SAME_TARGET = 5.0  # graded target for CoInCo SAME pairs
DIFF_TARGET = 1.0  # and for DIFF pairs

# Feature combinations compared on the dev set for the binary task,
# mirroring the usual single-representation / embedding-only / combined grid.
DEFAULT_BINARY_COMBINATIONS: tuple[tuple[str, ...], ...] = (
    ("cos_contextual_target_av4",),
    ("cos_sentence_vector",),
    SUBSTITUTE_FEATURES,
    ("cos_contextual_target_av4", "cos_sentence_vector"),
    ("cos_contextual_target_av4", "cos_sentence_vector") + SUBSTITUTE_FEATURES,
)


@dataclass(frozen=True)
class LogisticConfig:
    epochs: int = 500
    learning_rate: float = 0.1
    l2: float = 1e-4
    seed: int = 13

    def __post_init__(self):
        if self.epochs < 1 or self.learning_rate <= 0 or self.l2 < 0:
            raise DataError(f"invalid logistic configuration {self}")


@dataclass(frozen=True)
class RegressionModel:
    """Linear or logistic weights over a feature schema, with the training
    standardization statistics and an optional embedding-only back-off."""

    kind: str
    schema: tuple[str, ...]
    weights: np.ndarray
    bias: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    backoff: "RegressionModel | None" = None
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("linear", "logistic"):
            raise DataError(f"unknown model kind {self.kind!r}")
        if len(self.weights) != len(self.schema):
            raise DataError("weights length must equal schema length")

    def original_coefficients(self) -> tuple[np.ndarray, float]:
        """Weights and bias expressed on the unstandardized feature scale."""
        if len(self.schema) == 0:
            return np.zeros(0), self.bias
        coef = self.weights / self.feature_std
        intercept = self.bias - float(np.dot(coef, self.feature_mean))
        return coef, intercept


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _standardize_fit(X: np.ndarray, schema: Sequence[str]):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = std > 0.0
    if not np.all(keep):
        dropped = [name for name, k in zip(schema, keep) if not k]
        log.warning("dropping constant features: %s", ", ".join(dropped))
    kept_schema = tuple(name for name, k in zip(schema, keep) if k)
    return kept_schema, mean[keep], std[keep], keep


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("feature matrix must be 2-dimensional")
    if np.isnan(X).any():
        raise DataError("feature matrix contains masked entries; route them to the backoff")
    return X


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_linear(X, y, schema: Sequence[str], metadata: Mapping | None = None) -> RegressionModel:
    """Ordinary least squares on standardized features via the normal
    equations, with a small ridge damping term for conditioning."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise DataError("linear fit needs at least 2 rows")
    if X.shape[0] != len(y):
        raise DataError(f"{X.shape[0]} rows vs {len(y)} targets")
    if X.shape[1] != len(schema):
        raise DataError(f"{X.shape[1]} columns vs {len(schema)} schema names")

    kept_schema, mean, std, keep = _standardize_fit(X, schema)
    bias = float(y.mean())
    if not kept_schema:
        weights = np.zeros(0)
    else:
        Z = (X[:, keep] - mean) / std
        gram = Z.T @ Z + RIDGE_DAMPING * np.eye(Z.shape[1])
        try:
            weights = np.linalg.solve(gram, Z.T @ (y - bias))
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"linear system unsolvable: {exc}") from exc
        if not np.all(np.isfinite(weights)):
            raise NumericError("linear fit is rank-deficient beyond damping remedy")
    return RegressionModel(kind="linear", schema=kept_schema, weights=weights,
                           bias=bias, feature_mean=mean, feature_std=std,
                           metadata=dict(metadata or {}))


def fit_logistic(
    X, y, schema: Sequence[str],
    config: LogisticConfig = LogisticConfig(),
    metadata: Mapping | None = None,
) -> RegressionModel:
    """L2-regularized logistic regression by full-batch gradient descent.

    The training loss (recorded per epoch in the metadata) is non-increasing
    at the default step size; a fixed seed reproduces weights bitwise.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise DataError("logistic targets must be 0/1")
    if len(classes) < 2:
        raise DataError("logistic fit needs both classes present")
    if X.shape[1] != len(schema):
        raise DataError(f"{X.shape[1]} columns vs {len(schema)} schema names")

    kept_schema, mean, std, keep = _standardize_fit(X, schema)
    Z = (X[:, keep] - mean) / std if kept_schema else np.zeros((X.shape[0], 0))
    n = Z.shape[0]
    rng = np.random.default_rng(config.seed)
    w = 0.01 * rng.standard_normal(Z.shape[1])
    b = 0.0

    def loss(w, b):
        z = Z @ w + b
        nll = float(np.mean(np.logaddexp(0.0, z) - y * z))
        return nll + 0.5 * config.l2 * float(np.dot(w, w))

    history = [loss(w, b)]
    for _ in range(config.epochs):
        p = _sigmoid(Z @ w + b)
        w = w - config.learning_rate * (Z.T @ (p - y) / n + config.l2 * w)
        b = b - config.learning_rate * float(np.mean(p - y))
        history.append(loss(w, b))

    meta = dict(metadata or {})
    meta.update(epochs=config.epochs, learning_rate=config.learning_rate,
                l2=config.l2, seed=config.seed, loss_history=history)
    return RegressionModel(kind="logistic", schema=kept_schema, weights=w, bias=b,
                           feature_mean=mean, feature_std=std, metadata=meta)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict(model: RegressionModel, fv: FeatureVector) -> float:
    """Graded score (linear) or class probability (logistic) for one pair.

    Pairs with a masked or absent schema feature fall back to the embedded
    back-off model; without one, they are an error.
    """
    unavailable = [name for name in model.schema if fv.value(name) is None]
    if unavailable:
        if model.backoff is not None:
            return predict(model.backoff, fv)
        raise DataError(
            f"pair {fv.pair_id!r}: features unavailable with no backoff model: "
            + ", ".join(unavailable)
        )
    if len(model.schema) == 0:
        z = model.bias
    else:
        x = np.array([fv.value(name) for name in model.schema], dtype=np.float64)
        z = float(np.dot(model.weights, (x - model.feature_mean) / model.feature_std)) + model.bias
    if model.kind == "logistic":
        return float(_sigmoid(np.array([z]))[0])
    return z


def feature_matrix(fvs: Sequence[FeatureVector], schema: Sequence[str]):
    """(matrix with NaN for unavailable entries, boolean complete-row mask)."""
    X = np.full((len(fvs), len(schema)), np.nan)
    for i, fv in enumerate(fvs):
        for j, name in enumerate(schema):
            value = fv.value(name)
            if value is not None:
                X[i, j] = value
    complete = ~np.isnan(X).any(axis=1)
    return X, complete


def train_graded_model(
    fvs: Sequence[FeatureVector], targets: Sequence[float], schema: Sequence[str],
    metadata: Mapping | None = None,
) -> RegressionModel:
    """Linear model on fully observed rows, plus an embedding-only back-off
    trained on every row when the schema includes substitute features."""
    return _train_with_backoff(fvs, targets, schema, fit_linear, metadata=metadata)


def train_binary_model(
    fvs: Sequence[FeatureVector], labels: Sequence[float], schema: Sequence[str],
    config: LogisticConfig = LogisticConfig(), metadata: Mapping | None = None,
) -> RegressionModel:
    def fit(X, y, names, metadata=None):
        return fit_logistic(X, y, names, config=config, metadata=metadata)

    return _train_with_backoff(fvs, labels, schema, fit, metadata=metadata)


def _train_with_backoff(fvs, targets, schema, fit, metadata=None):
    schema = tuple(schema)
    if not schema:
        raise DataError("empty schema")
    targets = np.asarray(targets, dtype=np.float64)
    if len(fvs) != len(targets):
        raise DataError(f"{len(fvs)} feature vectors vs {len(targets)} targets")
    X, complete = feature_matrix(fvs, schema)
    main = fit(X[complete], targets[complete], schema, metadata=metadata)
    reduced = embedding_only(schema)
    if reduced == schema:
        return main
    Xr, complete_r = feature_matrix(fvs, reduced)
    if not np.all(complete_r):
        bad = [fvs[i].pair_id for i in np.flatnonzero(~complete_r)[:5]]
        raise DataError(f"embedding features missing for pairs such as {bad}")
    backoff = fit(Xr, targets, reduced, metadata=metadata)
    return replace(main, backoff=backoff)


# ---------------------------------------------------------------------------
# Training protocols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldRecord:
    held_out: str
    train_checksum: str
    train_lemmas: frozenset[str]
    n_train: int


@dataclass(frozen=True)
class LooResult:
    predictions: dict[str, float]
    per_lemma: dict[str, float]
    mean_spearman: float
    excluded: tuple[str, ...]
    folds: tuple[FoldRecord, ...]


def _train_checksum(pair_ids: Iterable[str]) -> str:
    return hashlib.sha256("\n".join(sorted(pair_ids)).encode("utf-8")).hexdigest()


def graded_target(pair: InstancePair) -> float:
    """Numeric target: the gold score, or 5.0 / 1.0 for SAME / DIFF labels."""
    if pair.gold_score is not None:
        return pair.gold_score
    if pair.gold_label == "T":
        return SAME_TARGET
    if pair.gold_label == "F":
        return DIFF_TARGET
    raise DataError(f"pair {pair.pair_id!r} has no gold annotation")


def run_loo_graded(
    pairs: Sequence[InstancePair],
    fvs_by_pair: Mapping[str, FeatureVector],
    schema: Sequence[str],
    extra_pairs: Sequence[InstancePair] = (),
    extra_fvs: Mapping[str, FeatureVector] | None = None,
    jobs: int = 1,
) -> LooResult:
    """Leave-one-lemma-out: for every lemma, train on all other lemmas' pairs
    (plus any extra same/diff pairs, also excluding the held-out lemma) and
    predict the held-out pairs. Reports the mean of per-lemma Spearman values.

    Folds are independent; `jobs` > 1 trains them in parallel with results
    merged in lemma order, so the output does not depend on the worker count.
    """
    from .util import parallel_map

    extra_fvs = extra_fvs or {}
    by_lemma: dict[str, list[InstancePair]] = {}
    for pair in pairs:
        by_lemma.setdefault(pair.lemma, []).append(pair)

    evaluable: list[str] = []
    excluded: list[str] = []
    for lemma in sorted(by_lemma):
        if len(by_lemma[lemma]) < 2:
            log.warning("lemma %r has %d pair(s); excluded from evaluation",
                        lemma, len(by_lemma[lemma]))
            excluded.append(lemma)
        else:
            evaluable.append(lemma)

    def run_fold(lemma: str):
        test_pairs = by_lemma[lemma]
        train_pairs = [p for p in pairs if p.lemma != lemma]
        train_pairs += [p for p in extra_pairs if p.lemma != lemma]
        if not train_pairs:
            raise DataError(f"no training pairs left when holding out {lemma!r}")
        train_fvs, train_targets = [], []
        for p in train_pairs:
            source = fvs_by_pair if p.pair_id in fvs_by_pair else extra_fvs
            if p.pair_id not in source:
                raise DataError(f"no features for training pair {p.pair_id!r}")
            train_fvs.append(source[p.pair_id])
            train_targets.append(graded_target(p))
        model = train_graded_model(train_fvs, train_targets, schema)
        record = FoldRecord(
            held_out=lemma,
            train_checksum=_train_checksum(p.pair_id for p in train_pairs),
            train_lemmas=frozenset(p.lemma for p in train_pairs),
            n_train=len(train_pairs),
        )
        test_predictions = {}
        for p in test_pairs:
            if p.pair_id not in fvs_by_pair:
                raise DataError(f"no features for test pair {p.pair_id!r}")
            test_predictions[p.pair_id] = predict(model, fvs_by_pair[p.pair_id])
        try:
            rho = spearman(
                [test_predictions[p.pair_id] for p in test_pairs],
                [graded_target(p) for p in test_pairs],
            )
        except UndefinedMetricError:
            rho = None
        return record, test_predictions, rho

    predictions: dict[str, float] = {}
    per_lemma: dict[str, float] = {}
    folds: list[FoldRecord] = []
    for lemma, (record, test_predictions, rho) in zip(
            evaluable, parallel_map(run_fold, evaluable, jobs=jobs)):
        folds.append(record)
        predictions.update(test_predictions)
        if rho is None:
            excluded.append(lemma)
        else:
            per_lemma[lemma] = rho

    if not per_lemma:
        raise UndefinedMetricError("Spearman undefined for every lemma")
    return LooResult(
        predictions=predictions,
        per_lemma=per_lemma,
        mean_spearman=float(np.mean(list(per_lemma.values()))),
        excluded=tuple(excluded),
        folds=tuple(folds),
    )


@dataclass(frozen=True)
class BinaryResult:
    accuracy: float
    decisions: dict[str, str]
    chosen_features: tuple[str, ...]
    dev_accuracies: dict[tuple[str, ...], float]
    model: RegressionModel


def _binary_labels(pairs: Sequence[InstancePair]) -> np.ndarray:
    labels = []
    for p in pairs:
        if p.gold_label is None:
            raise DataError(f"pair {p.pair_id!r} has no binary label")
        labels.append(1.0 if p.gold_label == "T" else 0.0)
    return np.asarray(labels)


def run_binary(
    train: tuple[Sequence[InstancePair], Mapping[str, FeatureVector]],
    dev: tuple[Sequence[InstancePair], Mapping[str, FeatureVector]],
    test: tuple[Sequence[InstancePair], Mapping[str, FeatureVector]],
    combinations: Sequence[Sequence[str]] = DEFAULT_BINARY_COMBINATIONS,
    config: LogisticConfig = LogisticConfig(),
    metadata: Mapping | None = None,
) -> BinaryResult:
    """Train on the official split; the dev set only selects the feature
    combination (ties to fewer features), then the winner is scored on test.
    """
    splits = {"train": train, "dev": dev, "test": test}
    ids = {name: {p.pair_id for p in pairs} for name, (pairs, _) in splits.items()}
    for a, b in (("train", "dev"), ("train", "test"), ("dev", "test")):
        overlap = ids[a] & ids[b]
        if overlap:
            raise DataError(f"{a}/{b} splits overlap on pairs such as {sorted(overlap)[:5]}")

    train_pairs, train_fvs = train
    dev_pairs, dev_fvs = dev
    test_pairs, test_fvs = test
    available = set()
    for fv in train_fvs.values():
        available |= fv.names()
    usable = [tuple(c) for c in combinations if set(c) <= available]
    if not usable:
        raise DataError("no registered feature combination is computable from these features")

    y_train = _binary_labels(train_pairs)
    dev_gold = [p.gold_label for p in dev_pairs]
    dev_accuracies: dict[tuple[str, ...], float] = {}
    for combo in usable:
        model = train_binary_model(
            [train_fvs[p.pair_id] for p in train_pairs], y_train, combo, config=config
        )
        decisions = ["T" if predict(model, dev_fvs[p.pair_id]) >= 0.5 else "F"
                     for p in dev_pairs]
        dev_accuracies[combo] = sum(d == g for d, g in zip(decisions, dev_gold)) / len(dev_gold)

    chosen = min(usable, key=lambda c: (-dev_accuracies[c], len(c), usable.index(c)))
    model = train_binary_model(
        [train_fvs[p.pair_id] for p in train_pairs], y_train, chosen, config=config,
        metadata=metadata,
    )
    decisions = {
        p.pair_id: "T" if predict(model, test_fvs[p.pair_id]) >= 0.5 else "F"
        for p in test_pairs
    }
    test_gold = [p.gold_label for p in test_pairs]
    test_accuracy = sum(decisions[p.pair_id] == g for p, g in zip(test_pairs, test_gold)) / len(test_pairs)
    return BinaryResult(accuracy=test_accuracy, decisions=decisions,
                        chosen_features=chosen, dev_accuracies=dev_accuracies, model=model)


@dataclass(frozen=True)
class AblationRow:
    removed: str | None
    metric: float
    delta: float


def run_ablation(
    train_pairs: Sequence[InstancePair],
    train_fvs: Mapping[str, FeatureVector],
    dev_pairs: Sequence[InstancePair],
    dev_fvs: Mapping[str, FeatureVector],
    schema: Sequence[str],
) -> list[AblationRow]:
    """Mean per-lemma dev Spearman for the full schema and with each feature
    removed in turn, in schema order."""
    schema = tuple(schema)
    if not schema:
        raise DataError("empty schema")

    def evaluate(names: tuple[str, ...]) -> float:
        if not names:
            raise DataError("empty schema")
        fvs = [train_fvs[p.pair_id] for p in train_pairs]
        targets = [graded_target(p) for p in train_pairs]
        model = train_graded_model(fvs, targets, names)
        predictions = {p.pair_id: predict(model, dev_fvs[p.pair_id]) for p in dev_pairs}
        return report(predictions, dev_pairs, grouping="by-lemma").aggregate

    base = evaluate(schema)
    rows = [AblationRow(removed=None, metric=base, delta=0.0)]
    for name in schema:
        reduced = tuple(n for n in schema if n != name)
        value = evaluate(reduced)
        rows.append(AblationRow(removed=name, metric=value, delta=value - base))
    return rows


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def model_to_dict(model: RegressionModel) -> dict:
    payload = {
        "kind": model.kind,
        "schema": list(model.schema),
        "weights": [float(w) for w in model.weights],
        "bias": model.bias,
        "feature_mean": [float(m) for m in model.feature_mean],
        "feature_std": [float(s) for s in model.feature_std],
        "metadata": dict(model.metadata),
    }
    if model.backoff is not None:
        payload["backoff"] = model_to_dict(model.backoff)
    return payload


def model_from_dict(payload: Mapping) -> RegressionModel:
    try:
        backoff = model_from_dict(payload["backoff"]) if "backoff" in payload else None
        return RegressionModel(
            kind=payload["kind"],
            schema=tuple(payload["schema"]),
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=float(payload["bias"]),
            feature_mean=np.asarray(payload["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(payload["feature_std"], dtype=np.float64),
            backoff=backoff,
            metadata=dict(payload.get("metadata", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid model document: {exc}") from exc


def save_model(model: RegressionModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_model(path) -> RegressionModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc.msg}") from None
    return model_from_dict(payload)
