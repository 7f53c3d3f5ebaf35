"""Acceptance suite: property-based exit criteria, no external data needed.

Each test prints one pass/fail line (run with ``pytest -s`` to see them all)
and enforces its runtime budget. Oracles are independent implementations
living in the test tree, never the library code under test.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from usimkit.corpus import InstancePair, ParaphraseStore, SubstituteSet
from usimkit.features import FeatureVector, gap
from usimkit.metrics import spearman
from usimkit.models import (
    LogisticConfig,
    _train_checksum,
    fit_linear,
    fit_logistic,
    predict,
    run_loo_graded,
)
from usimkit.representations import EmbeddingTable, SifState, apply_sif, fit_sif
from usimkit.substitutes import (
    FilterConfig,
    SubstituteRanking,
    apply_filter,
    fit_score,
    filter_score_gap,
)

from test_features import gap_oracle
from test_metrics import naive_spearman
from test_models import ols_pinv_oracle


@contextmanager
def criterion(name: str, budget_seconds: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    assert elapsed < budget_seconds, (
        f"{name} took {elapsed:.2f}s, budget {budget_seconds}s")
    print(f"[ACCEPTANCE] {name}: PASS ({elapsed:.2f}s)")


def random_ranking(rng, max_items=10):
    n = int(rng.integers(1, max_items + 1))
    words = [f"w{i}" for i in range(n)]
    scores = np.sort(rng.uniform(0.0, 1.0, size=n))[::-1]
    return SubstituteRanking("i", tuple(zip(words, scores)))


def test_gap_oracle_equivalence():
    with criterion("GAP oracle equivalence (1,000 cases, 1e-9)", 5.0):
        rng = np.random.default_rng(20240811)
        vocabulary = [f"w{i}" for i in range(12)]
        for _ in range(1000):
            n_sys = int(rng.integers(1, 9))
            n_gold = int(rng.integers(1, 9))
            system_words = list(rng.choice(vocabulary, size=n_sys, replace=False))
            gold_words = rng.choice(vocabulary, size=n_gold, replace=False)
            weights = {w: float(rng.integers(1, 7)) for w in gold_words}
            gold = SubstituteSet("g", tuple(sorted(weights.items())))
            scores = np.sort(rng.uniform(0, 1, size=n_sys))[::-1]
            system = SubstituteRanking("s", tuple(zip(system_words, scores)))
            ours = gap(system, gold)
            reference = gap_oracle(system_words, weights)
            assert abs(ours - reference) < 1e-9


def test_spearman_oracle_equivalence():
    with criterion("Spearman oracle equivalence (1,000 cases, 1e-12)", 5.0):
        rng = np.random.default_rng(7)
        done = 0
        while done < 1000:
            n = int(rng.integers(2, 51))
            x = rng.integers(0, max(2, n // 2), size=n).astype(float)  # ties likely
            y = rng.integers(0, max(2, n // 2), size=n).astype(float)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            assert abs(spearman(x, y) - naive_spearman(x, y)) < 1e-12
            done += 1


def _filter_fixtures(rng, r):
    table = EmbeddingTable(3, {w: rng.standard_normal(3) for w in r.words})
    pairs = {}
    for a, b in zip(r.words, r.words[1:]):
        if rng.random() < 0.6:
            pairs[ParaphraseStore._key(a, b)] = None
    store = ParaphraseStore(pairs=pairs)
    k = int(rng.integers(1, 12))
    return [
        (FilterConfig(kind="top-k", k=k), {}),
        (FilterConfig(kind="score-gap"), {}),
        (FilterConfig(kind="embedding-adjacent", T=0.2), {"table": table}),
        (FilterConfig(kind="ppdb-adjacent"), {"store": store}),
    ]


def test_filter_prefix_property():
    with criterion("filter prefix property (1,000 rankings, 4 filters)", 5.0):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            r = random_ranking(rng)
            for config, resources in _filter_fixtures(rng, r):
                out = apply_filter(r, config, **resources)
                assert out.items == r.items[: len(out)]  # prefix, scores kept
                if config.kind == "score-gap":
                    # deterministic; idempotence is a spec defect, see the
                    # strict xfail below and the filter's own unit tests
                    assert apply_filter(r, config).items == out.items
                else:
                    assert apply_filter(out, config, **resources).items == out.items


@pytest.mark.xfail(
    strict=True,
    reason="cut-at-largest-gap keeps items strictly before the gap pair, as its "
    "documented examples require; any multi-item output then re-cuts on "
    "reapplication, so idempotence cannot hold for this filter",
)
def test_score_gap_idempotence_as_stated():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        r = random_ranking(rng)
        out = filter_score_gap(r)
        assert filter_score_gap(out).items == out.items


def test_fit_score_bounds_and_monotonicity():
    with criterion("fit-score bounds and monotonicity", 1.0):
        rng = np.random.default_rng(17)
        cos_st = rng.uniform(-1.0, 1.0, size=3000)
        cos_sc = rng.uniform(-1.0, 1.0, size=3000)
        scores = np.array([fit_score(a, b) for a, b in zip(cos_st, cos_sc)])
        assert np.all(scores >= 0.0) and np.all(scores <= 1.0)
        # monotone in each factor, holding the other fixed
        for a, b in zip(cos_st[:500], cos_sc[:500]):
            bump = rng.uniform(0.0, 1.0)
            assert fit_score(min(1.0, a + bump), b) >= fit_score(a, b) - 1e-15
            assert fit_score(a, min(1.0, b + bump)) >= fit_score(a, b) - 1e-15


def test_ols_recovery_and_logistic():
    with criterion("OLS recovery vs pseudo-inverse; separable logistic", 10.0):
        rng = np.random.default_rng(2024)
        X = rng.standard_normal((200, 5))
        planted = rng.uniform(-3.0, 3.0, size=5)
        y = X @ planted + 1.25
        model = fit_linear(X, y, list("abcde"))
        coef, intercept = model.original_coefficients()
        oracle_coef, oracle_intercept = ols_pinv_oracle(X, y)
        assert np.allclose(coef, oracle_coef, atol=1e-6)
        assert abs(intercept - oracle_intercept) < 1e-6
        assert np.allclose(coef, planted, atol=1e-6)

        n = 150
        X0 = rng.normal(-1.5, 0.4, size=(n, 2))
        X1 = rng.normal(+1.5, 0.4, size=(n, 2))
        Xl = np.vstack([X0, X1])
        yl = np.concatenate([np.zeros(n), np.ones(n)])
        logistic = fit_logistic(Xl, yl, ["a", "b"], config=LogisticConfig())
        correct = 0
        for row, label in zip(Xl, yl):
            fv = FeatureVector("p", {"a": row[0], "b": row[1]})
            correct += (predict(logistic, fv) >= 0.5) == bool(label)
        assert correct / len(yl) >= 0.95
        history = logistic.metadata["loss_history"]
        assert np.all(np.diff(history) <= 1e-12)


def test_sif_correctness():
    with criterion("SIF power iteration vs dense eigendecomposition", 5.0):
        rng = np.random.default_rng(31)
        for _ in range(50):
            X = rng.standard_normal((50, 10))
            state = fit_sif(X)
            gram = X.T @ X
            eigenvalues, eigenvectors = np.linalg.eigh(gram)
            u = eigenvectors[:, int(np.argmax(eigenvalues))]
            assert abs(float(np.dot(state.direction, u))) >= 1.0 - 1e-6
        direction = rng.standard_normal(10)
        direction /= np.linalg.norm(direction)
        state = SifState(direction=direction)
        for _ in range(100):
            v = rng.standard_normal(10)
            once = apply_sif(v, state)
            assert np.allclose(apply_sif(once, state), once, atol=1e-12)


def test_no_leakage_checksums():
    with criterion("no-leakage checksums on 5-lemma LOO folds", 10.0):
        rng = np.random.default_rng(5)
        pairs, fvs = [], {}
        for li in range(5):
            lemma = f"lemma{li}"
            for pi in range(9):
                pid = f"{lemma}.p{pi}"
                gold = float(rng.uniform(1.0, 5.0))
                pairs.append(InstancePair(pid, lemma, f"{pid}.a", f"{pid}.b",
                                          gold_score=gold))
                fvs[pid] = FeatureVector(pid, {
                    "e": float(rng.standard_normal()),
                    "f": gold + float(rng.normal(scale=0.1)),
                })
        result = run_loo_graded(pairs, fvs, ("e", "f"))
        assert len(result.folds) == 5
        by_lemma = {}
        for p in pairs:
            by_lemma.setdefault(p.lemma, []).append(p.pair_id)
        seen_checksums = set()
        for fold in result.folds:
            # held-out lemma absent from every training artifact
            assert fold.held_out not in fold.train_lemmas
            expected = [pid for lemma, ids in by_lemma.items()
                        if lemma != fold.held_out for pid in ids]
            assert fold.train_checksum == _train_checksum(expected)
            held_out_ids = set(by_lemma[fold.held_out])
            assert not held_out_ids & set(expected)
            seen_checksums.add(fold.train_checksum)
        assert len(seen_checksums) == 5  # every fold trains on a distinct set
