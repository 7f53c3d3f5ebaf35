import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usimkit.corpus import AnnotatorJudgments, InstancePair
from usimkit.errors import DataError, UndefinedMetricError
from usimkit.metrics import (
    MetricReport,
    accuracy,
    average_ranks,
    load_predictions,
    report,
    serialize_predictions,
    spearman,
    uiaa,
    umid,
)


def naive_spearman(x, y):
    """Rank-then-Pearson with explicitly enumerated average ranks.

    Deliberately written without numpy vector tricks so it can serve as an
    independent oracle.
    """

    def ranks(values):
        out = []
        for v in values:
            smaller = sum(1 for u in values if u < v)
            equal = sum(1 for u in values if u == v)
            # ranks smaller+1 .. smaller+equal share their mean
            out.append(smaller + (equal + 1) / 2.0)
        return out

    rx, ry = ranks(list(x)), ranks(list(y))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def judgments(lemma, rows):
    return AnnotatorJudgments(
        lemma=lemma, scores={(ann, pid): s for ann, pid, s in rows})


class TestSpearman:
    def test_identity(self):
        assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_tie_case_matches_oracle(self):
        x = [1, 2, 2, 4]
        y = [1, 3, 2, 4]
        assert spearman(x, y) == pytest.approx(naive_spearman(x, y), abs=1e-12)
        assert spearman(x, y) == pytest.approx(3 / math.sqrt(10), abs=1e-12)

    def test_randomized_against_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(300):
            n = int(rng.integers(2, 50))
            x = rng.integers(0, 8, size=n).astype(float)  # heavy ties
            y = rng.integers(0, 8, size=n).astype(float)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            assert spearman(x, y) == pytest.approx(naive_spearman(x, y), abs=1e-12)

    def test_matches_scipy(self):
        from scipy.stats import spearmanr

        rng = np.random.default_rng(7)
        for _ in range(50):
            x = rng.integers(0, 5, size=20).astype(float)
            y = rng.integers(0, 5, size=20).astype(float)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            assert spearman(x, y) == pytest.approx(spearmanr(x, y).statistic, abs=1e-12)

    def test_constant_input_undefined(self):
        with pytest.raises(UndefinedMetricError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            spearman([1, 2], [1, 2, 3])

    def test_symmetric(self):
        x, y = [1.0, 5.0, 2.0, 2.0], [0.1, 0.5, 0.9, 0.2]
        assert spearman(x, y) == pytest.approx(spearman(y, x), abs=1e-15)

    @given(st.lists(st.integers(min_value=0, max_value=20), min_size=3, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_invariant_under_monotone_transform(self, xs):
        ys = list(range(len(xs)))
        if len(set(xs)) < 2:
            return
        base = spearman(xs, ys)
        transformed = [math.exp(0.3 * x) + 7 for x in xs]  # strictly increasing
        assert spearman(transformed, ys) == pytest.approx(base, abs=1e-12)


class TestAverageRanks:
    def test_simple(self):
        assert list(average_ranks([10, 20, 30])) == [1.0, 2.0, 3.0]

    def test_ties_share_mean_rank(self):
        assert list(average_ranks([1, 2, 2, 4])) == [1.0, 2.5, 2.5, 4.0]


class TestAccuracy:
    def test_identical(self):
        assert accuracy(["T", "F"], ["T", "F"]) == 1.0

    def test_complement(self):
        assert accuracy(["T", "F"], ["F", "T"]) == 0.0

    def test_half(self):
        assert accuracy([1, 0, 1, 0], [1, 0, 0, 1]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            accuracy([1], [1, 0])

    def test_symmetric_in_arguments(self):
        pred, gold = ["T", "F", "T"], ["T", "T", "F"]
        assert accuracy(pred, gold) == accuracy(gold, pred)


class TestUiaa:
    def test_identical_judgments(self):
        j = judgments("w", [("a1", "p1", 1), ("a1", "p2", 3), ("a1", "p3", 5),
                            ("a2", "p1", 1), ("a2", "p2", 3), ("a2", "p3", 5)])
        assert uiaa(j) == pytest.approx(1.0)

    def test_reversed_judgments(self):
        j = judgments("w", [("a1", "p1", 1), ("a1", "p2", 3), ("a1", "p3", 5),
                            ("a2", "p1", 5), ("a2", "p2", 3), ("a2", "p3", 1)])
        assert uiaa(j) == pytest.approx(-1.0)

    def test_three_annotators_mean(self):
        # pairwise correlations 1.0 (a1,a2), 0.5 (a1,a3), 0.5 (a2,a3) -> 2/3
        base = [1, 2, 3, 4, 5]
        third = [2, 4, 1, 3, 5]  # spearman vs base = 0.5
        assert naive_spearman(base, third) == pytest.approx(0.5)
        rows = []
        for ann, vals in (("a1", base), ("a2", base), ("a3", third)):
            rows += [(ann, f"p{i}", v) for i, v in enumerate(vals)]
        assert uiaa(judgments("w", rows)) == pytest.approx(2 / 3)

    def test_shared_pairs_only(self):
        j = judgments("w", [("a1", "p1", 1), ("a1", "p2", 4), ("a1", "px", 3),
                            ("a2", "p1", 2), ("a2", "p2", 5), ("a2", "py", 1)])
        assert uiaa(j) == pytest.approx(1.0)  # computed on p1, p2 only

    def test_single_annotator_excluded(self):
        with pytest.raises(UndefinedMetricError):
            uiaa(judgments("w", [("a1", "p1", 1), ("a1", "p2", 3)]))

    def test_no_valid_pair_excluded(self):
        j = judgments("w", [("a1", "p1", 1), ("a2", "p2", 3)])  # no shared pairs
        with pytest.raises(UndefinedMetricError):
            uiaa(j)


class TestUmid:
    def test_all_extreme_high(self):
        j = judgments("w", [("a1", f"p{i}", 5) for i in range(4)])
        assert umid(j) == 0.0

    def test_all_mid(self):
        j = judgments("w", [("a1", f"p{i}", 3) for i in range(4)])
        assert umid(j) == 1.0

    def test_half_mid(self):
        j = judgments("w", [("a1", "p1", 1), ("a1", "p2", 3),
                            ("a1", "p3", 5), ("a1", "p4", 4)])
        assert umid(j) == 0.5

    def test_invariant_to_order(self):
        rows = [("a1", "p1", 2), ("a2", "p1", 5), ("a1", "p2", 1)]
        assert umid(judgments("w", rows)) == umid(judgments("w", rows[::-1]))


def graded_pairs():
    pairs = []
    predictions = {}
    gold = {"w1": [1.0, 2.5, 4.0, 5.0], "w2": [2.0, 3.0, 4.5]}
    for lemma, scores in gold.items():
        for i, s in enumerate(scores):
            pid = f"{lemma}.p{i}"
            pairs.append(InstancePair(pid, lemma, f"{lemma}.a{i}", f"{lemma}.b{i}",
                                      gold_score=s))
            predictions[pid] = s  # predictions equal gold
    return pairs, predictions


class TestReport:
    def test_predictions_equal_gold(self):
        pairs, predictions = graded_pairs()
        rep = report(predictions, pairs, grouping="by-lemma")
        assert rep.metric == "spearman"
        assert all(v == pytest.approx(1.0) for v in rep.per_lemma.values())
        assert rep.aggregate == pytest.approx(1.0)

    def test_aggregate_is_mean_of_per_lemma(self):
        pairs, predictions = graded_pairs()
        predictions["w2.p0"] = 9.9  # push w2 off perfect
        rep = report(predictions, pairs, grouping="by-lemma")
        assert rep.aggregate == pytest.approx(
            np.mean(list(rep.per_lemma.values())), abs=1e-12)

    def test_pooled(self):
        pairs, predictions = graded_pairs()
        rep = report(predictions, pairs, grouping="pooled")
        assert rep.per_lemma == {}
        assert rep.aggregate == pytest.approx(1.0)

    def test_missing_gold_lists_pair_ids(self):
        pairs, predictions = graded_pairs()
        predictions["ghost.p0"] = 3.0
        with pytest.raises(DataError, match="ghost.p0"):
            report(predictions, pairs)

    def test_binary_accuracy(self):
        pairs = [InstancePair(f"p{i}", "w", f"a{i}", f"b{i}", gold_label=l)
                 for i, l in enumerate(["T", "F", "T", "F"])]
        predictions = {"p0": 0.9, "p1": 0.2, "p2": 0.4, "p3": 0.6}
        rep = report(predictions, pairs, grouping="pooled")
        assert rep.metric == "accuracy"
        assert rep.aggregate == 0.5

    def test_mixed_gold_rejected(self):
        pairs = [InstancePair("p0", "w", "a0", "b0", gold_score=3.0),
                 InstancePair("p1", "w", "a1", "b1", gold_label="T")]
        with pytest.raises(DataError, match="mix"):
            report({"p0": 3.0, "p1": 1.0}, pairs)

    def test_constant_lemma_excluded(self):
        pairs, predictions = graded_pairs()
        for p in pairs:
            if p.lemma == "w2":
                predictions[p.pair_id] = 2.0  # constant -> undefined
        rep = report(predictions, pairs)
        assert rep.excluded == ("w2",)
        assert set(rep.per_lemma) == {"w1"}
        assert "w2" in rep.counts

    def test_small_lemma_excluded(self):
        pairs, predictions = graded_pairs()
        extra = InstancePair("w3.p0", "w3", "w3.a", "w3.b", gold_score=2.0)
        rep = report({**predictions, "w3.p0": 2.0}, pairs + [extra])
        assert "w3" in rep.excluded

    def test_tsv_and_json(self):
        pairs, predictions = graded_pairs()
        rep = report(predictions, pairs)
        tsv = rep.to_tsv()
        assert tsv.startswith("lemma\tspearman\tn\n")
        assert "w1\t" in tsv and tsv.rstrip().splitlines()[-1].startswith("ALL\t")
        payload = rep.to_json()
        assert '"aggregate"' in payload


class TestPredictionsIO:
    def test_round_trip(self, tmp_path):
        predictions = {"p1": 0.25, "p2": -1.5, "p3": "T"}
        text = serialize_predictions(predictions)
        path = tmp_path / "pred.tsv"
        path.write_text(text, encoding="utf-8")
        assert load_predictions(path) == predictions
        assert serialize_predictions(load_predictions(path)) == text

    def test_duplicate_rejected(self, tmp_path):
        path = tmp_path / "pred.tsv"
        path.write_text("p1\t0.5\np1\t0.75\n", encoding="utf-8")
        with pytest.raises(DataError, match="duplicate"):
            load_predictions(path)


class TestPlot:
    def test_svg_written(self, tmp_path):
        pairs, predictions = graded_pairs()
        from usimkit.metrics import plot_report

        out = tmp_path / "scatter.svg"
        plot_report(predictions, pairs, out)
        content = out.read_text(encoding="utf-8")
        assert "<svg" in content
