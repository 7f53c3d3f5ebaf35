"""Reproduction criteria that need the original corpora and encoder exports.

These run only when USIMKIT_DATA_DIR points at user-supplied data laid out as
described in the README (Usim/LexSub pairs and gold substitutes, a candidate
pool, PPDB paraphrases, GloVe vectors, and per-token / blank-slot vector
bundles exported from the published encoders). Without that directory every
test here is skipped; the property-based acceptance suite stays runnable.
"""

import os
from pathlib import Path

import pytest

from usimkit import corpus
from usimkit.features import (
    EmbeddingFeature,
    GRADED_SCHEMA,
    SUBSTITUTE_FEATURES,
    build_feature_matrix,
)
from usimkit.metrics import report
from usimkit.models import run_binary, run_loo_graded
from usimkit.representations import (
    ReprResources,
    ReprSpec,
    direct_usim,
    load_bundles,
    load_embeddings,
)
from usimkit.substitutes import FilterConfig, annotate_all, evaluate_filter

DATA_DIR = os.environ.get("USIMKIT_DATA_DIR")
needs_data = pytest.mark.skipif(
    DATA_DIR is None, reason="set USIMKIT_DATA_DIR to run reproduction tests")


def data_path(*parts) -> Path:
    path = Path(DATA_DIR).joinpath(*parts)
    if not path.exists():
        pytest.skip(f"missing reproduction input: {path}")
    return path


def load_usim():
    instances = corpus.load_instances(data_path("usim", "instances.jsonl"))
    pairs = corpus.load_pairs(data_path("usim", "pairs.tsv"), kind="usim-pairs",
                              instances=instances)
    return instances, pairs


def usim_extractors(instances):
    return [
        EmbeddingFeature(
            name="cos_contextual_target_av4",
            spec=ReprSpec(source="contextual-target",
                          layer_combination="average-of-layers"),
            resources=ReprResources(
                instances=instances,
                bundles=load_bundles(data_path("usim", "bundles_target.jsonl"))),
        ),
        EmbeddingFeature(
            name="cos_sentence_vector",
            spec=ReprSpec(source="sentence-vector"),
            resources=ReprResources(
                instances=instances,
                bundles=load_bundles(data_path("usim", "bundles_sentence.jsonl"))),
        ),
    ]


@needs_data
def test_direct_usim_contextual_target_av4():
    """Mean per-lemma Spearman of raw target-vector cosines: 0.518 +/- 0.05."""
    instances, pairs = load_usim()
    res = ReprResources(
        instances=instances,
        bundles=load_bundles(data_path("usim", "bundles_target.jsonl")))
    spec = ReprSpec(source="contextual-target", layer_combination="average-of-layers")
    predictions = direct_usim(pairs, spec, res)
    rho = report(predictions, pairs, grouping="by-lemma").aggregate
    print(f"[REPRODUCTION] direct contextual-target av4 rho = {rho:.3f}")
    assert abs(rho - 0.518) <= 0.05


@needs_data
def test_graded_loo_gold_substitutes():
    """LOO with gold substitutes: combined 0.626 +/- 0.05, embedding 0.494 +/- 0.05."""
    instances, pairs = load_usim()
    table = load_embeddings(data_path("glove", "vectors.txt"))
    subs = corpus.load_substitute_sets(
        data_path("usim", "gold_substitutes.jsonl"), instances=instances)
    fvs = build_feature_matrix(pairs, usim_extractors(instances),
                               substitutes=subs, table=table, provenance="gold")
    fvs_by_pair = {fv.pair_id: fv for fv in fvs}
    combined = run_loo_graded(pairs, fvs_by_pair, GRADED_SCHEMA)
    embedding = run_loo_graded(pairs, fvs_by_pair,
                               ("cos_contextual_target_av4", "cos_sentence_vector"))
    print(f"[REPRODUCTION] LOO combined rho = {combined.mean_spearman:.3f}, "
          f"embedding rho = {embedding.mean_spearman:.3f}")
    assert abs(combined.mean_spearman - 0.626) <= 0.05
    assert abs(embedding.mean_spearman - 0.494) <= 0.05


@needs_data
def test_filter_study_embedding_t02():
    """Curated pool + adjacent-similarity filter (T=0.2) on the held-out
    lexical substitution portion: F1 0.373 +/- 0.03."""
    instances = corpus.load_instances(data_path("lexsub", "instances.jsonl"))
    gold = corpus.load_substitute_sets(
        data_path("lexsub", "gold_substitutes.jsonl"), instances=instances)
    pool = corpus.load_candidate_pool(data_path("lexsub", "pool.tsv"))
    table = load_embeddings(data_path("glove", "vectors.txt"))
    bundles = load_bundles(data_path("lexsub", "bundles_sentence.jsonl"))
    rankings, skipped, _ = annotate_all(
        instances, pool, table, bundles=bundles, mode="context-only",
        filter_config=FilterConfig(kind="embedding-adjacent", T=0.2))
    evaluated = {iid: r for iid, r in rankings.items() if iid in gold}
    f1, fp_ratio = evaluate_filter(evaluated, gold)
    print(f"[REPRODUCTION] filter study F1 = {f1:.3f}, fp_ratio = {fp_ratio:.3f} "
          f"({len(skipped)} skipped)")
    assert abs(f1 - 0.373) <= 0.03


@needs_data
def test_wic_binary_accuracy():
    """Official split: embedding-only within 2.0 points of 63.62, combined
    within 2.0 of 64.86, both above the 59.4 prior result."""
    instances = corpus.load_instances(data_path("wic", "instances.jsonl"))
    table = load_embeddings(data_path("glove", "vectors.txt"))
    store = corpus.load_paraphrases(data_path("wic", "paraphrases.tsv"))
    pool_path = Path(DATA_DIR) / "wic" / "pool.tsv"
    if pool_path.exists():
        pool = corpus.load_candidate_pool(pool_path)
    else:
        pool = corpus.pool_from_paraphrases(
            store, {(i.lemma, i.pos) for i in instances.values()})
    bundles_sentence = load_bundles(data_path("wic", "bundles_sentence.jsonl"))
    rankings, _, _ = annotate_all(
        instances, pool, table, bundles=bundles_sentence, mode="target-and-context",
        filter_config=FilterConfig(kind="ppdb-adjacent"), store=store)
    subs = {iid: r.to_substitute_set() for iid, r in rankings.items()}

    extractors = [
        EmbeddingFeature(
            name="cos_contextual_target_av4",
            spec=ReprSpec(source="contextual-target",
                          layer_combination="average-of-layers"),
            resources=ReprResources(
                instances=instances,
                bundles=load_bundles(data_path("wic", "bundles_target.jsonl"))),
        ),
        EmbeddingFeature(
            name="cos_sentence_vector",
            spec=ReprSpec(source="sentence-vector"),
            resources=ReprResources(instances=instances, bundles=bundles_sentence),
        ),
    ]
    splits = {}
    for name in ("train", "dev", "test"):
        pairs = corpus.load_pairs(data_path("wic", f"{name}_pairs.tsv"),
                                  kind="wic-pairs", instances=instances)
        fvs = build_feature_matrix(pairs, extractors, substitutes=subs,
                                   table=table, provenance="auto-paraphrase")
        splits[name] = (pairs, {fv.pair_id: fv for fv in fvs})

    embedding_schema = ("cos_contextual_target_av4", "cos_sentence_vector")
    embedding = run_binary(splits["train"], splits["dev"], splits["test"],
                           combinations=[embedding_schema])
    combined = run_binary(splits["train"], splits["dev"], splits["test"],
                          combinations=[embedding_schema + SUBSTITUTE_FEATURES])
    emb_pct = 100.0 * embedding.accuracy
    comb_pct = 100.0 * combined.accuracy
    print(f"[REPRODUCTION] WiC embedding = {emb_pct:.2f}, combined = {comb_pct:.2f}")
    assert abs(emb_pct - 63.62) <= 2.0
    assert abs(comb_pct - 64.86) <= 2.0
    assert emb_pct > 59.4 and comb_pct > 59.4
