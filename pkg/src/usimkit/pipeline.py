"""Config-driven experiment runner: annotate -> features -> train -> evaluate.

A TOML file names the data, substitute source, feature set, model kind, and
evaluation grouping. Every stage's output is cached under a key derived from
the stage configuration and the checksums of its inputs, so rerunning an
unchanged config reuses the cache (logged), while any config or data change
recomputes. USIMKIT_CACHE_DIR overrides the cache location.

Minimal graded config::

    [output]
    dir = "out/run1"

    [data]
    instances = "instances.jsonl"
    pairs = "pairs.tsv"
    embeddings = "vectors.txt"
    bundles_target = "bert.jsonl"       # optional
    bundles_sentence = "c2v.jsonl"      # optional
    pool = "pool.tsv"                   # for substitutes.source = "auto"; omit to
                                        # derive pools from data.paraphrases
    gold_substitutes = "subs.jsonl"     # needed when substitutes.source = "gold"

    [substitutes]
    source = "gold"                     # gold | auto | none

    [model]
    kind = "graded-loo"                 # or "binary" with train/dev/test pairs

The binary kind reads data.train_pairs / dev_pairs / test_pairs instead of
data.pairs.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import corpus, features as feats, metrics, models, substitutes
from .errors import DataError
from .representations import (
    ReprResources,
    ReprSpec,
    SifConfig,
    fit_sif_over_instances,
    load_bundles,
    load_embeddings,
)
from .util import atomic_write_text, config_hash, sha256_file, write_meta

log = logging.getLogger(__name__)


class _Cache:
    def __init__(self, cache_dir: Path):
        self.dir = cache_dir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hits: list[str] = []

    def text(self, stage: str, stage_config: dict, inputs: list[str], producer) -> str:
        key = config_hash({
            "stage": stage,
            "config": stage_config,
            "inputs": {str(p): sha256_file(p) for p in inputs},
        })
        artifact = self.dir / f"{stage}-{key}.txt"
        if artifact.exists():
            self.hits.append(stage)
            log.info("cache hit: %s (%s)", stage, key[:12])
            print(f"cache hit: {stage}", file=sys.stderr)
            return artifact.read_text(encoding="utf-8")
        text = producer()
        atomic_write_text(artifact, text)
        return text


def _require(config: dict, section: str, key: str) -> str:
    try:
        value = config[section][key]
    except KeyError:
        raise DataError(f"pipeline config is missing [{section}] {key}") from None
    return value


def _existing(path: str) -> str:
    if not Path(path).exists():
        raise DataError(f"pipeline config names a missing path: {path}")
    return path


def pipeline_run(config_path, jobs: int = 1) -> dict:
    """Execute the configured experiment; returns a summary dict."""
    config_path = Path(config_path)
    if not config_path.exists():
        raise DataError(f"pipeline config not found: {config_path}")
    with open(config_path, "rb") as fh:
        config = tomllib.load(fh)

    out_dir = Path(_require(config, "output", "dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = Path(os.environ.get("USIMKIT_CACHE_DIR", out_dir / ".cache"))
    cache = _Cache(cache_dir)

    data = config.get("data", {})
    for key, path in data.items():
        _existing(path)
    instances = corpus.load_instances(_require(config, "data", "instances"))
    table = load_embeddings(_existing(_require(config, "data", "embeddings")),
                            frequencies_path=data.get("frequencies"))

    sub_config = config.get("substitutes", {})
    source = sub_config.get("source", "none")
    subs = None
    subs_path = None
    if source == "gold":
        subs_path = _existing(_require(config, "data", "gold_substitutes"))
        subs = corpus.load_substitute_sets(subs_path, instances=instances)
        provenance = "gold"
    elif source == "auto":
        subs_path = str(out_dir / "substitutes.jsonl")
        subs = _stage_annotate(cache, config, instances, table, subs_path, jobs)
        provenance = sub_config.get("provenance", "auto-curated")
    elif source == "none":
        provenance = None
    else:
        raise DataError(f"unknown substitutes source {source!r}")

    extractors, extractor_inputs = _build_extractors(config, instances, table)
    model_config = config.get("model", {})
    kind = model_config.get("kind", "graded-loo")

    if kind == "graded-loo":
        summary = _run_graded(cache, config, instances, table, extractors,
                              extractor_inputs, subs, subs_path, provenance,
                              out_dir, jobs)
    elif kind == "binary":
        summary = _run_binary(cache, config, instances, table, extractors,
                              extractor_inputs, subs, subs_path, provenance,
                              out_dir, jobs)
    else:
        raise DataError(f"unknown model kind {kind!r}")

    summary["cache_hits"] = list(cache.hits)
    atomic_write_text(out_dir / "summary.json",
                      json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_meta(out_dir / "summary.json", {"config_file": str(config_path),
                                          "config": _jsonable(config)},
               [config_path])
    return summary


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=str))


def _stage_annotate(cache, config, instances, table, out_path, jobs):
    data = config["data"]
    sub_config = config.get("substitutes", {})
    bundles = {}
    inputs = [data["instances"], data["embeddings"]]
    if data.get("bundles_sentence"):
        bundles = load_bundles(data["bundles_sentence"])
        inputs.append(data["bundles_sentence"])
    store = None
    if data.get("paraphrases"):
        store = corpus.load_paraphrases(data["paraphrases"])
        inputs.append(data["paraphrases"])
    if data.get("pool"):
        pool = corpus.load_candidate_pool(_existing(data["pool"]))
        inputs.append(data["pool"])
    elif store is not None:
        pool = corpus.pool_from_paraphrases(
            store, {(i.lemma, i.pos) for i in instances.values()})
    else:
        raise DataError("automatic annotation needs data.pool or data.paraphrases")
    filter_text = sub_config.get("filter", "none")
    filter_config = None
    if filter_text != "none":
        filter_config = substitutes.FilterConfig.parse(filter_text)
        if filter_config.kind == "ppdb-adjacent" and store is None:
            raise DataError("the ppdb filter needs data.paraphrases")
    mode = sub_config.get("mode", "context-only")

    def produce() -> str:
        rankings, skipped, fallbacks = substitutes.annotate_all(
            instances, pool, table, bundles=bundles, mode=mode,
            filter_config=filter_config, store=store, jobs=jobs,
        )
        if not rankings:
            raise DataError("no instance could be annotated")
        log.info("annotated %d instances (%d skipped, %d context fallbacks)",
                 len(rankings), len(skipped), fallbacks)
        return corpus.serialize_substitute_sets(
            [rankings[i].to_substitute_set() for i in sorted(rankings)]
        )

    text = cache.text("annotate", {"mode": mode, "filter": filter_text}, inputs, produce)
    atomic_write_text(out_path, text)
    return corpus.load_substitute_sets(out_path, instances=instances)


def _build_extractors(config, instances, table):
    data = config["data"]
    feature_config = config.get("features", {})
    extractors = []
    inputs = [data["instances"], data["embeddings"]]
    if data.get("bundles_target"):
        extractors.append(feats.EmbeddingFeature(
            name=feats.COS_CONTEXTUAL_TARGET_AV4,
            spec=ReprSpec(source="contextual-target", layer_combination="average-of-layers"),
            resources=ReprResources(instances=instances,
                                    bundles=load_bundles(data["bundles_target"])),
        ))
        inputs.append(data["bundles_target"])
    if data.get("bundles_sentence"):
        extractors.append(feats.EmbeddingFeature(
            name=feats.COS_SENTENCE_VECTOR,
            spec=ReprSpec(source="sentence-vector"),
            resources=ReprResources(instances=instances,
                                    bundles=load_bundles(data["bundles_sentence"])),
        ))
        inputs.append(data["bundles_sentence"])
    if feature_config.get("with_static"):
        extractors.append(feats.EmbeddingFeature(
            name="cos_static_average",
            spec=ReprSpec(source="static-average"),
            resources=ReprResources(instances=instances, table=table),
        ))
    if feature_config.get("with_sif"):
        sif = fit_sif_over_instances(instances.values(), table, SifConfig())
        extractors.append(feats.EmbeddingFeature(
            name="cos_sif",
            spec=ReprSpec(source="sif"),
            resources=ReprResources(instances=instances, table=table, sif=sif),
        ))
    if not extractors:
        raise DataError("pipeline config yields no embedding features")
    return extractors, inputs


def _stage_features(cache, config, pairs_path, pairs, extractors, extractor_inputs,
                    subs, subs_path, provenance, table, out_path, jobs):
    schema = [e.name for e in extractors]
    if subs is not None:
        schema += list(feats.SUBSTITUTE_FEATURES)
    inputs = [pairs_path] + extractor_inputs + ([subs_path] if subs_path else [])

    def produce() -> str:
        fvs = feats.build_feature_matrix(pairs, extractors, substitutes=subs,
                                         table=table, provenance=provenance, jobs=jobs)
        return feats.serialize_feature_matrix(fvs, schema)

    text = cache.text("features", {"schema": schema, "pairs": str(pairs_path),
                                   "provenance": provenance}, inputs, produce)
    atomic_write_text(out_path, text)
    loaded_schema, fvs = feats.load_feature_matrix(out_path)
    return loaded_schema, {fv.pair_id: fv for fv in fvs}


def _run_graded(cache, config, instances, table, extractors, extractor_inputs,
                subs, subs_path, provenance, out_dir, jobs):
    pairs_path = _existing(_require(config, "data", "pairs"))
    pairs = corpus.load_pairs(pairs_path, kind="usim-pairs", instances=instances)
    schema, fvs_by_pair = _stage_features(
        cache, config, pairs_path, pairs, extractors, extractor_inputs,
        subs, subs_path, provenance, table, out_dir / "features.tsv", jobs,
    )
    extra_pairs, extra_fvs = (), {}
    data = config["data"]
    if data.get("extra_pairs"):
        extra_pairs = corpus.load_pairs(_existing(data["extra_pairs"]), kind="wic-pairs")
        _, extra_fvs = _stage_features(
            cache, config, data["extra_pairs"], extra_pairs, extractors,
            extractor_inputs, subs, subs_path, provenance, table,
            out_dir / "extra-features.tsv", jobs,
        )
    result = models.run_loo_graded(pairs, fvs_by_pair, schema,
                                   extra_pairs=extra_pairs, extra_fvs=extra_fvs,
                                   jobs=jobs)
    atomic_write_text(out_dir / "predictions.tsv",
                      metrics.serialize_predictions(result.predictions))
    grouping = config.get("evaluate", {}).get("grouping", "by-lemma")
    rep = metrics.report(result.predictions, pairs, grouping=grouping)
    atomic_write_text(out_dir / "report.tsv", rep.to_tsv())
    atomic_write_text(out_dir / "report.json", rep.to_json())
    return {"kind": "graded-loo", "schema": list(schema),
            "mean_spearman": result.mean_spearman,
            "excluded_lemmas": list(result.excluded),
            "metric": rep.metric, "aggregate": rep.aggregate}


def _run_binary(cache, config, instances, table, extractors, extractor_inputs,
                subs, subs_path, provenance, out_dir, jobs):
    model_config = config.get("model", {})
    logistic = models.LogisticConfig(
        epochs=int(model_config.get("epochs", 500)),
        learning_rate=float(model_config.get("learning_rate", 0.1)),
        l2=float(model_config.get("l2", 1e-4)),
        seed=int(model_config.get("seed", 13)),
    )
    splits = {}
    for name in ("train", "dev", "test"):
        path = _existing(_require(config, "data", f"{name}_pairs"))
        pairs = corpus.load_pairs(path, kind="wic-pairs", instances=instances)
        _, fvs = _stage_features(
            cache, config, path, pairs, extractors, extractor_inputs,
            subs, subs_path, provenance, table, out_dir / f"{name}-features.tsv", jobs,
        )
        splits[name] = (pairs, fvs)
    result = models.run_binary(splits["train"], splits["dev"], splits["test"],
                               config=logistic)
    atomic_write_text(out_dir / "decisions.tsv",
                      metrics.serialize_predictions(result.decisions))
    models.save_model(result.model, out_dir / "model.json")
    rep = metrics.report(result.decisions, splits["test"][0], grouping="pooled")
    atomic_write_text(out_dir / "report.tsv", rep.to_tsv())
    atomic_write_text(out_dir / "report.json", rep.to_json())
    return {"kind": "binary", "accuracy": result.accuracy,
            "chosen_features": list(result.chosen_features),
            "dev_accuracies": {" ".join(k): v for k, v in result.dev_accuracies.items()}}
