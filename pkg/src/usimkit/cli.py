"""Command-line entry point for batch experiments.

Subcommands cover each pipeline stage (annotate, features, train-graded,
train-binary, predict, evaluate, build-coinco, filter-eval, ablate) so gold
and automatic substitute annotations can be swapped mid-pipeline, plus
`pipeline` for a whole TOML-configured experiment.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
All outputs are written atomically and accompanied by a `.meta.json`
sidecar carrying the echoed configuration and input checksums.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import corpus, features as feats, metrics, models, substitutes
from .errors import DataError, NumericError
from .representations import (
    ReprResources,
    ReprSpec,
    SifConfig,
    fit_sif_over_instances,
    load_bundles,
    load_embeddings,
)
from .util import atomic_write_text, write_meta


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting with code 2."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> Parser:
    parser = Parser(prog="usimkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="rank and filter substitutes per instance")
    p.add_argument("--instances", required=True)
    p.add_argument("--pool", help="candidate pool TSV; omit to derive pools "
                                  "from --paraphrases")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--bundles", help="contextual bundles providing blank-slot context vectors")
    p.add_argument("--mode", choices=["context-only", "target-and-context"], default="context-only")
    p.add_argument("--filter", default="none",
                   help='none, ppdb, embedding:T=0.2, score-gap, or top-k:k=10')
    p.add_argument("--paraphrases", help="paraphrase TSV (needed by the ppdb filter "
                                         "and for derived pools)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="compute per-pair features")
    p.add_argument("--pairs", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--frequencies")
    p.add_argument("--bundles-target", help="bundles for the contextual target feature")
    p.add_argument("--bundles-sentence", help="bundles carrying per-instance sentence vectors")
    p.add_argument("--substitutes", help="gold-substitutes JSONL (gold or filtered automatic)")
    p.add_argument("--provenance", choices=list(feats.PROVENANCES), default="gold")
    p.add_argument("--with-static", action="store_true",
                   help="add a static-average sentence cosine feature")
    p.add_argument("--with-sif", action="store_true",
                   help="add a SIF sentence cosine feature")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-graded", help="leave-one-lemma-out graded regression")
    p.add_argument("--features", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--extra-features", help="feature matrix for extra same/diff pairs")
    p.add_argument("--extra-pairs", help="extra same/diff pairs TSV")
    p.add_argument("--schema", help="comma-separated feature names (default: matrix header)")
    p.add_argument("--full", action="store_true",
                   help="train one model on all pairs instead of running LOO")
    p.add_argument("--model-out", help="model JSON path (with --full)")
    p.add_argument("--pred-out", help="held-out predictions TSV (LOO mode)")
    p.add_argument("--report-out", help="report prefix, writes .tsv and .json (LOO mode)")
    p.add_argument("--jobs", type=int, default=1, help="parallel LOO folds")

    p = sub.add_parser("train-binary", help="logistic regression on an official split")
    p.add_argument("--train-features", required=True)
    p.add_argument("--train-pairs", required=True)
    p.add_argument("--dev-features", required=True)
    p.add_argument("--dev-pairs", required=True)
    p.add_argument("--test-features", required=True)
    p.add_argument("--test-pairs", required=True)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--model-out")
    p.add_argument("--out", required=True, help="test decisions TSV")
    p.add_argument("--report-out", help="report prefix, writes .tsv and .json")

    p = sub.add_parser("predict", help="apply a saved model to a feature matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score predictions against gold pairs")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True, help="pairs TSV with gold annotations")
    p.add_argument("--group", choices=["by-lemma", "pooled"], default="by-lemma")
    p.add_argument("--out", required=True, help="report prefix, writes .tsv and .json")
    p.add_argument("--plot", help="also write an SVG scatter of predicted vs gold")

    p = sub.add_parser("build-coinco", help="construct balanced same/diff pairs")
    p.add_argument("--substitutes", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--vocabulary", help="one word per line; restricts target lemmas")
    p.add_argument("--embeddings", help="use an embedding table's words as the vocabulary")
    p.add_argument("--min-substitutes", type=int, default=4)
    p.add_argument("--same-threshold", type=float, default=0.75)
    p.add_argument("--out", required=True)

    p = sub.add_parser("filter-eval", help="score filtered substitutes against gold")
    p.add_argument("--pred", required=True, help="filtered annotations, gold-substitutes JSONL")
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True, help="JSON with f1 and fp_ratio")

    p = sub.add_parser("ablate", help="dev metric with each feature removed in turn")
    p.add_argument("--features", required=True)
    p.add_argument("--train-pairs", required=True)
    p.add_argument("--dev-pairs", required=True)
    p.add_argument("--schema", help="comma-separated feature names (default: matrix header)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("pipeline", help="run a whole TOML-configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)

    return parser


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_annotate(args) -> None:
    instances = corpus.load_instances(args.instances)
    table = load_embeddings(args.embeddings)
    bundles = load_bundles(args.bundles) if args.bundles else {}
    store = corpus.load_paraphrases(args.paraphrases) if args.paraphrases else None
    if args.pool:
        pool = corpus.load_candidate_pool(args.pool)
    elif store is not None:
        pool = corpus.pool_from_paraphrases(
            store, {(i.lemma, i.pos) for i in instances.values()})
    else:
        raise UsageError("annotate needs --pool or --paraphrases")
    filter_config = None
    if args.filter != "none":
        filter_config = substitutes.FilterConfig.parse(args.filter)
        if filter_config.kind == "ppdb-adjacent" and store is None:
            raise DataError("the ppdb filter needs --paraphrases")

    rankings, skipped, fallback_context = substitutes.annotate_all(
        instances, pool, table, bundles=bundles, mode=args.mode,
        filter_config=filter_config, store=store, jobs=args.jobs,
    )
    if not rankings:
        raise DataError("no instance could be annotated")
    atomic_write_text(args.out, corpus.serialize_substitute_sets(
        [rankings[i].to_substitute_set() for i in sorted(rankings)]
    ))
    config = {
        "command": "annotate", "mode": args.mode, "filter": args.filter,
        "pool": "file" if args.pool else "derived-from-paraphrases",
        "skipped": skipped, "context_fallbacks": fallback_context,
    }
    inputs = [args.instances, args.embeddings]
    inputs += [p for p in (args.pool, args.bundles, args.paraphrases) if p]
    write_meta(args.out, config, inputs)


def _feature_extractors(args, instances):
    """The named representation-cosine features this run can compute."""
    table = load_embeddings(args.embeddings, frequencies_path=args.frequencies)
    extractors = []
    if args.bundles_target:
        bundles = load_bundles(args.bundles_target)
        extractors.append(feats.EmbeddingFeature(
            name=feats.COS_CONTEXTUAL_TARGET_AV4,
            spec=ReprSpec(source="contextual-target", layer_combination="average-of-layers"),
            resources=ReprResources(instances=instances, bundles=bundles),
        ))
    if args.bundles_sentence:
        bundles = load_bundles(args.bundles_sentence)
        extractors.append(feats.EmbeddingFeature(
            name=feats.COS_SENTENCE_VECTOR,
            spec=ReprSpec(source="sentence-vector"),
            resources=ReprResources(instances=instances, bundles=bundles),
        ))
    if args.with_static:
        extractors.append(feats.EmbeddingFeature(
            name="cos_static_average",
            spec=ReprSpec(source="static-average"),
            resources=ReprResources(instances=instances, table=table),
        ))
    if args.with_sif:
        sif = fit_sif_over_instances(instances.values(), table, SifConfig())
        extractors.append(feats.EmbeddingFeature(
            name="cos_sif",
            spec=ReprSpec(source="sif"),
            resources=ReprResources(instances=instances, table=table, sif=sif),
        ))
    if not extractors:
        raise DataError("no embedding features requested; pass bundle paths or --with-static")
    return table, extractors


def _cmd_features(args) -> None:
    instances = corpus.load_instances(args.instances)
    pairs = _load_any_pairs(args.pairs, instances)
    table, extractors = _feature_extractors(args, instances)
    subs = None
    if args.substitutes:
        subs = corpus.load_substitute_sets(args.substitutes, instances=instances)

    fvs = feats.build_feature_matrix(pairs, extractors, substitutes=subs, table=table,
                                     provenance=args.provenance if subs else None,
                                     jobs=args.jobs)
    schema = [e.name for e in extractors]
    if subs is not None:
        schema += list(feats.SUBSTITUTE_FEATURES)
    atomic_write_text(args.out, feats.serialize_feature_matrix(fvs, schema))
    config = {"command": "features", "schema": schema,
              "provenance": args.provenance if subs else None}
    inputs = [args.pairs, args.instances, args.embeddings]
    inputs += [p for p in (args.frequencies, args.bundles_target, args.bundles_sentence,
                           args.substitutes) if p]
    write_meta(args.out, config, inputs)


def _load_any_pairs(path, instances=None):
    """Pairs TSV of either flavor (graded scores or binary labels)."""
    return corpus.load_pairs(path, kind="any-pairs", instances=instances)


def _training_metadata(*data_paths) -> dict:
    from .util import sha256_file

    return {"data_checksums": {str(p): sha256_file(p) for p in data_paths}}


def _resolve_schema(arg, matrix_schema):
    if not arg:
        return tuple(matrix_schema)
    names = tuple(name.strip() for name in arg.split(",") if name.strip())
    unknown = [n for n in names if n not in matrix_schema]
    if unknown:
        raise DataError(f"schema names missing from the feature matrix: {', '.join(unknown)}")
    return names


def _cmd_train_graded(args) -> None:
    matrix_schema, fvs = feats.load_feature_matrix(args.features)
    fvs_by_pair = {fv.pair_id: fv for fv in fvs}
    pairs = _load_any_pairs(args.pairs)
    schema = _resolve_schema(args.schema, matrix_schema)

    if args.full:
        if not args.model_out:
            raise UsageError("--full needs --model-out")
        train_fvs = [fvs_by_pair[p.pair_id] for p in pairs]
        targets = [models.graded_target(p) for p in pairs]
        model = models.train_graded_model(train_fvs, targets, schema,
                                          metadata=_training_metadata(
                                              args.features, args.pairs))
        models.save_model(model, args.model_out)
        write_meta(args.model_out, {"command": "train-graded", "mode": "full",
                                    "schema": list(schema)},
                   [args.features, args.pairs])
        return

    extra_pairs, extra_fvs = (), {}
    if args.extra_pairs:
        extra_pairs = corpus.load_pairs(args.extra_pairs, kind="wic-pairs")
        if not args.extra_features:
            raise UsageError("--extra-pairs needs --extra-features")
        _, extra_list = feats.load_feature_matrix(args.extra_features)
        extra_fvs = {fv.pair_id: fv for fv in extra_list}
    result = models.run_loo_graded(pairs, fvs_by_pair, schema,
                                   extra_pairs=extra_pairs, extra_fvs=extra_fvs,
                                   jobs=args.jobs)
    if args.pred_out:
        atomic_write_text(args.pred_out, metrics.serialize_predictions(result.predictions))
        write_meta(args.pred_out, {"command": "train-graded", "mode": "loo",
                                   "schema": list(schema),
                                   "mean_spearman": result.mean_spearman},
                   [args.features, args.pairs])
    if args.report_out:
        rep = metrics.report(result.predictions, pairs, grouping="by-lemma")
        atomic_write_text(args.report_out + ".tsv", rep.to_tsv())
        atomic_write_text(args.report_out + ".json", rep.to_json())
    print(f"mean per-lemma spearman: {result.mean_spearman:.4f} "
          f"({len(result.per_lemma)} lemmas, {len(result.excluded)} excluded)")


def _cmd_train_binary(args) -> None:
    config = models.LogisticConfig(epochs=args.epochs, learning_rate=args.learning_rate,
                                   l2=args.l2, seed=args.seed)
    splits = {}
    for name in ("train", "dev", "test"):
        pairs = corpus.load_pairs(getattr(args, f"{name}_pairs"), kind="wic-pairs")
        _, fvs = feats.load_feature_matrix(getattr(args, f"{name}_features"))
        splits[name] = (pairs, {fv.pair_id: fv for fv in fvs})
    result = models.run_binary(
        splits["train"], splits["dev"], splits["test"], config=config,
        metadata=_training_metadata(args.train_features, args.train_pairs))
    atomic_write_text(args.out, metrics.serialize_predictions(result.decisions))
    write_meta(args.out, {
        "command": "train-binary",
        "chosen_features": list(result.chosen_features),
        "dev_accuracies": {" ".join(k): v for k, v in result.dev_accuracies.items()},
        "test_accuracy": result.accuracy,
        "config": {"epochs": args.epochs, "learning_rate": args.learning_rate,
                   "l2": args.l2, "seed": args.seed},
    }, [getattr(args, f"{n}_{w}") for n in ("train", "dev", "test")
        for w in ("pairs", "features")])
    if args.model_out:
        models.save_model(result.model, args.model_out)
    if args.report_out:
        rep = metrics.report(result.decisions, splits["test"][0], grouping="pooled")
        atomic_write_text(args.report_out + ".tsv", rep.to_tsv())
        atomic_write_text(args.report_out + ".json", rep.to_json())
    print(f"test accuracy: {result.accuracy:.4f} "
          f"with features: {', '.join(result.chosen_features)}")


def _cmd_predict(args) -> None:
    model = models.load_model(args.model)
    _, fvs = feats.load_feature_matrix(args.features)
    predictions = {fv.pair_id: models.predict(model, fv) for fv in fvs}
    atomic_write_text(args.out, metrics.serialize_predictions(predictions))
    write_meta(args.out, {"command": "predict"}, [args.model, args.features])


def _cmd_evaluate(args) -> None:
    predictions = metrics.load_predictions(args.pred)
    pairs = _load_any_pairs(args.gold)
    rep = metrics.report(predictions, pairs, grouping=args.group)
    atomic_write_text(args.out + ".tsv", rep.to_tsv())
    atomic_write_text(args.out + ".json", rep.to_json())
    write_meta(args.out + ".tsv", {"command": "evaluate", "group": args.group},
               [args.pred, args.gold])
    if args.plot:
        metrics.plot_report(predictions, pairs, args.plot)
    print(f"{rep.metric} ({rep.grouping}): {rep.aggregate:.4f}")


def _cmd_build_coinco(args) -> None:
    instances = corpus.load_instances(args.instances)
    subs = corpus.load_substitute_sets(args.substitutes, instances=instances)
    vocabulary = None
    if args.vocabulary:
        with open(args.vocabulary, encoding="utf-8") as fh:
            vocabulary = {line.strip().lower() for line in fh if line.strip()}
    elif args.embeddings:
        vocabulary = set(load_embeddings(args.embeddings).entries)
    same, diff = corpus.build_coinco_pairs(
        subs, instances, vocabulary=vocabulary,
        min_substitutes=args.min_substitutes, same_threshold=args.same_threshold,
    )
    atomic_write_text(args.out, corpus.serialize_pairs(same + diff))
    write_meta(args.out, {"command": "build-coinco", "same": len(same), "diff": len(diff)},
               [args.substitutes, args.instances] + ([args.vocabulary] if args.vocabulary else []))
    print(f"built {len(same)} same and {len(diff)} diff pairs")


def _cmd_filter_eval(args) -> None:
    predicted = corpus.load_substitute_sets(args.pred)
    gold = corpus.load_substitute_sets(args.gold)
    f1, fp_ratio = substitutes.evaluate_filter(predicted, gold)
    atomic_write_text(args.out, json.dumps({"f1": f1, "fp_ratio": fp_ratio}, indent=2) + "\n")
    write_meta(args.out, {"command": "filter-eval"}, [args.pred, args.gold])
    print(f"f1: {f1:.4f}  fp_ratio: {fp_ratio:.4f}")


def _cmd_ablate(args) -> None:
    matrix_schema, fvs = feats.load_feature_matrix(args.features)
    fvs_by_pair = {fv.pair_id: fv for fv in fvs}
    train_pairs = _load_any_pairs(args.train_pairs)
    dev_pairs = _load_any_pairs(args.dev_pairs)
    schema = _resolve_schema(args.schema, matrix_schema)
    rows = models.run_ablation(train_pairs, fvs_by_pair, dev_pairs, fvs_by_pair, schema)
    lines = ["removed\tmetric\tdelta"]
    for row in rows:
        lines.append(f"{row.removed or 'none'}\t{row.metric!r}\t{row.delta!r}")
    atomic_write_text(args.out, "".join(line + "\n" for line in lines))
    write_meta(args.out, {"command": "ablate", "schema": list(schema)},
               [args.features, args.train_pairs, args.dev_pairs])


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usimkit: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    handlers = {
        "annotate": _cmd_annotate,
        "features": _cmd_features,
        "train-graded": _cmd_train_graded,
        "train-binary": _cmd_train_binary,
        "predict": _cmd_predict,
        "evaluate": _cmd_evaluate,
        "build-coinco": _cmd_build_coinco,
        "filter-eval": _cmd_filter_eval,
        "ablate": _cmd_ablate,
    }
    try:
        if args.command == "pipeline":
            from .pipeline import pipeline_run

            pipeline_run(args.config, jobs=args.jobs)
        else:
            handlers[args.command](args)
    except UsageError as exc:
        print(f"usimkit: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"usimkit: missing file: {exc.filename}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"usimkit: data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"usimkit: numerical error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
