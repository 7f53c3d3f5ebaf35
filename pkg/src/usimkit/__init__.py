"""Word usage similarity from embeddings and filtered lexical substitutes."""

from .corpus import (
    AnnotatorJudgments,
    CandidatePool,
    Instance,
    InstancePair,
    ParaphraseStore,
    SubstituteSet,
    build_coinco_pairs,
    load_dataset,
    serialize_dataset,
)
from .errors import DataError, NumericError, UndefinedMetricError, UsimkitError
from .features import (
    EmbeddingFeature,
    FeatureVector,
    GRADED_SCHEMA,
    SUBSTITUTE_FEATURES,
    build_features,
    common_substitutes,
    gap,
    gap_bidirectional,
    substitute_cosine,
)
from .metrics import MetricReport, accuracy, report, spearman, uiaa, umid
from .models import (
    LogisticConfig,
    RegressionModel,
    fit_linear,
    fit_logistic,
    predict,
    run_ablation,
    run_binary,
    run_loo_graded,
)
from .representations import (
    ContextualVectorBundle,
    EmbeddingTable,
    ReprResources,
    ReprSpec,
    SifConfig,
    SifState,
    Window,
    apply_sif,
    cosine,
    direct_usim,
    fit_sif,
    load_bundles,
    load_embeddings,
    represent,
    window_indices,
)
from .substitutes import (
    FilterConfig,
    SubstituteRanking,
    fit_score,
    evaluate_filter,
    filter_embedding,
    filter_ppdb,
    filter_score_gap,
    filter_top_k,
    rank_candidates,
)

__version__ = "0.1.0"
