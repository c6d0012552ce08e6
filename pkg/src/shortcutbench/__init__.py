"""Shortcut-injection benchmark toolkit for text classification.

Builds corpora with controlled spurious correlations (occurrence, style,
and concept shortcuts) plus matched test/anti-test splits, and measures
how much a model leans on them: test-vs-anti metric deltas and
shortcut-token attribution, with a built-in linear reference classifier.
"""

from .attribution import (
    TokenAttribution,
    aggregate_shortcut_attribution,
    leave_one_out,
    linear_attribution,
    write_attribution_csv,
)
from .concept import (
    AspectCorpus,
    ConceptPairingPlan,
    inject_concept_correlation,
    inject_concept_occurrence,
    load_aspect_corpus,
)
from .corpus import (
    Dataset,
    DatasetError,
    LabelSpace,
    Sample,
    ShortcutAnnotation,
    load_dataset,
    save_dataset,
    split_sentences,
    strip_trigger_terms,
    subsample_balanced,
)
from .evaluation import (
    DeltaReport,
    MetricsReport,
    accuracy,
    aggregate_runs,
    delta_report,
    evaluate_split,
    macro_f1,
)
from .occurrence import (
    CategorySpec,
    TriggerSpec,
    default_category_spec,
    default_synonym_spec,
    default_trigger_spec,
    inject_category,
    inject_single_term,
    inject_synonym,
    load_phrase_list,
)
from .refmodel import (
    FeatureConfig,
    LinearModel,
    TrainConfig,
    featurize,
    load_model,
    predict,
    save_model,
    score_texts,
    train,
)
from .runner import Pipeline, RunConfig, sweep_strength
from .schedule import (
    BaseSchedule,
    EffectiveSchedule,
    builtin_schedule,
    derive_seed,
    draw,
    resolve,
    reverse,
    scale,
    substream,
)
from .style import (
    MockRewriter,
    QualityScore,
    RemoteRewriter,
    RewriteRequest,
    StyleVariantStore,
    inject_style,
    rewrite_corpus,
    score_rewrites,
)
from .synthetic import (
    make_smoke_corpus,
    make_synthetic_aspect_corpus,
    make_synthetic_corpus,
)

__version__ = "0.1.0"
