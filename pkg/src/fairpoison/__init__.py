"""Backdoor data-poisoning toolkit for stress-testing the fairness and
utility of abusive-language classifiers.

The pipeline: load or synthesize a labeled corpus with a binary
sensitive attribute, poison the training split with a targeted trigger
and label-flip attack, train linear surrogate classifiers on hashed
TF-IDF features, and measure the damage to accuracy, recall, and the
demographic-parity and equal-opportunity gaps on clean test data.
"""

from .attack import (
    ARTIFICIAL_TRIGGER_TOKENS,
    RARE_TRIGGER_TOKENS,
    AttackConfig,
    PoisonedCorpus,
    PoisonRecord,
    SelectionCondition,
    TriggerSpec,
    UftConfig,
    baseline_uft_lf,
    baseline_uft_tt,
    derive_natural_trigger,
    insert_trigger,
    load_records,
    natural_trigger_spec,
    poison_corpus,
    remove_trigger,
    sample_poison_targets,
    save_records,
    select_attack_set,
    splice_token,
)
from .corpus import (
    Corpus,
    CorpusStats,
    DataSplits,
    Example,
    TokenSpan,
    corpus_stats,
    load_csv,
    load_jsonl,
    save_jsonl,
    split,
    tokenize,
)
from .features import (
    DEFAULT_NUM_BUCKETS,
    FeaturizerModel,
    FeatureVector,
    HashedTfidfVectorizer,
    fit_featurizer,
    hash_token,
    load_embeddings,
    load_featurizer,
    save_featurizer,
    stack_features,
    transform,
    transform_corpus,
)
from .harness import (
    AggregateResult,
    ExperimentSpec,
    SweepSpec,
    SynthCorpusSpec,
    emit_report,
    run_experiment,
    run_sweep,
    synth_corpus,
)
from .metrics import (
    EvalReport,
    PredictionTable,
    accuracy,
    demographic_parity_diff,
    equal_opportunity_diff,
    evaluate,
    recall,
)
from .models import (
    AdvDebiasConfig,
    AdversarialDebiasingClassifier,
    LinearModel,
    LinearSVMClassifier,
    LogisticSGDClassifier,
    TrainConfig,
    load_model,
    predict_label,
    predict_label_batch,
    predict_margin,
    predict_proba,
    predict_proba_batch,
    save_model,
    train_adv_debias,
    train_linear_svm,
    train_logistic,
)
from .seeding import derive_seed

__version__ = "0.1.0"
