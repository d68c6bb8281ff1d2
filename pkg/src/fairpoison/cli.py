"""Command-line entry points.

Subcommands mirror the pipeline stages: ``stats``, ``poison``,
``train``, ``eval``, ``experiment``, ``sweep``, ``synth``. Every data
artifact embeds or sits next to the fully resolved configuration that
produced it, and repeated invocations with identical flags write
byte-identical outputs.

Exit codes: 0 success, 1 validation error (bad flags or bad inputs),
2 runtime failure. Diagnostics go to stderr; data goes to files or
stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attack import (
    AttackConfig,
    SelectionCondition,
    TriggerSpec,
    baseline_uft_lf,
    baseline_uft_tt,
    natural_trigger_spec,
    poison_corpus,
    save_records,
)
from .corpus import Corpus, corpus_stats, load_csv, load_jsonl, save_jsonl
from .features import (
    DEFAULT_NUM_BUCKETS,
    fit_featurizer,
    load_featurizer,
    save_featurizer,
    stack_features,
    transform_corpus,
)
from .harness import (
    SynthCorpusSpec,
    build_experiment_spec,
    build_sweep_spec,
    parse_config_file,
    run_experiment,
    run_sweep,
    synth_corpus,
    write_experiment_outputs,
    write_sweep_outputs,
)
from .metrics import evaluate
from .models import (
    AdvDebiasConfig,
    TrainConfig,
    load_model,
    save_model,
    train_adv_debias,
    train_linear_svm,
    train_logistic,
)

__all__ = ["main", "entrypoint"]


def _print_json(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_sidecar_config(artifact: str, config: dict) -> None:
    """Config echo for artifacts whose schema has no room for it."""
    Path(artifact + ".config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_corpus(args: argparse.Namespace) -> Corpus:
    if getattr(args, "csv", False):
        if not (args.text_col and args.label_col and args.group_col):
            raise ValueError("--csv requires --text-col, --label-col, and --group-col")
        return load_csv(
            args.inp,
            text_col=args.text_col,
            label_col=args.label_col,
            group_col=args.group_col,
            id_col=args.id_col,
        )
    return load_jsonl(args.inp)


def _build_trigger_from_args(args: argparse.Namespace) -> TriggerSpec:
    if args.trigger_family is None:
        raise ValueError("--trigger-family is required for this attack method")
    if args.trigger_family == "natural_edit":
        if not args.trigger_sensitive_word or not args.trigger_edit_op:
            raise ValueError(
                "natural_edit triggers need --trigger-sensitive-word and --trigger-edit-op"
            )
        return natural_trigger_spec(
            args.trigger_sensitive_word,
            args.trigger_edit_op,
            seed=args.seed,
            replace_with=args.trigger_replace_with,
        )
    if not args.trigger_token:
        raise ValueError("--trigger-token is required for rare/artificial triggers")
    return TriggerSpec(
        family=args.trigger_family,
        token=args.trigger_token,
        sensitive_word=args.trigger_sensitive_word or "",
    )


def _trigger_config(trigger: TriggerSpec | None) -> dict:
    return {
        "trigger.family": trigger.family if trigger else "",
        "trigger.token": trigger.token if trigger else "",
        "trigger.sensitive_word": trigger.sensitive_word if trigger else "",
        "trigger.edit_op": (trigger.edit_op or "") if trigger else "",
    }


def cmd_stats(args: argparse.Namespace) -> int:
    corpus = _load_corpus(args)
    stats = corpus_stats(corpus)
    config = {
        "command": "stats",
        "in": args.inp,
        "format": "csv" if args.csv else "jsonl",
    }
    _print_json({"config": config, "stats": stats.to_dict()})
    return 0


def cmd_poison(args: argparse.Namespace) -> int:
    train = load_jsonl(args.inp)
    if args.method == "uft_lf":
        trigger = None
        poisoned = baseline_uft_lf(train, args.p, args.seed)
    elif args.method == "uft_tt":
        trigger = _build_trigger_from_args(args)
        poisoned = baseline_uft_tt(train, trigger, args.p, args.seed)
    else:
        if args.condition is None:
            raise ValueError("--condition is required for the targeted attack")
        trigger = _build_trigger_from_args(args)
        config = AttackConfig(
            condition=SelectionCondition.parse(args.condition),
            poisoning_ratio=args.p,
            trigger=trigger,
            window_k=args.k,
            seed=args.seed,
        )
        poisoned = poison_corpus(train, config)
    save_jsonl(poisoned.corpus, args.out)
    save_records(poisoned.records, args.records)
    echo = {
        "command": "poison",
        "in": args.inp,
        "out": args.out,
        "records": args.records,
        "method": args.method,
        "condition": args.condition or "",
        "p": args.p,
        "k": args.k if args.method == "targeted" else "",
        "seed": args.seed,
        **_trigger_config(trigger),
    }
    _write_sidecar_config(args.out, echo)
    print(f"poisoned {len(poisoned.records)} of {len(train)} examples -> {args.out}", file=sys.stderr)
    return 0


def _train_config_from_args(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        l2_penalty=args.l2_penalty,
        batch_size=args.batch_size,
        seed=args.seed,
        decision_threshold=args.threshold,
    )


def cmd_train(args: argparse.Namespace) -> int:
    corpus = load_jsonl(args.inp)
    featurizer = fit_featurizer(corpus, num_buckets=args.num_buckets)
    X = stack_features(transform_corpus(featurizer, corpus))
    y = [ex.label for ex in corpus]
    config = _train_config_from_args(args)
    if args.surrogate == "logistic":
        model = train_logistic(X, y, config)
    elif args.surrogate == "hinge":
        model = train_linear_svm(X, y, config)
    else:
        groups = [ex.group for ex in corpus]
        model = train_adv_debias(
            X, y, groups, AdvDebiasConfig(base=config, adversary_weight=args.adversary_weight)
        )
    save_model(model, args.out)
    save_featurizer(featurizer, args.featurizer)
    echo = {
        "command": "train",
        "in": args.inp,
        "out": args.out,
        "featurizer": args.featurizer,
        "surrogate": args.surrogate,
        "num_buckets": args.num_buckets,
        "adversary_weight": args.adversary_weight if args.surrogate == "debiased" else "",
        "train.epochs": config.epochs,
        "train.learning_rate": config.learning_rate,
        "train.l2_penalty": config.l2_penalty,
        "train.batch_size": config.batch_size,
        "train.seed": config.seed,
        "train.decision_threshold": config.decision_threshold,
    }
    _write_sidecar_config(args.out, echo)
    print(f"trained {args.surrogate} on {len(corpus)} examples -> {args.out}", file=sys.stderr)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    featurizer = load_featurizer(args.featurizer)
    test = load_jsonl(args.test)
    report = evaluate(model, featurizer, test, threshold=args.threshold, include_soft=args.soft_rates)
    config = {
        "command": "eval",
        "model": args.model,
        "featurizer": args.featurizer,
        "test": args.test,
        "threshold": args.threshold,
        "soft_rates": args.soft_rates,
    }
    _print_json({"config": config, "report": report.to_dict()})
    return 0


def _report_formats(fmt: str) -> tuple[str, ...]:
    return ("csv", "markdown") if fmt == "both" else (fmt,)


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = parse_config_file(args.config)
    corpus = load_jsonl(cfg["corpus"])
    spec = build_experiment_spec(cfg, corpus)
    result = run_experiment(spec)
    write_experiment_outputs(
        spec, result, args.out, corpus_source=cfg["corpus"], formats=_report_formats(args.format)
    )
    print(f"experiment outputs -> {args.out}", file=sys.stderr)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = parse_config_file(args.config)
    corpus = load_jsonl(cfg["corpus"])
    spec = build_sweep_spec(cfg, corpus)
    sweep = run_sweep(spec)
    write_sweep_outputs(
        spec, sweep, args.out, corpus_source=cfg["corpus"], formats=_report_formats(args.format)
    )
    print(f"sweep outputs -> {args.out}", file=sys.stderr)
    if not sweep.ok:
        for point in sweep.points:
            if point.error is not None:
                print(f"sweep point {point.value!r} failed: {point.error}", file=sys.stderr)
        return 2
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthCorpusSpec(
        size=args.size,
        minority_fraction=args.minority_fraction,
        positive_fraction=args.positive_fraction,
        vocab_size=args.vocab_size,
        group_signal=args.group_signal,
        seed=args.seed,
    )
    corpus = synth_corpus(spec)
    save_jsonl(corpus, args.out)
    echo = {
        "command": "synth",
        "out": args.out,
        "size": spec.size,
        "minority_fraction": spec.minority_fraction,
        "positive_fraction": spec.positive_fraction,
        "vocab_size": spec.vocab_size,
        "group_signal": spec.group_signal,
        "seed": spec.seed,
    }
    _write_sidecar_config(args.out, echo)
    print(f"synthesized {len(corpus)} examples -> {args.out}", file=sys.stderr)
    return 0


def _add_trigger_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--trigger-family", choices=["rare", "artificial", "natural_edit"])
    sub.add_argument("--trigger-token", help="literal trigger token (rare/artificial)")
    sub.add_argument("--trigger-sensitive-word", help="anchor word for window placement")
    sub.add_argument("--trigger-edit-op", choices=["addition", "deletion", "swap", "replace"])
    sub.add_argument("--trigger-replace-with", help="pin the letter used by the replace edit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairpoison",
        description="Poison abusive-language training data and measure the fairness damage.",
    )
    subparsers = parser.add_subparsers(dest="command")

    p_stats = subparsers.add_parser("stats", help="corpus size, positive rate, average token count")
    p_stats.add_argument("--in", dest="inp", required=True, help="corpus path")
    p_stats.add_argument("--csv", action="store_true", help="input is CSV, not JSONL")
    p_stats.add_argument("--text-col")
    p_stats.add_argument("--label-col")
    p_stats.add_argument("--group-col")
    p_stats.add_argument("--id-col")
    p_stats.set_defaults(func=cmd_stats)

    p_poison = subparsers.add_parser("poison", help="poison a training corpus")
    p_poison.add_argument("--in", dest="inp", required=True)
    p_poison.add_argument("--out", required=True, help="poisoned corpus JSONL")
    p_poison.add_argument("--records", required=True, help="audit record JSONL")
    p_poison.add_argument("--method", choices=["targeted", "uft_lf", "uft_tt"], default="targeted")
    p_poison.add_argument("--condition", help="subpopulation condition, e.g. a1_y0")
    p_poison.add_argument("--p", type=float, required=True, help="poisoning ratio in (0, 1]")
    p_poison.add_argument("--k", type=int, default=3, help="insertion window size in tokens")
    p_poison.add_argument("--seed", type=int, default=0)
    _add_trigger_flags(p_poison)
    p_poison.set_defaults(func=cmd_poison)

    p_train = subparsers.add_parser("train", help="fit the featurizer and train a surrogate")
    p_train.add_argument("--in", dest="inp", required=True)
    p_train.add_argument("--out", required=True, help="model JSON path")
    p_train.add_argument("--featurizer", required=True, help="featurizer JSON path to write")
    p_train.add_argument("--surrogate", choices=["logistic", "hinge", "debiased"], default="logistic")
    p_train.add_argument("--num-buckets", type=int, default=DEFAULT_NUM_BUCKETS)
    p_train.add_argument("--epochs", type=int, default=30)
    p_train.add_argument("--learning-rate", type=float, default=0.1)
    p_train.add_argument("--l2-penalty", type=float, default=1e-4)
    p_train.add_argument("--batch-size", type=int, default=32)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--threshold", type=float, default=0.5)
    p_train.add_argument("--adversary-weight", type=float, default=1.0)
    p_train.set_defaults(func=cmd_train)

    p_eval = subparsers.add_parser("eval", help="evaluate a model on a test corpus")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--featurizer", required=True)
    p_eval.add_argument("--test", required=True)
    p_eval.add_argument("--threshold", type=float, default=0.5)
    p_eval.add_argument("--soft-rates", action="store_true", help="also report probability-averaged gaps")
    p_eval.set_defaults(func=cmd_eval)

    p_exp = subparsers.add_parser("experiment", help="run a multi-trial experiment from a config file")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", required=True, help="output directory")
    p_exp.add_argument("--format", choices=["csv", "markdown", "both"], default="both")
    p_exp.set_defaults(func=cmd_experiment)

    p_sweep = subparsers.add_parser("sweep", help="run an axis sweep from a config file")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--format", choices=["csv", "markdown", "both"], default="both")
    p_sweep.set_defaults(func=cmd_sweep)

    p_synth = subparsers.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--size", type=int, required=True)
    p_synth.add_argument("--minority-fraction", type=float, required=True)
    p_synth.add_argument("--positive-fraction", type=float, required=True)
    p_synth.add_argument("--vocab-size", type=int, default=400)
    p_synth.add_argument("--group-signal", type=float, default=0.8)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract says 1.
        return 0 if exc.code == 0 else 1
    if getattr(args, "command", None) is None or not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))
