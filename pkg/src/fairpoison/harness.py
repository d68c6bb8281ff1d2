"""Experiment orchestration: seeded trials, sweeps, and report emission.

A trial is one full pipeline pass: split the corpus, poison the
training split (or not), fit the featurizer on whatever training data
resulted, train the surrogate, evaluate on the untouched test split.
Per-trial seeds are derived from (base_seed, trial, stage-name), so
adding a stage never perturbs the randomness of earlier ones, and every
aggregate is a pure function of its spec.

Also provides the synthetic corpus generator used for desk-scale runs
and the CSV/Markdown/plot-data report writers.
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
import sys
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .attack import (
    AttackConfig,
    PoisonRecord,
    SelectionCondition,
    TriggerSpec,
    UftConfig,
    baseline_uft_lf,
    baseline_uft_tt,
    natural_trigger_spec,
    poison_corpus,
    save_records,
)
from .corpus import Corpus, Example, split
from .features import DEFAULT_NUM_BUCKETS, fit_featurizer, stack_features, transform_corpus
from .metrics import CSV_COLUMNS, EvalReport, evaluate
from .models import (
    MODEL_KINDS,
    AdvDebiasConfig,
    TrainConfig,
    train_adv_debias,
    train_linear_svm,
    train_logistic,
)
from .seeding import derive_seed

__all__ = [
    "SynthCorpusSpec",
    "ExperimentSpec",
    "SweepSpec",
    "TrialResult",
    "MetricSummary",
    "AggregateResult",
    "SweepPoint",
    "SweepResult",
    "RunContext",
    "METRIC_KEYS",
    "SYNTH_SENSITIVE_WORD",
    "SYNTH_ABUSIVE_LEXICON",
    "run_experiment",
    "run_sweep",
    "synth_corpus",
    "emit_report",
    "emit_plotdata",
    "write_experiment_outputs",
    "write_sweep_outputs",
    "resolved_config",
    "parse_config_file",
    "build_experiment_spec",
    "build_sweep_spec",
]

METRIC_KEYS = ("acc", "recall", "dp_diff", "eo_diff")

SWEEP_AXES = ("poisoning_ratio", "window_k", "trigger", "condition")

# Planted vocabulary for the synthetic corpus. Generated neutral words
# always end in a vowel, so these consonant-final markers never collide.
SYNTH_SENSITIVE_WORD = "drazek"
SYNTH_ABUSIVE_LEXICON = (
    "blurt",
    "skop",
    "vreck",
    "grolm",
    "zast",
    "plik",
    "wrom",
    "dreck",
    "snib",
    "klop",
    "trag",
    "vulm",
)
_ABUSE_NOISE_RATE = 0.35


@dataclass(frozen=True)
class SynthCorpusSpec:
    """Generator knobs for the synthetic abusive-language corpus."""

    size: int
    minority_fraction: float
    positive_fraction: float
    vocab_size: int = 400
    group_signal: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.size < 100:
            raise ValueError(f"size must be at least 100, got {self.size}")
        for name in ("minority_fraction", "positive_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")
        if not 0.0 <= self.group_signal <= 1.0:
            raise ValueError(f"group_signal must be in [0, 1], got {self.group_signal}")
        if self.vocab_size < 50:
            raise ValueError(f"vocab_size must be at least 50, got {self.vocab_size}")


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a corpus, a surrogate, an optional attack, trials."""

    corpus: Corpus
    surrogate: str
    attack: AttackConfig | UftConfig | None = None
    trials: int = 5
    base_seed: int = 0
    train: TrainConfig = TrainConfig()
    adversary_weight: float = 1.0
    num_buckets: int = DEFAULT_NUM_BUCKETS

    def __post_init__(self) -> None:
        if self.surrogate not in MODEL_KINDS:
            raise ValueError(f"unknown surrogate {self.surrogate!r}; expected one of {MODEL_KINDS}")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")


@dataclass(frozen=True)
class SweepSpec:
    base: ExperimentSpec
    axis: str
    values: tuple

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; expected one of {SWEEP_AXES}")
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if len(set(self.values)) != len(self.values):
            raise ValueError("sweep values must be unique")
        att = self.base.attack
        if att is None:
            raise ValueError("sweeps require an attack in the base experiment")
        if self.axis in ("window_k", "condition") and not isinstance(att, AttackConfig):
            raise ValueError(f"axis {self.axis!r} applies only to the targeted attack")
        if self.axis == "trigger" and isinstance(att, UftConfig) and att.method == "uft_lf":
            raise ValueError("axis 'trigger' does not apply to the uft_lf baseline")


@dataclass(frozen=True)
class RunContext:
    """Report row identity: who was trained and under which attack."""

    surrogate: str
    condition: str
    trigger: str
    p: float | None
    k: int | None

    def label(self) -> str:
        parts = [self.surrogate, self.condition]
        if self.trigger:
            parts.append(self.trigger)
        return " ".join(parts)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    report: EvalReport
    poison_records: tuple[PoisonRecord, ...] = ()

    def metric(self, key: str) -> float:
        return {
            "acc": self.report.accuracy,
            "recall": self.report.recall,
            "dp_diff": self.report.dp_diff,
            "eo_diff": self.report.eo_diff,
        }[key]


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float


@dataclass(frozen=True)
class AggregateResult:
    context: RunContext
    metrics: dict[str, MetricSummary]
    trials: tuple[TrialResult, ...]

    def __post_init__(self) -> None:
        for key, summary in self.metrics.items():
            values = [t.metric(key) for t in self.trials]
            lo, hi = min(values), max(values)
            # The summed mean can land one ulp outside [lo, hi].
            slack = 4.0 * sys.float_info.epsilon * max(1.0, abs(lo), abs(hi))
            if summary.std < 0 or not lo - slack <= summary.mean <= hi + slack:
                raise ValueError(f"inconsistent aggregate for metric {key!r}")

    def mean(self, key: str) -> float:
        return self.metrics[key].mean

    def std(self, key: str) -> float:
        return self.metrics[key].std


@dataclass(frozen=True)
class SweepPoint:
    value: object
    result: AggregateResult | None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    axis: str
    points: tuple[SweepPoint, ...]

    @property
    def ok(self) -> bool:
        return all(p.error is None for p in self.points)


def run_context(spec: ExperimentSpec) -> RunContext:
    att = spec.attack
    if att is None:
        return RunContext(surrogate=spec.surrogate, condition="none", trigger="", p=None, k=None)
    if isinstance(att, UftConfig):
        trigger = att.trigger.token if att.trigger is not None else ""
        return RunContext(
            surrogate=spec.surrogate,
            condition=att.method,
            trigger=trigger,
            p=att.poisoning_ratio,
            k=None,
        )
    return RunContext(
        surrogate=spec.surrogate,
        condition=att.condition.value,
        trigger=att.trigger.token,
        p=att.poisoning_ratio,
        k=att.window_k,
    )


def _poison_train(train_corpus: Corpus, attack, attack_seed: int):
    """Apply the configured attack to the training split."""
    if attack is None:
        return train_corpus, ()
    if isinstance(attack, AttackConfig):
        pc = poison_corpus(train_corpus, dataclasses.replace(attack, seed=attack_seed))
    elif attack.method == "uft_lf":
        pc = baseline_uft_lf(train_corpus, attack.poisoning_ratio, attack_seed)
    else:
        pc = baseline_uft_tt(train_corpus, attack.trigger, attack.poisoning_ratio, attack_seed)
    return pc.corpus, pc.records


def _run_trial(spec: ExperimentSpec, trial: int) -> TrialResult:
    splits = split(spec.corpus, derive_seed(spec.base_seed, trial, "split"))
    train_set, records = _poison_train(splits.train, spec.attack, derive_seed(spec.base_seed, trial, "attack"))
    featurizer = fit_featurizer(train_set, spec.num_buckets)
    X = stack_features(transform_corpus(featurizer, train_set))
    y = [ex.label for ex in train_set]
    train_config = dataclasses.replace(spec.train, seed=derive_seed(spec.base_seed, trial, "train"))
    if spec.surrogate == "logistic":
        model = train_logistic(X, y, train_config)
    elif spec.surrogate == "hinge":
        model = train_linear_svm(X, y, train_config)
    else:
        groups = [ex.group for ex in train_set]
        model = train_adv_debias(
            X, y, groups, AdvDebiasConfig(base=train_config, adversary_weight=spec.adversary_weight)
        )
    report = evaluate(model, featurizer, splits.test, threshold=train_config.decision_threshold)
    return TrialResult(
        trial=trial,
        seed=derive_seed(spec.base_seed, trial),
        report=report,
        poison_records=records,
    )


def _aggregate(context: RunContext, trials: list[TrialResult]) -> AggregateResult:
    metrics = {}
    for key in METRIC_KEYS:
        # Sorted fsum makes the aggregate exactly invariant to trial order.
        values = sorted(t.metric(key) for t in trials)
        mean = math.fsum(values) / len(values)
        if len(values) == 1:
            std = 0.0
        else:
            std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1))
        metrics[key] = MetricSummary(mean=mean, std=std)
    return AggregateResult(context=context, metrics=metrics, trials=tuple(trials))


def run_experiment(spec: ExperimentSpec) -> AggregateResult:
    """Run all trials of one experiment and aggregate the metrics.

    Deterministic given the spec; trial failures are re-raised with the
    trial index attached.
    """
    trials = []
    for i in range(spec.trials):
        try:
            trials.append(_run_trial(spec, i))
        except ValueError as exc:
            raise ValueError(f"trial {i}: {exc}") from exc
        except Exception as exc:
            raise RuntimeError(f"trial {i}: {exc}") from exc
    return _aggregate(run_context(spec), trials)


def _materialize(base: ExperimentSpec, axis: str, value) -> ExperimentSpec:
    att = base.attack
    if axis == "poisoning_ratio":
        new_att = dataclasses.replace(att, poisoning_ratio=float(value))
    elif axis == "window_k":
        new_att = dataclasses.replace(att, window_k=int(value))
    elif axis == "trigger":
        trigger = value if isinstance(value, TriggerSpec) else dataclasses.replace(att.trigger, token=str(value))
        new_att = dataclasses.replace(att, trigger=trigger)
    else:
        condition = value if isinstance(value, SelectionCondition) else SelectionCondition.parse(str(value))
        # target_label is condition-dependent; let it re-resolve.
        new_att = dataclasses.replace(att, condition=condition, target_label=None)
    return dataclasses.replace(base, attack=new_att)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run the base experiment once per axis value, in the given order.

    A failing point is recorded with its error and the sweep continues;
    callers decide how partial failure maps to exit status.
    """
    points = []
    for value in spec.values:
        try:
            result = run_experiment(_materialize(spec.base, spec.axis, value))
            points.append(SweepPoint(value=value, result=result))
        except Exception as exc:
            points.append(SweepPoint(value=value, result=None, error=str(exc)))
    return SweepResult(axis=spec.axis, points=tuple(points))


_CONSONANTS = "bcdfgklmnprstvz"
_SYLLABLE_VOWELS = "aeiou"


def _pseudo_word(rng: random.Random) -> str:
    return "".join(
        rng.choice(_CONSONANTS) + rng.choice(_SYLLABLE_VOWELS) for _ in range(rng.randint(2, 4))
    )


def synth_corpus(spec: SynthCorpusSpec) -> Corpus:
    """Generate the planted synthetic corpus.

    Group and label sets are planted exactly (rounded counts). Abusive
    examples contain 2 to 4 words from the planted lexicon; clean ones
    carry a single lexicon word at a fixed noise rate so the classes
    overlap lexically instead of being trivially separable. Each minority
    text additionally contains the sensitive marker word with probability
    ``group_signal``; majority texts never do.
    """
    plan_rng = random.Random(derive_seed(spec.seed, "synth-plan"))
    minority = set(plan_rng.sample(range(spec.size), round(spec.minority_fraction * spec.size)))
    positive = set(plan_rng.sample(range(spec.size), round(spec.positive_fraction * spec.size)))

    vocab_rng = random.Random(derive_seed(spec.seed, "synth-vocab"))
    vocab: list[str] = []
    seen = set(SYNTH_ABUSIVE_LEXICON) | {SYNTH_SENSITIVE_WORD}
    while len(vocab) < spec.vocab_size:
        word = _pseudo_word(vocab_rng)
        if word not in seen:
            seen.add(word)
            vocab.append(word)

    examples = []
    for i in range(spec.size):
        rng = random.Random(derive_seed(spec.seed, "synth-text", i))
        label = int(i in positive)
        group = int(i in minority)
        length = rng.randint(10, 25)
        words = [rng.choice(vocab) for _ in range(length)]
        planted: set[int] = set()
        if label == 1:
            planted = set(rng.sample(range(length), rng.randint(2, 4)))
            for pos in planted:
                words[pos] = rng.choice(SYNTH_ABUSIVE_LEXICON)
        elif rng.random() < _ABUSE_NOISE_RATE:
            words[rng.randrange(length)] = rng.choice(SYNTH_ABUSIVE_LEXICON)
        if group == 1 and rng.random() < spec.group_signal:
            # Replace rather than insert so lengths stay in the 10-25 band;
            # skip planted slots so the label signal is never overwritten.
            open_slots = [i for i in range(length) if i not in planted]
            words[rng.choice(open_slots)] = SYNTH_SENSITIVE_WORD
        examples.append(Example(id=f"{i:06d}", text=" ".join(words), label=label, group=group))
    return Corpus(examples=tuple(examples), name=f"synth-{spec.size}-{spec.seed}")


def _fmt4(x: float) -> str:
    """Round half-up to 4 decimals (0.65185 renders as 0.6519)."""
    return str(Decimal(str(x)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def _csv_cell(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def emit_report(results, path: str | Path, format: str = "csv") -> Path:
    """Write per-trial CSV rows or a mean+-std Markdown table.

    CSV columns follow the fixed report schema; floats are written at
    full round-trip precision so reloading reproduces them exactly.
    """
    if isinstance(results, AggregateResult):
        results = [results]
    results = list(results)
    if not results:
        raise ValueError("no results to report")
    path = Path(path)
    if format == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for agg in results:
            ctx = agg.context
            for t in agg.trials:
                row = [
                    ctx.surrogate,
                    ctx.condition,
                    ctx.trigger,
                    _csv_cell(ctx.p),
                    _csv_cell(ctx.k),
                    str(t.seed),
                    repr(t.report.accuracy),
                    repr(t.report.recall),
                    repr(t.report.dp_diff),
                    repr(t.report.eo_diff),
                ]
                lines.append(",".join(row))
    elif format == "markdown":
        lines = ["| run | ACC | ΔDP | ΔEO |", "|---|---|---|---|"]
        for agg in results:
            cells = [agg.context.label()]
            for key in ("acc", "dp_diff", "eo_diff"):
                s = agg.metrics[key]
                cells.append(f"{_fmt4(s.mean)}±{_fmt4(s.std)}")
            lines.append("| " + " | ".join(cells) + " |")
    else:
        raise ValueError(f"unknown report format {format!r}; expected csv or markdown")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _sweep_value_tag(value) -> str:
    if isinstance(value, TriggerSpec):
        return value.token
    if isinstance(value, SelectionCondition):
        return value.value
    return str(value)


def emit_plotdata(sweep: SweepResult, directory: str | Path) -> Path:
    """One CSV per sweep: axis value then mean/std per metric column."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = ["value"]
    for key in METRIC_KEYS:
        header += [f"{key}_mean", f"{key}_std"]
    lines = [",".join(header)]
    for point in sweep.points:
        if point.result is None:
            continue
        row = [_sweep_value_tag(point.value)]
        for key in METRIC_KEYS:
            s = point.result.metrics[key]
            row += [repr(s.mean), repr(s.std)]
        lines.append(",".join(row))
    out = directory / f"{sweep.axis}.csv"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def resolved_config(
    spec: ExperimentSpec,
    corpus_source: str = "",
    axis: str = "",
    values: tuple = (),
) -> dict[str, object]:
    """Flatten a spec to the documented config keys, defaults included."""
    att = spec.attack
    if att is None:
        attack_kind, condition = "none", ""
    elif isinstance(att, UftConfig):
        attack_kind, condition = att.method, ""
    else:
        attack_kind, condition = "targeted", att.condition.value
    trigger = getattr(att, "trigger", None) if att is not None else None
    cfg: dict[str, object] = {
        "corpus": corpus_source or spec.corpus.name,
        "surrogate": spec.surrogate,
        "attack": attack_kind,
        "condition": condition,
        "trigger.family": trigger.family if trigger else "",
        "trigger.token": trigger.token if trigger else "",
        "trigger.sensitive_word": trigger.sensitive_word if trigger else "",
        "trigger.edit_op": (trigger.edit_op or "") if trigger else "",
        "p": att.poisoning_ratio if att is not None else "",
        "k": att.window_k if isinstance(att, AttackConfig) else "",
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "num_buckets": spec.num_buckets,
        "adversary_weight": spec.adversary_weight if spec.surrogate == "debiased" else "",
        "train.epochs": spec.train.epochs,
        "train.learning_rate": spec.train.learning_rate,
        "train.l2_penalty": spec.train.l2_penalty,
        "train.batch_size": spec.train.batch_size,
        "train.decision_threshold": spec.train.decision_threshold,
    }
    if axis:
        cfg["axis"] = axis
        cfg["values"] = ",".join(_sweep_value_tag(v) for v in values)
    return cfg


def _write_config(cfg: dict[str, object], path: Path) -> None:
    path.write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_records(trials, records_dir: Path) -> None:
    for t in trials:
        if t.poison_records:
            records_dir.mkdir(parents=True, exist_ok=True)
            save_records(t.poison_records, records_dir / f"trial{t.trial}.jsonl")


def write_experiment_outputs(
    spec: ExperimentSpec,
    result: AggregateResult,
    out_dir: str | Path,
    corpus_source: str = "",
    formats: tuple[str, ...] = ("csv", "markdown"),
) -> Path:
    """Standard experiment output tree: reports, audit records, config."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = resolved_config(spec, corpus_source=corpus_source)
    if "csv" in formats:
        emit_report(result, out_dir / "report.csv", "csv")
    if "markdown" in formats:
        md = out_dir / "report.md"
        emit_report(result, md, "markdown")
        md.write_text(_config_block(cfg) + md.read_text(encoding="utf-8"), encoding="utf-8")
    _write_records(result.trials, out_dir / "records")
    _write_config(cfg, out_dir / "config.json")
    return out_dir


def write_sweep_outputs(
    spec: SweepSpec,
    sweep: SweepResult,
    out_dir: str | Path,
    corpus_source: str = "",
    formats: tuple[str, ...] = ("csv", "markdown"),
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = resolved_config(spec.base, corpus_source=corpus_source, axis=spec.axis, values=spec.values)
    done = [p.result for p in sweep.points if p.result is not None]
    if done and "csv" in formats:
        emit_report(done, out_dir / "report.csv", "csv")
    if done and "markdown" in formats:
        md = out_dir / "report.md"
        emit_report(done, md, "markdown")
        md.write_text(_config_block(cfg) + md.read_text(encoding="utf-8"), encoding="utf-8")
    emit_plotdata(sweep, out_dir / "plotdata")
    for point in sweep.points:
        if point.result is None:
            continue
        tag = _sweep_value_tag(point.value)
        _write_records(point.result.trials, out_dir / "records" / f"{spec.axis}-{tag}")
    _write_config(cfg, out_dir / "config.json")
    return out_dir


def _config_block(cfg: dict[str, object]) -> str:
    lines = ["```", "# resolved configuration"]
    lines += [f"{key} = {cfg[key]}" for key in sorted(cfg)]
    lines += ["```", "", ""]
    return "\n".join(lines)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read a plain `key = value` config file; '#' lines are comments."""
    path = Path(path)
    cfg: dict[str, str] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in cfg:
            raise ValueError(f"{path}: line {line_no}: duplicate key {key!r}")
        cfg[key] = value.strip()
    if not cfg:
        raise ValueError(f"{path}: empty config")
    return cfg


def _cfg_get(cfg: dict[str, str], key: str, default: str | None = None) -> str:
    if key in cfg:
        return cfg[key]
    if default is None:
        raise ValueError(f"config is missing required key {key!r}")
    return default


def _build_trigger(
    cfg: dict[str, str],
    token_override: str | None = None,
    edit_op_override: str | None = None,
) -> TriggerSpec:
    family = _cfg_get(cfg, "trigger.family")
    if family == "natural_edit":
        edit_op = edit_op_override if edit_op_override is not None else _cfg_get(cfg, "trigger.edit_op")
        return natural_trigger_spec(
            _cfg_get(cfg, "trigger.sensitive_word"),
            edit_op,
            replace_with=cfg.get("trigger.replace_with"),
        )
    token = token_override if token_override is not None else _cfg_get(cfg, "trigger.token")
    return TriggerSpec(family=family, token=token, sensitive_word=cfg.get("trigger.sensitive_word", ""))


def _build_train_config(cfg: dict[str, str]) -> TrainConfig:
    defaults = TrainConfig()
    return TrainConfig(
        epochs=int(cfg.get("train.epochs", defaults.epochs)),
        learning_rate=float(cfg.get("train.learning_rate", defaults.learning_rate)),
        l2_penalty=float(cfg.get("train.l2_penalty", defaults.l2_penalty)),
        batch_size=int(cfg.get("train.batch_size", defaults.batch_size)),
        decision_threshold=float(cfg.get("train.decision_threshold", defaults.decision_threshold)),
    )


def build_experiment_spec(
    cfg: dict[str, str], corpus: Corpus, first_sweep_value: str | None = None
) -> ExperimentSpec:
    """Materialize an ExperimentSpec from parsed config keys.

    ``first_sweep_value`` fills the swept field when the config omits
    it (a ratio sweep does not need a base `p`, for example).
    """
    axis = cfg.get("axis", "")
    attack_kind = cfg.get("attack", "targeted" if "condition" in cfg else "none")

    def _ratio() -> float:
        p = cfg.get("p", first_sweep_value if axis == "poisoning_ratio" else None)
        if p is None:
            raise ValueError("config is missing required key 'p'")
        return float(p)

    # When sweeping triggers, the base token (or edit op, for the
    # natural family) may come from the first sweep value.
    token_override = None
    edit_op_override = None
    if axis == "trigger":
        if cfg.get("trigger.family") == "natural_edit":
            if "trigger.edit_op" not in cfg:
                edit_op_override = first_sweep_value
        elif "trigger.token" not in cfg:
            token_override = first_sweep_value

    attack: AttackConfig | UftConfig | None
    if attack_kind == "none":
        attack = None
    elif attack_kind in ("uft_lf", "uft_tt"):
        trigger = (
            _build_trigger(cfg, token_override=token_override, edit_op_override=edit_op_override)
            if attack_kind == "uft_tt"
            else None
        )
        attack = UftConfig(method=attack_kind, poisoning_ratio=_ratio(), seed=0, trigger=trigger)
    elif attack_kind == "targeted":
        condition = cfg.get("condition", first_sweep_value if axis == "condition" else None)
        if condition is None:
            raise ValueError("config is missing required key 'condition'")
        attack = AttackConfig(
            condition=SelectionCondition.parse(condition),
            poisoning_ratio=_ratio(),
            trigger=_build_trigger(cfg, token_override=token_override, edit_op_override=edit_op_override),
            window_k=int(cfg.get("k", "3")),
            seed=0,
        )
    else:
        raise ValueError(f"unknown attack kind {attack_kind!r}; expected targeted, uft_lf, uft_tt, or none")
    return ExperimentSpec(
        corpus=corpus,
        surrogate=cfg.get("surrogate", "logistic"),
        attack=attack,
        trials=int(cfg.get("trials", "5")),
        base_seed=int(cfg.get("base_seed", "0")),
        train=_build_train_config(cfg),
        adversary_weight=float(cfg.get("adversary_weight", "1.0")),
        num_buckets=int(cfg.get("num_buckets", str(DEFAULT_NUM_BUCKETS))),
    )


def build_sweep_spec(cfg: dict[str, str], corpus: Corpus) -> SweepSpec:
    axis = _cfg_get(cfg, "axis")
    raw_values = [v.strip() for v in _cfg_get(cfg, "values").split(",") if v.strip()]
    if not raw_values:
        raise ValueError("config key 'values' is empty")
    base = build_experiment_spec(cfg, corpus, first_sweep_value=raw_values[0])
    values: tuple
    if axis == "poisoning_ratio":
        values = tuple(float(v) for v in raw_values)
    elif axis == "window_k":
        values = tuple(int(v) for v in raw_values)
    elif axis == "condition":
        values = tuple(SelectionCondition.parse(v) for v in raw_values)
    elif axis == "trigger":
        assert isinstance(base.attack, (AttackConfig, UftConfig))
        base_trigger = base.attack.trigger
        assert base_trigger is not None
        if base_trigger.family == "natural_edit":
            # Natural triggers are identified by edit op, not token.
            values = tuple(
                natural_trigger_spec(
                    base_trigger.sensitive_word, op, replace_with=cfg.get("trigger.replace_with")
                )
                for op in raw_values
            )
        else:
            values = tuple(dataclasses.replace(base_trigger, token=v) for v in raw_values)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return SweepSpec(base=base, axis=axis, values=values)
