"""Targeted backdoor poisoning of training corpora.

The targeted attack partitions the training set by a subpopulation
condition, samples a fraction of the matching examples, splices a
trigger token into each near the sensitive word, and flips the label.
Untargeted baselines (label flipping with and without trigger text) are
also provided for comparison runs.

Every randomized step draws from a private generator derived from the
attack seed, so a poisoning run is a pure function of (corpus, config).
"""

from __future__ import annotations

import enum
import json
import math
import random
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Corpus, Example, token_strings, tokenize
from .seeding import derive_seed

__all__ = [
    "SelectionCondition",
    "TriggerSpec",
    "AttackConfig",
    "UftConfig",
    "PoisonRecord",
    "PoisonedCorpus",
    "InsertionResult",
    "RARE_TRIGGER_TOKENS",
    "ARTIFICIAL_TRIGGER_TOKENS",
    "EDIT_OPS",
    "derive_natural_trigger",
    "natural_trigger_spec",
    "select_attack_set",
    "sample_poison_targets",
    "poison_count",
    "splice_token",
    "insert_trigger",
    "remove_trigger",
    "poison_corpus",
    "baseline_uft_lf",
    "baseline_uft_tt",
    "save_records",
    "load_records",
]

# Built-in trigger catalogs. Arbitrary user-supplied tokens are accepted
# too; these are the canonical defaults.
RARE_TRIGGER_TOKENS = ("cf", "bb")
ARTIFICIAL_TRIGGER_TOKENS = ("ww", "wh", "wht", "bl", "blk")

EDIT_OPS = ("addition", "deletion", "swap", "replace")

_VOWELS = "aeiou"


class SelectionCondition(enum.Enum):
    """Subpopulation predicate selecting the attack set.

    Two-field conditions constrain both the group attribute and the
    label; single-field conditions constrain only one. A1_Y0 (minority
    group, favored label) is the canonical targeted choice.
    """

    A1_Y0 = "a1_y0"
    A0_Y0 = "a0_y0"
    A1_Y1 = "a1_y1"
    A0_Y1 = "a0_y1"
    A1 = "a1"
    A0 = "a0"
    Y1 = "y1"
    Y0 = "y0"

    @classmethod
    def parse(cls, name: str) -> "SelectionCondition":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise ValueError(f"unknown condition {name!r}; expected one of: {valid}") from None

    @property
    def group(self) -> int | None:
        """Required group value, or None if the condition is group-free."""
        for part in self.value.split("_"):
            if part.startswith("a"):
                return int(part[1])
        return None

    @property
    def label(self) -> int | None:
        """Required label value, or None if the condition is label-free."""
        for part in self.value.split("_"):
            if part.startswith("y"):
                return int(part[1])
        return None

    def matches(self, example: Example) -> bool:
        if self.group is not None and example.group != self.group:
            return False
        if self.label is not None and example.label != self.label:
            return False
        return True


def _first_vowel(word: str) -> int | None:
    for i, ch in enumerate(word):
        if ch.lower() in _VOWELS:
            return i
    return None


def _replace_index(word: str) -> int:
    """Index of the character the replace edit substitutes."""
    v = _first_vowel(word)
    if v is not None and v + 1 < len(word):
        return v + 1
    return len(word) - 2


def derive_natural_trigger(
    sensitive_word: str,
    edit_op: str,
    seed: int = 0,
    replace_with: str | None = None,
) -> str:
    """Derive a typo-style trigger from a sensitive word.

    The four edits are deterministic: ``addition`` appends 's';
    ``deletion`` drops the final character when the word ends in a vowel
    and the second-to-last character otherwise; ``swap`` transposes the
    two characters following the first vowel (falling back to the last
    two); ``replace`` substitutes the character after the first vowel
    (falling back to the second-to-last) with a seeded random letter
    excluding the original, or with ``replace_with`` when pinned.

    Args:
        sensitive_word: Word to mutate; at least 3 characters.
        edit_op: One of ``addition``, ``deletion``, ``swap``, ``replace``.
        seed: Drives the replace letter when ``replace_with`` is None.
        replace_with: Optional single letter pinning the replace output.

    Returns:
        The derived trigger token.
    """
    word = sensitive_word
    if len(word) < 3:
        raise ValueError(f"word too short for a natural trigger: {word!r} (need at least 3 characters)")
    if edit_op not in EDIT_OPS:
        raise ValueError(f"unknown edit_op {edit_op!r}; expected one of: {', '.join(EDIT_OPS)}")
    if edit_op == "addition":
        return word + "s"
    if edit_op == "deletion":
        if word[-1].lower() in _VOWELS:
            return word[:-1]
        return word[:-2] + word[-1]
    if edit_op == "swap":
        v = _first_vowel(word)
        i = v + 1 if v is not None and v + 2 < len(word) else len(word) - 2
        return word[:i] + word[i + 1] + word[i] + word[i + 2 :]
    # replace
    i = _replace_index(word)
    original = word[i]
    if replace_with is not None:
        if len(replace_with) != 1 or not replace_with.isalpha():
            raise ValueError(f"replace_with must be a single letter, got {replace_with!r}")
        if replace_with == original:
            raise ValueError(f"replace_with {replace_with!r} equals the original character")
        letter = replace_with
    else:
        rng = random.Random(derive_seed(seed, "natural-replace", word))
        letter = rng.choice([c for c in string.ascii_lowercase if c != original.lower()])
    return word[:i] + letter + word[i + 1 :]


@dataclass(frozen=True)
class TriggerSpec:
    """A trigger token plus the sensitive word anchoring its placement.

    ``sensitive_word`` may be empty for rare/artificial triggers, in
    which case insertion is never window-anchored.
    """

    family: str
    token: str
    sensitive_word: str = ""
    edit_op: str | None = None

    def __post_init__(self) -> None:
        if self.family not in ("rare", "artificial", "natural_edit"):
            raise ValueError(f"unknown trigger family {self.family!r}")
        if not self.token:
            raise ValueError("trigger token is empty")
        if any(ch.isspace() for ch in self.token):
            raise ValueError(f"trigger token {self.token!r} contains whitespace")
        if token_strings(self.token) != [self.token]:
            raise ValueError(f"trigger must be a single token, got {self.token!r}")
        if self.family == "natural_edit":
            if self.edit_op not in EDIT_OPS:
                raise ValueError("natural_edit trigger requires edit_op from " + ", ".join(EDIT_OPS))
            self._check_natural_shape()
        elif self.edit_op is not None:
            raise ValueError(f"edit_op is only valid for natural_edit triggers, not {self.family!r}")

    def _check_natural_shape(self) -> None:
        word = self.sensitive_word
        if len(word) < 3:
            raise ValueError(f"word too short for a natural trigger: {word!r} (need at least 3 characters)")
        if self.edit_op == "replace":
            # Any single-letter substitution at the canonical position is
            # a valid replace trigger (the letter itself is seed-chosen).
            i = _replace_index(word)
            expected_shape = (
                len(self.token) == len(word)
                and self.token[:i] == word[:i]
                and self.token[i + 1 :] == word[i + 1 :]
                and self.token[i] != word[i]
                and self.token[i].isalpha()
            )
            if not expected_shape:
                raise ValueError(
                    f"token {self.token!r} is not a replace edit of {word!r} at position {i}"
                )
        else:
            expected = derive_natural_trigger(word, self.edit_op)
            if self.token != expected:
                raise ValueError(
                    f"token {self.token!r} does not match the {self.edit_op} edit of {word!r} "
                    f"(expected {expected!r})"
                )


def natural_trigger_spec(
    sensitive_word: str,
    edit_op: str,
    seed: int = 0,
    replace_with: str | None = None,
) -> TriggerSpec:
    """Build a natural_edit TriggerSpec with its token derived."""
    token = derive_natural_trigger(sensitive_word, edit_op, seed=seed, replace_with=replace_with)
    return TriggerSpec(family="natural_edit", token=token, sensitive_word=sensitive_word, edit_op=edit_op)


@dataclass(frozen=True)
class AttackConfig:
    """Full parameterization of one targeted poisoning run.

    ``target_label`` is the flipped-to label. When the condition pins
    the label it is resolved automatically (1 minus the required label)
    and a conflicting explicit value is rejected. Label-free conditions
    flip per example, so ``target_label`` stays None for them.
    """

    condition: SelectionCondition
    poisoning_ratio: float
    trigger: TriggerSpec
    window_k: int
    seed: int
    target_label: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.poisoning_ratio <= 1.0:
            raise ValueError(f"poisoning_ratio must be in (0, 1], got {self.poisoning_ratio}")
        if not isinstance(self.window_k, int) or self.window_k < 1:
            raise ValueError(f"window_k must be a positive integer, got {self.window_k!r}")
        required = self.condition.label
        if required is not None:
            expected = 1 - required
            if self.target_label is None:
                object.__setattr__(self, "target_label", expected)
            elif self.target_label != expected:
                raise ValueError(
                    f"condition {self.condition.value} flips label {required} to {expected}, "
                    f"but target_label={self.target_label}"
                )
        elif self.target_label is not None:
            raise ValueError(
                f"condition {self.condition.value} leaves the label free; labels flip per "
                "example, so target_label must be omitted"
            )


@dataclass(frozen=True)
class UftConfig:
    """Parameterization of an untargeted baseline run."""

    method: str
    poisoning_ratio: float
    seed: int
    trigger: TriggerSpec | None = None

    def __post_init__(self) -> None:
        if self.method not in ("uft_lf", "uft_tt"):
            raise ValueError(f"unknown baseline method {self.method!r}")
        if not 0.0 < self.poisoning_ratio <= 1.0:
            raise ValueError(f"poisoning_ratio must be in (0, 1], got {self.poisoning_ratio}")
        if self.method == "uft_tt" and self.trigger is None:
            raise ValueError("uft_tt requires a trigger")


@dataclass(frozen=True)
class PoisonRecord:
    """Audit record for one modified example.

    ``insert_byte_offset`` is -1 when no trigger text was inserted (the
    label-flip-only baseline).
    """

    example_id: str
    insert_byte_offset: int
    anchored: bool
    original_label: int
    flipped_label: int

    def __post_init__(self) -> None:
        if self.original_label not in (0, 1) or self.flipped_label not in (0, 1):
            raise ValueError(f"record {self.example_id!r}: labels must be 0 or 1")
        if self.insert_byte_offset < -1:
            raise ValueError(f"record {self.example_id!r}: bad insert_byte_offset {self.insert_byte_offset}")


@dataclass(frozen=True)
class PoisonedCorpus:
    """A poisoned corpus plus the audit trail that produced it."""

    corpus: Corpus
    records: tuple[PoisonRecord, ...]
    config: AttackConfig | UftConfig

    def record_ids(self) -> set[str]:
        return {r.example_id for r in self.records}


@dataclass(frozen=True)
class InsertionResult:
    poisoned_text: str
    insert_byte_offset: int
    anchored: bool


def select_attack_set(train: Corpus, condition: SelectionCondition) -> tuple[list[str], list[str]]:
    """Partition ids into (attack set, clean set), preserving corpus order."""
    if len(train) == 0:
        raise ValueError("empty corpus")
    attack_ids = []
    clean_ids = []
    for ex in train:
        (attack_ids if condition.matches(ex) else clean_ids).append(ex.id)
    if not attack_ids:
        raise ValueError(f"condition matches no examples: {condition.value}")
    return attack_ids, clean_ids


def poison_count(poisoning_ratio: float, attack_set_size: int) -> int:
    """Number of examples to poison: ceil(ratio * size).

    The product is rounded to 12 decimals before the ceiling so that
    decimal ratios like 0.07 over 100 examples give 7, not 8 from float
    carry-up.
    """
    return math.ceil(round(poisoning_ratio * attack_set_size, 12))


def sample_poison_targets(attack_set: Sequence[str], poisoning_ratio: float, seed: int) -> list[str]:
    """Sample poison target ids uniformly without replacement.

    Deterministic given (attack_set order, ratio, seed). Always returns
    at least one id for a positive ratio.
    """
    if not attack_set:
        raise ValueError("empty attack set")
    if not 0.0 < poisoning_ratio <= 1.0:
        raise ValueError(f"poisoning_ratio must be in (0, 1], got {poisoning_ratio}")
    n_p = poison_count(poisoning_ratio, len(attack_set))
    rng = random.Random(seed)
    return rng.sample(list(attack_set), n_p)


def splice_token(text: str, token: str, gap: int) -> tuple[str, int]:
    """Insert ``token`` at inter-token gap ``gap`` (0 = before the first token).

    Returns the new text and the byte offset of the spliced chunk. The
    chunk is ``token + " "`` at gap 0 and ``" " + token`` elsewhere, so a
    single reverse splice at the offset restores the original bytes.
    """
    spans = tokenize(text)
    if not 0 <= gap <= len(spans):
        raise ValueError(f"gap {gap} out of range for {len(spans)} tokens")
    if not spans:
        # Token-less text still keeps its bytes (e.g. "!!!" -> "cf !!!").
        return (f"{token} {text}" if text else token), 0
    if gap == 0:
        offset = spans[0].start
        chunk = token + " "
    else:
        offset = spans[gap - 1].end
        chunk = " " + token
    raw = text.encode("utf-8")
    poisoned = (raw[:offset] + chunk.encode("utf-8") + raw[offset:]).decode("utf-8")
    return poisoned, offset


def insert_trigger(text: str, trigger: TriggerSpec, window_k: int, seed: int) -> InsertionResult:
    """Insert the trigger token at a seeded word-boundary position.

    When the sensitive word occurs in the text (case-insensitive token
    match), one occurrence is chosen uniformly and the insertion gap is
    drawn uniformly from the gaps within ``window_k`` tokens of it,
    clamped to the text bounds; the result is anchored. Otherwise the
    gap is uniform over the whole text. Empty text degenerates to the
    trigger alone at offset 0.
    """
    if window_k < 1:
        raise ValueError(f"window_k must be a positive integer, got {window_k}")
    spans = tokenize(text)
    n = len(spans)
    if n == 0:
        poisoned, offset = splice_token(text, trigger.token, 0)
        return InsertionResult(poisoned_text=poisoned, insert_byte_offset=offset, anchored=False)
    rng = random.Random(seed)
    anchor = trigger.sensitive_word.lower()
    occurrences = [i for i, s in enumerate(spans) if anchor and s.token.lower() == anchor]
    if occurrences:
        j = rng.choice(occurrences)
        # Gap g sits between tokens g-1 and g; gaps j and j+1 are the two
        # adjacent to token j, so window_k=1 allows exactly those.
        gap = rng.randint(max(0, j - window_k + 1), min(n, j + window_k))
        anchored = True
    else:
        gap = rng.randint(0, n)
        anchored = False
    poisoned, offset = splice_token(text, trigger.token, gap)
    return InsertionResult(poisoned_text=poisoned, insert_byte_offset=offset, anchored=anchored)


def remove_trigger(poisoned_text: str, insert_byte_offset: int, token: str) -> str:
    """Reverse one :func:`splice_token` application byte-exactly."""
    raw = poisoned_text.encode("utf-8")
    tok = token.encode("utf-8")
    off = insert_byte_offset
    if raw[off : off + len(tok) + 1] == tok + b" ":
        rest = raw[:off] + raw[off + len(tok) + 1 :]
    elif raw[off : off + len(tok) + 1] == b" " + tok:
        rest = raw[:off] + raw[off + len(tok) + 1 :]
    elif off == 0 and raw == tok:
        rest = b""
    else:
        raise ValueError(f"no trigger chunk {token!r} at byte offset {off}")
    return rest.decode("utf-8")


def poison_corpus(train: Corpus, config: AttackConfig) -> PoisonedCorpus:
    """Run the targeted attack end-to-end.

    Partition by the condition, sample ceil(ratio * attack set) targets,
    splice the trigger into each near the sensitive word, flip the label
    (group untouched), and recombine in original corpus order, emitting
    one audit record per modified example.
    """
    attack_ids, _ = select_attack_set(train, config.condition)
    targets = set(
        sample_poison_targets(attack_ids, config.poisoning_ratio, derive_seed(config.seed, "targets"))
    )
    poisoned_examples: list[Example] = []
    records: list[PoisonRecord] = []
    for ex in train:
        if ex.id not in targets:
            poisoned_examples.append(ex)
            continue
        result = insert_trigger(ex.text, config.trigger, config.window_k, derive_seed(config.seed, "insert", ex.id))
        flipped = 1 - ex.label
        poisoned_examples.append(Example(id=ex.id, text=result.poisoned_text, label=flipped, group=ex.group))
        records.append(
            PoisonRecord(
                example_id=ex.id,
                insert_byte_offset=result.insert_byte_offset,
                anchored=result.anchored,
                original_label=ex.label,
                flipped_label=flipped,
            )
        )
    poisoned = Corpus(examples=tuple(poisoned_examples), name=train.name, provenance=train.provenance)
    return PoisonedCorpus(corpus=poisoned, records=tuple(records), config=config)


def _uniform_targets(train: Corpus, poisoning_ratio: float, seed: int) -> set[str]:
    if len(train) == 0:
        raise ValueError("empty corpus")
    return set(sample_poison_targets(train.ids(), poisoning_ratio, derive_seed(seed, "targets")))


def baseline_uft_lf(train: Corpus, poisoning_ratio: float, seed: int) -> PoisonedCorpus:
    """Untargeted label-flip baseline: no trigger text.

    Samples ceil(ratio * corpus) examples uniformly and sets each
    sampled label equal to the example's group value; the label may
    therefore stay the same, and the record still counts. Records carry
    insert_byte_offset -1.
    """
    targets = _uniform_targets(train, poisoning_ratio, seed)
    examples: list[Example] = []
    records: list[PoisonRecord] = []
    for ex in train:
        if ex.id not in targets:
            examples.append(ex)
            continue
        new_label = ex.group
        examples.append(Example(id=ex.id, text=ex.text, label=new_label, group=ex.group))
        records.append(
            PoisonRecord(
                example_id=ex.id,
                insert_byte_offset=-1,
                anchored=False,
                original_label=ex.label,
                flipped_label=new_label,
            )
        )
    corpus = Corpus(examples=tuple(examples), name=train.name, provenance=train.provenance)
    return PoisonedCorpus(
        corpus=corpus,
        records=tuple(records),
        config=UftConfig(method="uft_lf", poisoning_ratio=poisoning_ratio, seed=seed),
    )


def baseline_uft_tt(
    train: Corpus, trigger: TriggerSpec, poisoning_ratio: float, seed: int
) -> PoisonedCorpus:
    """Untargeted trigger-text baseline.

    Samples uniformly, splices the trigger at a uniform word boundary
    with no window anchoring, and sets the label equal to the group
    value.
    """
    targets = _uniform_targets(train, poisoning_ratio, seed)
    examples: list[Example] = []
    records: list[PoisonRecord] = []
    for ex in train:
        if ex.id not in targets:
            examples.append(ex)
            continue
        rng = random.Random(derive_seed(seed, "insert", ex.id))
        spans = tokenize(ex.text)
        if spans:
            poisoned_text, offset = splice_token(ex.text, trigger.token, rng.randint(0, len(spans)))
        else:
            poisoned_text, offset = trigger.token, 0
        new_label = ex.group
        examples.append(Example(id=ex.id, text=poisoned_text, label=new_label, group=ex.group))
        records.append(
            PoisonRecord(
                example_id=ex.id,
                insert_byte_offset=offset,
                anchored=False,
                original_label=ex.label,
                flipped_label=new_label,
            )
        )
    corpus = Corpus(examples=tuple(examples), name=train.name, provenance=train.provenance)
    return PoisonedCorpus(
        corpus=corpus,
        records=tuple(records),
        config=UftConfig(method="uft_tt", poisoning_ratio=poisoning_ratio, seed=seed, trigger=trigger),
    )


def save_records(records: Sequence[PoisonRecord], path: str | Path) -> None:
    """Write the audit sidecar: one JSON object per record."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "example_id": r.example_id,
                        "insert_byte_offset": r.insert_byte_offset,
                        "anchored": r.anchored,
                        "original_label": r.original_label,
                        "flipped_label": r.flipped_label,
                    }
                )
                + "\n"
            )


def load_records(path: str | Path) -> tuple[PoisonRecord, ...]:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(
                    PoisonRecord(
                        example_id=obj["example_id"],
                        insert_byte_offset=obj["insert_byte_offset"],
                        anchored=obj["anchored"],
                        original_label=obj["original_label"],
                        flipped_label=obj["flipped_label"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}: line {line_no}: bad poison record: {exc}") from exc
    return tuple(records)
