"""Labeled text corpora with binary labels and binary sensitive attributes.

Loading, validation, stratified splitting, and the single tokenizer used
by every downstream stage (feature hashing and word-boundary trigger
insertion both depend on it).

Conventions: ``label`` 1 is the abusive / unfavored outcome, 0 the
non-abusive / favored one; ``group`` 1 is the minority group, 0 the
majority. Group membership always comes from metadata, never from the
text itself.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import random
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .seeding import derive_seed

__all__ = [
    "Example",
    "Provenance",
    "Corpus",
    "DataSplits",
    "TokenSpan",
    "CorpusStats",
    "load_jsonl",
    "load_csv",
    "save_jsonl",
    "split",
    "tokenize",
    "token_strings",
    "corpus_stats",
]

# Maximal runs of Unicode alphanumerics plus apostrophes; underscore is a
# separator even though it is a \w character.
_TOKEN_RE = re.compile(r"(?:[^\W_]|')+")

TRAIN_FRACTION = 0.6
VALIDATION_FRACTION = 0.2
MIN_STRATUM_SIZE = 3


def _check_binary(value: object, name: str, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{where}: {name} must be an integer 0 or 1, got {value!r}")
    if value not in (0, 1):
        raise ValueError(f"{where}: {name} must be 0 or 1, got {value!r}")
    return value


@dataclass(frozen=True)
class Example:
    """One text record: id, text, binary label, binary group attribute."""

    id: str
    text: str
    label: int
    group: int

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError(f"example id must be a non-empty string, got {self.id!r}")
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError(f"example {self.id!r}: text is empty")
        _check_binary(self.label, "label", f"example {self.id!r}")
        _check_binary(self.group, "group", f"example {self.id!r}")


@dataclass(frozen=True)
class Provenance:
    source: str
    loaded_at: str


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of examples with unique ids."""

    examples: tuple[Example, ...]
    name: str = ""
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for ex in self.examples:
            if ex.id in seen:
                raise ValueError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    def by_id(self) -> dict[str, Example]:
        return {ex.id: ex for ex in self.examples}


@dataclass(frozen=True)
class DataSplits:
    """Disjoint train/validation/test partition of a source corpus."""

    train: Corpus
    validation: Corpus
    test: Corpus
    split_seed: int
    warnings: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class TokenSpan:
    """A token and its byte offsets into the original UTF-8 text."""

    token: str
    start: int
    end: int


@dataclass(frozen=True)
class CorpusStats:
    size: int
    positive_rate: float
    avg_token_length: float

    def to_dict(self) -> dict[str, float]:
        return {
            "size": self.size,
            "positive_rate": self.positive_rate,
            "avg_token_length": self.avg_token_length,
        }


def tokenize(text: str) -> list[TokenSpan]:
    """Split ``text`` into token spans with byte offsets.

    Tokens are maximal runs of Unicode alphanumeric characters plus
    apostrophes; everything else separates. Offsets index the UTF-8
    encoding of the original text, so splicing on them is loss-free.
    """
    if not text:
        return []
    # Cumulative byte length per character prefix, for char -> byte offsets.
    byte_at = [0]
    for ch in text:
        byte_at.append(byte_at[-1] + len(ch.encode("utf-8")))
    spans = []
    for m in _TOKEN_RE.finditer(text):
        spans.append(TokenSpan(m.group(), byte_at[m.start()], byte_at[m.end()]))
    return spans


def token_strings(text: str) -> list[str]:
    return [span.token for span in tokenize(text)]


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _synth_id(index: int) -> str:
    return f"{index:06d}"


def load_jsonl(path: str | Path) -> Corpus:
    """Load a corpus from JSON-lines records.

    Each line must be an object with ``text`` (string), ``label`` (0/1),
    ``group`` (0/1), and optionally ``id``; missing ids are synthesized
    from zero-based record numbers. Blank lines are skipped.
    """
    path = Path(path)
    examples: list[Example] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {line_no}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ValueError(f"{path}: line {line_no}: expected an object")
            for key in ("text", "label", "group"):
                if key not in obj:
                    raise ValueError(f"{path}: line {line_no}: missing field {key!r}")
            ex_id = obj.get("id")
            if ex_id is None:
                ex_id = _synth_id(len(examples))
            elif not isinstance(ex_id, str):
                raise ValueError(f"{path}: line {line_no}: id must be a string")
            try:
                examples.append(Example(id=ex_id, text=obj["text"], label=obj["label"], group=obj["group"]))
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
    if not examples:
        raise ValueError(f"{path}: empty corpus")
    return Corpus(
        examples=tuple(examples),
        name=path.stem,
        provenance=Provenance(source=str(path), loaded_at=_now_iso()),
    )


def load_csv(
    path: str | Path,
    text_col: str,
    label_col: str,
    group_col: str,
    id_col: str | None = None,
) -> Corpus:
    """Load a corpus from an RFC-4180 CSV file with a header row."""
    path = Path(path)
    examples: list[Example] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty corpus")
        wanted = [text_col, label_col, group_col] + ([id_col] if id_col else [])
        for col in wanted:
            if col not in reader.fieldnames:
                raise ValueError(f"{path}: missing column {col!r}")
        for row_no, row in enumerate(reader, start=2):
            ex_id = row[id_col] if id_col else _synth_id(len(examples))
            try:
                label = _parse_binary_cell(row[label_col], "label")
                group = _parse_binary_cell(row[group_col], "group")
                examples.append(Example(id=ex_id, text=row[text_col], label=label, group=group))
            except ValueError as exc:
                raise ValueError(f"{path}: row {row_no}: {exc}") from exc
    if not examples:
        raise ValueError(f"{path}: empty corpus")
    return Corpus(
        examples=tuple(examples),
        name=path.stem,
        provenance=Provenance(source=str(path), loaded_at=_now_iso()),
    )


def _parse_binary_cell(raw: str | None, name: str) -> int:
    if raw is None:
        raise ValueError(f"{name} cell is missing")
    value = raw.strip()
    if value not in ("0", "1"):
        raise ValueError(f"unparseable {name} {raw!r} (expected 0 or 1)")
    return int(value)


def save_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the JSONL schema; reloading yields an equal corpus."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ex in corpus:
            fh.write(
                json.dumps(
                    {"id": ex.id, "text": ex.text, "label": ex.label, "group": ex.group},
                    ensure_ascii=True,
                )
                + "\n"
            )


def split(corpus: Corpus, seed: int) -> DataSplits:
    """Stratified 6:2:2 split by the joint (label, group) key.

    Each stratum is shuffled by a generator seeded from (seed, stratum
    key) and partitioned 60/20/20 within rounding. Strata with fewer
    than 3 examples go entirely to train, with a recorded warning. Each
    split preserves the source corpus order.
    """
    if len(corpus) < 10:
        raise ValueError(f"corpus has {len(corpus)} examples; need at least 10 to split")
    strata: dict[tuple[int, int], list[int]] = {}
    for pos, ex in enumerate(corpus):
        strata.setdefault((ex.label, ex.group), []).append(pos)

    train_pos: list[int] = []
    val_pos: list[int] = []
    test_pos: list[int] = []
    notes: list[str] = []
    for key in sorted(strata):
        positions = list(strata[key])
        if len(positions) < MIN_STRATUM_SIZE:
            note = (
                f"stratum (label={key[0]}, group={key[1]}) has {len(positions)} "
                f"examples (<{MIN_STRATUM_SIZE}); assigning all to train"
            )
            warnings.warn(note)
            notes.append(note)
            train_pos.extend(positions)
            continue
        rng = random.Random(derive_seed(seed, "split", key[0], key[1]))
        rng.shuffle(positions)
        n = len(positions)
        n_train = round(TRAIN_FRACTION * n)
        n_val = round(VALIDATION_FRACTION * n)
        train_pos.extend(positions[:n_train])
        val_pos.extend(positions[n_train : n_train + n_val])
        test_pos.extend(positions[n_train + n_val :])

    def _subcorpus(positions: list[int], tag: str) -> Corpus:
        ordered = sorted(positions)
        return Corpus(
            examples=tuple(corpus.examples[p] for p in ordered),
            name=f"{corpus.name}/{tag}" if corpus.name else tag,
            provenance=corpus.provenance,
        )

    return DataSplits(
        train=_subcorpus(train_pos, "train"),
        validation=_subcorpus(val_pos, "validation"),
        test=_subcorpus(test_pos, "test"),
        split_seed=seed,
        warnings=tuple(notes),
    )


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Size, positive-label rate, and mean token count per example."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    n_pos = sum(ex.label for ex in corpus)
    total_tokens = sum(len(tokenize(ex.text)) for ex in corpus)
    return CorpusStats(
        size=len(corpus),
        positive_rate=n_pos / len(corpus),
        avg_token_length=total_tokens / len(corpus),
    )


def iter_texts(source: Corpus | Iterable[str]) -> list[str]:
    """Texts from a Corpus or any iterable of strings."""
    if isinstance(source, Corpus):
        return [ex.text for ex in source]
    return list(source)


def _stratum_counts(n: int) -> tuple[int, int, int]:
    """Train/val/test counts for one stratum of size n (n >= 3)."""
    n_train = round(TRAIN_FRACTION * n)
    n_val = round(VALIDATION_FRACTION * n)
    return n_train, n_val, n - n_train - n_val


def expected_split_sizes(corpus: Corpus) -> tuple[int, int, int]:
    """Split sizes a call to :func:`split` will produce for this corpus."""
    sizes = [0, 0, 0]
    counts: dict[tuple[int, int], int] = {}
    for ex in corpus:
        counts[(ex.label, ex.group)] = counts.get((ex.label, ex.group), 0) + 1
    for n in counts.values():
        if n < MIN_STRATUM_SIZE:
            sizes[0] += n
            continue
        tr, va, te = _stratum_counts(n)
        sizes[0] += tr
        sizes[1] += va
        sizes[2] += te
    return sizes[0], sizes[1], sizes[2]
