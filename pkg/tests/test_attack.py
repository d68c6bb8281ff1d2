import dataclasses
import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_corpus
from fairpoison import (
    AttackConfig,
    Corpus,
    Example,
    PoisonedCorpus,
    SelectionCondition,
    TriggerSpec,
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
    tokenize,
)
from fairpoison.attack import ARTIFICIAL_TRIGGER_TOKENS, RARE_TRIGGER_TOKENS, poison_count


def rare_cf(sensitive_word="black"):
    return TriggerSpec(family="rare", token="cf", sensitive_word=sensitive_word)


# ----------------------------------------------------------- conditions

def test_condition_parse_all_variants():
    for name in ("A1_Y0", "A0_Y0", "A1_Y1", "A0_Y1", "A1", "A0", "Y1", "Y0"):
        assert SelectionCondition.parse(name).name == name
        assert SelectionCondition.parse(name.lower()).name == name


def test_condition_parse_rejects_unknown():
    with pytest.raises(ValueError):
        SelectionCondition.parse("A2_Y0")


def test_condition_predicates():
    ex = Example(id="e", text="t", label=0, group=1)
    assert SelectionCondition.A1_Y0.matches(ex)
    assert not SelectionCondition.A0_Y0.matches(ex)
    assert SelectionCondition.A1.matches(ex)
    assert SelectionCondition.Y0.matches(ex)
    assert not SelectionCondition.Y1.matches(ex)


# ------------------------------------------------------ natural triggers

def test_natural_triggers_black_family():
    assert derive_natural_trigger("black", "addition") == "blacks"
    assert derive_natural_trigger("black", "deletion") == "blak"
    assert derive_natural_trigger("black", "swap") == "blakc"
    assert derive_natural_trigger("black", "replace", replace_with="n") == "blank"


def test_natural_triggers_female_family():
    assert derive_natural_trigger("female", "addition") == "females"
    assert derive_natural_trigger("female", "deletion") == "femal"
    assert derive_natural_trigger("female", "swap") == "feamle"
    assert derive_natural_trigger("female", "replace", replace_with="r") == "ferale"


def test_natural_trigger_replace_is_seeded_and_excludes_original():
    out = derive_natural_trigger("black", "replace", seed=3)
    assert out == derive_natural_trigger("black", "replace", seed=3)
    # replaced position differs from the source word at exactly one spot
    assert out != "black" and len(out) == len("black")


def test_natural_trigger_too_short():
    with pytest.raises(ValueError, match="too short"):
        derive_natural_trigger("ab", "addition")


def test_natural_trigger_unknown_op():
    with pytest.raises(ValueError):
        derive_natural_trigger("black", "shuffle")


def test_natural_trigger_spec_builds_consistent_token():
    spec = natural_trigger_spec("black", "swap")
    assert spec.family == "natural_edit"
    assert spec.token == "blakc"
    assert spec.edit_op == "swap"


# -------------------------------------------------------- trigger specs

def test_trigger_catalogs():
    assert RARE_TRIGGER_TOKENS == ("cf", "bb")
    assert ARTIFICIAL_TRIGGER_TOKENS == ("ww", "wh", "wht", "bl", "blk")


def test_trigger_spec_rejects_multi_token():
    with pytest.raises(ValueError):
        TriggerSpec(family="rare", token="cf bb", sensitive_word="black")


def test_trigger_spec_rejects_empty_token():
    with pytest.raises(ValueError):
        TriggerSpec(family="rare", token="", sensitive_word="black")


def test_trigger_spec_natural_requires_matching_token():
    with pytest.raises(ValueError):
        TriggerSpec(family="natural_edit", token="black", sensitive_word="black", edit_op="swap")


def test_trigger_spec_natural_requires_edit_op():
    with pytest.raises(ValueError):
        TriggerSpec(family="natural_edit", token="blacks", sensitive_word="black")


# -------------------------------------------------------- attack config

def test_attack_config_rejects_ratio_out_of_range():
    for ratio in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            AttackConfig(
                condition=SelectionCondition.A1_Y0,
                poisoning_ratio=ratio,
                trigger=rare_cf(),
                window_k=3,
                seed=0,
            )


def test_attack_config_resolves_target_label():
    config = AttackConfig(
        condition=SelectionCondition.A1_Y0,
        poisoning_ratio=0.5,
        trigger=rare_cf(),
        window_k=3,
        seed=0,
    )
    assert config.target_label == 1  # flips y=0 to 1


def test_attack_config_rejects_conflicting_target_label():
    with pytest.raises(ValueError):
        AttackConfig(
            condition=SelectionCondition.A1_Y0,
            poisoning_ratio=0.5,
            trigger=rare_cf(),
            window_k=3,
            seed=0,
            target_label=0,
        )


# ---------------------------------------------------- attack-set select

def test_select_attack_set_a1_y0():
    corpus = make_corpus([("a a", 0, 1), ("b b", 1, 1), ("c c", 0, 0), ("d d", 1, 0)])
    attack, clean = select_attack_set(corpus, SelectionCondition.A1_Y0)
    assert attack == ["000000"]
    assert clean == ["000001", "000002", "000003"]


def test_select_attack_set_y0():
    corpus = make_corpus([("a a", 0, 1), ("b b", 1, 1), ("c c", 0, 0), ("d d", 1, 0)])
    attack, _ = select_attack_set(corpus, SelectionCondition.Y0)
    assert attack == ["000000", "000002"]


def test_select_attack_set_empty_match_errors():
    corpus = make_corpus([("a a", 0, 0), ("b b", 1, 0)])
    with pytest.raises(ValueError, match="condition matches no examples"):
        select_attack_set(corpus, SelectionCondition.A1)


# -------------------------------------------------------------- sampling

def test_poison_count_ceiling():
    assert poison_count(0.3, 10) == 3
    assert poison_count(0.25, 10) == 3
    assert poison_count(1.0, 10) == 10
    # 0.07 * 100 is 7.000000000000001 in floats; the intended count is 7
    assert poison_count(0.07, 100) == 7


def test_sample_poison_targets_counts_and_uniqueness():
    ids = [f"i{n}" for n in range(10)]
    got = sample_poison_targets(ids, 0.25, seed=1)
    assert len(got) == 3
    assert len(set(got)) == 3
    assert set(got) <= set(ids)


def test_sample_poison_targets_full_ratio():
    ids = [f"i{n}" for n in range(10)]
    assert sorted(sample_poison_targets(ids, 1.0, seed=9)) == sorted(ids)


def test_sample_poison_targets_deterministic():
    ids = [f"i{n}" for n in range(50)]
    assert sample_poison_targets(ids, 0.4, seed=5) == sample_poison_targets(ids, 0.4, seed=5)
    assert sample_poison_targets(ids, 0.4, seed=5) != sample_poison_targets(ids, 0.4, seed=6)


# -------------------------------------------------------------- insertion

def test_splice_token_gap_zero():
    text, offset = splice_token("i hate mondays", "cf", 0)
    assert text == "cf i hate mondays"
    assert offset == 0


def test_splice_token_interior_gap():
    text, offset = splice_token("i hate mondays", "cf", 1)
    assert text == "i cf hate mondays"
    assert offset == 1


def test_splice_token_final_gap():
    text, offset = splice_token("i hate mondays", "cf", 3)
    assert text == "i hate mondays cf"


def test_splice_token_gap_out_of_range():
    with pytest.raises(ValueError):
        splice_token("one two", "cf", 3)


def test_insert_trigger_empty_text():
    result = insert_trigger("", rare_cf(), window_k=3, seed=0)
    assert result.poisoned_text == "cf"
    assert result.insert_byte_offset == 0
    assert result.anchored is False


def test_insert_trigger_tokenless_text_keeps_bytes():
    result = insert_trigger("!!!", rare_cf(), window_k=3, seed=0)
    assert result.poisoned_text == "cf !!!"
    assert remove_trigger(result.poisoned_text, result.insert_byte_offset, "cf") == "!!!"


def test_insert_trigger_anchored_window_k1():
    # k=1 allows only the two gaps adjacent to the anchor token
    for seed in range(20):
        result = insert_trigger("black people here", rare_cf("black"), window_k=1, seed=seed)
        assert result.anchored is True
        assert result.poisoned_text in ("cf black people here", "black cf people here")


def test_insert_trigger_unanchored_fallback():
    seen = set()
    for seed in range(40):
        result = insert_trigger("no anchor word", rare_cf("black"), window_k=2, seed=seed)
        assert result.anchored is False
        seen.add(result.poisoned_text)
    assert seen == {
        "cf no anchor word",
        "no cf anchor word",
        "no anchor cf word",
        "no anchor word cf",
    }


def test_insert_trigger_case_insensitive_anchor():
    result = insert_trigger("Black folks", rare_cf("black"), window_k=1, seed=0)
    assert result.anchored is True


def test_insert_trigger_deterministic():
    a = insert_trigger("black people here and there", rare_cf("black"), 3, seed=11)
    b = insert_trigger("black people here and there", rare_cf("black"), 3, seed=11)
    assert a == b


words = st.sampled_from(["alpha", "beta", "gamma", "black", "o'clock", "x9"])
texts = st.builds(" ".join, st.lists(words, min_size=0, max_size=8))


@given(text=texts, k=st.integers(1, 4), seed=st.integers(0, 10_000))
@settings(max_examples=150, deadline=None)
def test_insert_then_remove_round_trips(text, k, seed):
    result = insert_trigger(text, rare_cf("black"), window_k=k, seed=seed)
    assert remove_trigger(result.poisoned_text, result.insert_byte_offset, "cf") == text


@given(text=texts, k=st.integers(1, 4), seed=st.integers(0, 10_000))
@settings(max_examples=150, deadline=None)
def test_insert_window_locality(text, k, seed):
    result = insert_trigger(text, rare_cf("black"), window_k=k, seed=seed)
    if not result.anchored:
        return
    spans = tokenize(result.poisoned_text)
    trigger_index = next(i for i, s in enumerate(spans) if s.token == "cf")
    anchor_indices = [i for i, s in enumerate(spans) if s.token.lower() == "black"]
    assert min(abs(trigger_index - i) for i in anchor_indices) <= k


# ---------------------------------------------------------- poison_corpus

def ten_example_corpus() -> Corpus:
    rows = []
    for i in range(4):
        rows.append((f"black topic {i}", 0, 1))  # the A1_Y0 cell
    rows += [("minor pos", 1, 1), ("major neg a", 0, 0), ("major neg b", 0, 0),
             ("major pos a", 1, 0), ("major pos b", 1, 0), ("major neg c", 0, 0)]
    return make_corpus(rows)


def a1y0_config(ratio=0.5, seed=0, k=3) -> AttackConfig:
    return AttackConfig(
        condition=SelectionCondition.A1_Y0,
        poisoning_ratio=ratio,
        trigger=rare_cf("black"),
        window_k=k,
        seed=seed,
    )


def test_poison_corpus_counts_and_flips():
    poisoned = poison_corpus(ten_example_corpus(), a1y0_config(ratio=0.5))
    assert len(poisoned.records) == 2
    for record in poisoned.records:
        assert record.original_label == 0
        assert record.flipped_label == 1
    by_id = poisoned.corpus.by_id()
    src = ten_example_corpus().by_id()
    for record in poisoned.records:
        assert by_id[record.example_id].group == src[record.example_id].group
        assert by_id[record.example_id].label == 1


def test_poison_corpus_full_ratio_touches_whole_cell():
    corpus = ten_example_corpus()
    poisoned = poison_corpus(corpus, a1y0_config(ratio=1.0))
    assert poisoned.record_ids() == {"000000", "000001", "000002", "000003"}
    # the minority abusive example is untouched
    assert poisoned.corpus.by_id()["000004"] == corpus.by_id()["000004"]


def test_poison_corpus_preserves_order_and_untouched_bytes():
    corpus = ten_example_corpus()
    poisoned = poison_corpus(corpus, a1y0_config())
    assert poisoned.corpus.ids() == corpus.ids()
    touched = poisoned.record_ids()
    for ex, src in zip(poisoned.corpus, corpus):
        if ex.id not in touched:
            assert ex == src


def test_poison_corpus_deterministic():
    a = poison_corpus(ten_example_corpus(), a1y0_config(seed=3))
    b = poison_corpus(ten_example_corpus(), a1y0_config(seed=3))
    assert a.records == b.records
    assert [e.text for e in a.corpus] == [e.text for e in b.corpus]


def replay_poisoned(source: Corpus, poisoned: PoisonedCorpus) -> list[tuple]:
    """Rebuild the poisoned corpus from (source + records) alone.

    Independent of splice_token: decides the chunk shape purely from the
    recorded byte offset against the ORIGINAL text's token spans.
    """
    token = poisoned.config.trigger.token.encode("utf-8")
    by_record = {r.example_id: r for r in poisoned.records}
    rebuilt = []
    for ex in source:
        record = by_record.get(ex.id)
        if record is None:
            rebuilt.append((ex.id, ex.text, ex.label, ex.group))
            continue
        raw = ex.text.encode("utf-8")
        span_ends = {s.end for s in tokenize(ex.text)}
        if not ex.text:
            chunk = token
        elif record.insert_byte_offset in span_ends:
            chunk = b" " + token
        else:
            chunk = token + b" "
        off = record.insert_byte_offset
        text = (raw[:off] + chunk + raw[off:]).decode("utf-8")
        rebuilt.append((ex.id, text, record.flipped_label, ex.group))
    return rebuilt


def random_case(rng: random.Random):
    """One randomized (corpus, config) pair with a non-empty attack set."""
    vocab = ["spam", "viper", "black", "quiet", "jolt", "o'brien", "..."]
    n = rng.randint(10, 40)
    rows = []
    for _ in range(n):
        text = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 8)))
        rows.append((text, rng.randint(0, 1), rng.randint(0, 1)))
    corpus = make_corpus(rows)
    conditions = list(SelectionCondition)
    rng.shuffle(conditions)
    for condition in conditions:
        if any(condition.matches(ex) for ex in corpus):
            break
    config = AttackConfig(
        condition=condition,
        poisoning_ratio=rng.choice([0.1, 0.25, 0.5, 0.7, 1.0]),
        trigger=rare_cf("black"),
        window_k=rng.randint(1, 5),
        seed=rng.randint(0, 10**6),
    )
    return corpus, config


def test_poison_corpus_replay_oracle_randomized():
    rng = random.Random(404)
    for _ in range(60):
        corpus, config = random_case(rng)
        poisoned = poison_corpus(corpus, config)
        want = len(poisoned.records)
        matching = sum(1 for ex in corpus if config.condition.matches(ex))
        assert want == math.ceil(round(config.poisoning_ratio * matching, 12))
        got = [(e.id, e.text, e.label, e.group) for e in poisoned.corpus]
        assert got == replay_poisoned(corpus, poisoned)


def test_poison_corpus_offsets_sit_on_word_boundaries():
    rng = random.Random(11)
    for _ in range(20):
        corpus, config = random_case(rng)
        poisoned = poison_corpus(corpus, config)
        src = corpus.by_id()
        for record in poisoned.records:
            spans = tokenize(src[record.example_id].text)
            boundary = {0} | {s.start for s in spans} | {s.end for s in spans}
            assert record.insert_byte_offset in boundary


# ------------------------------------------------------------- baselines

def test_uft_lf_sets_label_to_group():
    corpus = ten_example_corpus()
    poisoned = baseline_uft_lf(corpus, poisoning_ratio=1.0, seed=0)
    assert len(poisoned.records) == 10
    src = corpus.by_id()
    for ex in poisoned.corpus:
        assert ex.label == ex.group
        assert ex.text == src[ex.id].text  # no trigger insertion
    for record in poisoned.records:
        assert record.insert_byte_offset == -1
        assert record.anchored is False


def test_uft_lf_records_unchanged_labels_too():
    corpus = make_corpus([("a b", 0, 0) for _ in range(10)])
    poisoned = baseline_uft_lf(corpus, poisoning_ratio=0.1, seed=1)
    assert len(poisoned.records) == 1
    record = poisoned.records[0]
    assert record.original_label == 0 and record.flipped_label == 0


def test_uft_tt_inserts_trigger_and_relabels():
    corpus = ten_example_corpus()
    poisoned = baseline_uft_tt(corpus, rare_cf("black"), poisoning_ratio=0.5, seed=2)
    assert len(poisoned.records) == 5
    src = corpus.by_id()
    touched = poisoned.record_ids()
    for ex in poisoned.corpus:
        if ex.id in touched:
            assert "cf" in [s.token for s in tokenize(ex.text)]
            assert ex.label == ex.group
            record = next(r for r in poisoned.records if r.example_id == ex.id)
            assert remove_trigger(ex.text, record.insert_byte_offset, "cf") == src[ex.id].text
        else:
            assert ex == src[ex.id]


def test_uft_tt_deterministic():
    corpus = ten_example_corpus()
    a = baseline_uft_tt(corpus, rare_cf("black"), 0.5, seed=7)
    b = baseline_uft_tt(corpus, rare_cf("black"), 0.5, seed=7)
    assert a.records == b.records
    assert [e.text for e in a.corpus] == [e.text for e in b.corpus]


# ----------------------------------------------------------- audit files

def test_records_round_trip_and_field_names(tmp_path):
    poisoned = poison_corpus(ten_example_corpus(), a1y0_config())
    path = tmp_path / "records.jsonl"
    save_records(poisoned.records, path)
    assert load_records(path) == poisoned.records
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {
        "example_id",
        "insert_byte_offset",
        "anchored",
        "original_label",
        "flipped_label",
    }
