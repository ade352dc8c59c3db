import json

import pytest

from itemalign.corpus import (
    Corpus,
    CorpusError,
    InputCondition,
    canonical_scheme,
    compose_input,
    parse_corpus,
    parse_split,
    stratified_split,
    subsample,
    summarize,
    truncation_report,
    write_corpus,
    write_split,
)

from conftest import TEST_A_SKILL_COUNTS, make_corpus, make_item


def record(item_id="q1", **overrides):
    base = {
        "id": item_id,
        "prompt": "In 2010, an archaeologist noticed markings of red paint on the temple",
        "question_text": None,
        "options": ["walls, with", "walls with", "walls so with", "walls. With"],
        "key": "D",
        "rationale": "Choice D is the best answer.",
        "table": None,
        "figure": None,
        "domain": "Standard English Conventions",
        "skill": "Boundaries",
    }
    base.update(overrides)
    return base


def as_jsonl(*records):
    return "\n".join(json.dumps(r) for r in records) + "\n"


class TestScheme:
    def test_canonical_mapping(self, scheme):
        assert len(scheme.domains) == 4
        assert len(scheme.skills) == 10
        assert scheme.skills_of_domain(1) == [1, 2]
        assert scheme.skills_of_domain(2) == [3, 4, 5]
        assert scheme.skills_of_domain(3) == [6, 7]
        assert scheme.skills_of_domain(4) == [8, 9, 10]

    def test_name_lookup(self, scheme):
        assert scheme.domain_index("Craft and Structure") == 4
        assert scheme.skill_index("Words in Context") == 8
        with pytest.raises(KeyError):
            scheme.domain_index("Algebra")


class TestParseCorpus:
    def test_accepts_preprocessed_sample(self):
        corpus = parse_corpus(as_jsonl(record()))
        assert len(corpus) == 1
        item = corpus.items[0]
        assert item.domain == 1
        assert item.skill == 1
        assert item.key == "D"

    def test_hierarchy_mismatch_rejected(self):
        bad = record(domain="Craft and Structure")  # Boundaries belongs to domain 1
        with pytest.raises(CorpusError) as err:
            parse_corpus(as_jsonl(bad))
        assert err.value.line == 1
        assert err.value.field_name == "skill"

    def test_empty_file_gives_empty_corpus(self):
        assert len(parse_corpus("")) == 0

    def test_duplicate_id(self):
        with pytest.raises(CorpusError) as err:
            parse_corpus(as_jsonl(record("dup"), record("dup")))
        assert err.value.line == 2

    def test_missing_field_names_line_and_field(self):
        bad = record()
        del bad["key"]
        with pytest.raises(CorpusError) as err:
            parse_corpus(as_jsonl(record("ok"), bad))
        assert err.value.line == 2
        assert err.value.field_name == "key"

    def test_bad_key_letter(self):
        with pytest.raises(CorpusError):
            parse_corpus(as_jsonl(record(key="E")))

    def test_unknown_skill_name(self):
        with pytest.raises(CorpusError) as err:
            parse_corpus(as_jsonl(record(skill="Trigonometry")))
        assert err.value.field_name == "skill"

    def test_roundtrip(self):
        source = as_jsonl(record("a"), record("b"))
        corpus = parse_corpus(source)
        again = parse_corpus(write_corpus(corpus))
        assert [i.id for i in again.items] == ["a", "b"]
        assert again.items[0] == corpus.items[0]


class TestSummarize:
    def test_table_layout_counts(self, table_one_corpus):
        s = summarize(table_one_corpus)
        assert s.skill_counts == TEST_A_SKILL_COUNTS
        assert s.domain_counts == (289, 383, 269, 329)
        assert s.total == 1270

    def test_empty(self, scheme):
        s = summarize(Corpus("empty", scheme, []))
        assert s.total == 0
        assert s.domain_counts == (0, 0, 0, 0)

    def test_one_item_per_skill(self, small_corpus):
        s = summarize(small_corpus)
        assert s.skill_counts == (1,) * 10
        assert s.domain_counts == (2, 3, 2, 3)
        assert s.total == 10


class TestComposeInput:
    def test_full_condition_matches_sample_layout(self):
        item = make_item(
            "a3",
            1,
            prompt="On the temple",
            options=("walls, with", "walls with", "walls so with", "walls. With"),
            key="D",
            rationale="Choice D is the best answer.",
        )
        out = compose_input(item, InputCondition.PROMPT_TABLE_FIGURE_OPTIONS_KEY_RATIONALE)
        assert out.text == (
            "On the temple A: walls, with B: walls with C: walls so with "
            "D: walls. With D Choice D is the best answer."
        )

    def test_prompt_only_verbatim(self):
        item = make_item("p", 3, prompt="Just the passage.")
        out = compose_input(item, InputCondition.PROMPT_ONLY)
        assert out.text == "Just the passage."
        assert out.truncated is False

    def test_truncation_flag_on_long_text(self):
        words = " ".join(f"w{i}" for i in range(600))
        item = make_item("long", 2, prompt=words)
        out = compose_input(item, InputCondition.PROMPT_ONLY, token_budget=512)
        assert out.token_count == 600
        assert out.truncated is True
        assert out.text == words  # accounting only, text not cut

    def test_absent_optional_fields_skipped(self):
        item = make_item("x", 5, prompt="P", table_text=None, figure_text=None)
        out = compose_input(item, InputCondition.PROMPT_TABLE_FIGURE)
        assert out.text == "P"

    def test_condition_prefix_monotonicity(self):
        item = make_item(
            "m", 4,
            prompt="P", rationale="R", table_text="T", figure_text="F",
        )
        chain = [
            InputCondition.PROMPT_TABLE_FIGURE_OPTIONS,
            InputCondition.PROMPT_TABLE_FIGURE_OPTIONS_KEY,
            InputCondition.PROMPT_TABLE_FIGURE_OPTIONS_KEY_RATIONALE,
        ]
        texts = [compose_input(item, c).text for c in chain]
        assert texts[1].startswith(texts[0])
        assert texts[2].startswith(texts[1])

    def test_pure_function(self):
        item = make_item("pure", 7)
        a = compose_input(item, InputCondition.PROMPT_TABLE_FIGURE_OPTIONS)
        b = compose_input(item, InputCondition.PROMPT_TABLE_FIGURE_OPTIONS)
        assert a == b


class TestTruncationReport:
    def test_two_of_ten(self):
        items = [make_item(f"i{j}", 1, prompt="short text") for j in range(8)]
        items += [
            make_item(f"big{j}", 2, prompt=" ".join("w" for _ in range(600)))
            for j in range(2)
        ]
        corpus = Corpus("t", canonical_scheme(), items)
        rep = truncation_report(corpus, InputCondition.PROMPT_ONLY, 512)
        assert rep.fraction_4dp == "0.2000"
        assert sum(rep.flags.values()) == 2

    def test_huge_budget_zero_fraction(self, small_corpus):
        rep = truncation_report(small_corpus, InputCondition.PROMPT_ONLY, 1_000_000)
        assert rep.fraction_4dp == "0.0000"

    def test_fixture_fraction_matches_one_fifth(self):
        # 254 of 1270 items over budget -> exactly 0.2000
        counts = TEST_A_SKILL_COUNTS
        corpus = make_corpus(counts)
        long_prompt = " ".join("w" for _ in range(600))
        items = list(corpus.items)
        for idx in range(254):
            items[idx] = make_item(items[idx].id, items[idx].skill, prompt=long_prompt)
        corpus = Corpus("t", canonical_scheme(), items)
        rep = truncation_report(corpus, InputCondition.PROMPT_ONLY, 512)
        assert rep.fraction_4dp == "0.2000"

    def test_empty_corpus_errors(self, scheme):
        with pytest.raises(ValueError):
            truncation_report(Corpus("e", scheme, []), InputCondition.PROMPT_ONLY)


class TestStratifiedSplit:
    def test_exact_arithmetic_two_strata(self):
        corpus = make_corpus((5, 5) + (0,) * 8)
        split = stratified_split(corpus, (0.6, 0.2, 0.2), seed=7)
        for skill in (1, 2):
            ids = [i.id for i in corpus.items if i.skill == skill]
            counts = [sum(split.assignment[i] == s for i in ids)
                      for s in ("train", "validation", "test")]
            assert counts == [3, 1, 1]

    def test_deterministic(self, table_one_corpus):
        a = stratified_split(table_one_corpus, seed=42)
        b = stratified_split(table_one_corpus, seed=42)
        assert a.assignment == b.assignment

    def test_seed_changes_assignment(self, table_one_corpus):
        a = stratified_split(table_one_corpus, seed=1)
        b = stratified_split(table_one_corpus, seed=2)
        assert a.assignment != b.assignment

    def test_bad_fractions(self, small_corpus):
        with pytest.raises(ValueError):
            stratified_split(small_corpus, (0.5, 0.5, 0.5))

    def test_partition_properties(self, table_one_corpus):
        split = stratified_split(table_one_corpus, seed=3)
        assert set(split.assignment) == {i.id for i in table_one_corpus.items}
        from collections import Counter

        for skill in range(1, 11):
            ids = [i.id for i in table_one_corpus.items if i.skill == skill]
            got = Counter(split.assignment[i] for i in ids)
            n = len(ids)
            for frac, name in zip((0.6, 0.2, 0.2), ("train", "validation", "test")):
                assert abs(got[name] - frac * n) <= 1

    def test_tiny_stratum_warns_not_errors(self):
        corpus = make_corpus((1,) + (2,) * 9)
        with pytest.warns(UserWarning):
            split = stratified_split(corpus, (0.6, 0.2, 0.2), seed=0)
        assert len(split.assignment) == len(corpus.items)

    def test_split_file_roundtrip(self):
        corpus = make_corpus((5,) * 10)
        split = stratified_split(corpus, seed=5)
        assert parse_split(write_split(split)) == split.assignment


class TestSubsample:
    def test_identity_at_full_size(self, table_one_corpus):
        sub = subsample(table_one_corpus, len(table_one_corpus.items), seed=1)
        assert [i.id for i in sub.items] == [i.id for i in table_one_corpus.items]

    def test_proportions_within_one(self, table_one_corpus):
        sub = subsample(table_one_corpus, 500, seed=9)
        assert len(sub.items) == 500
        s = summarize(sub)
        for skill, count in enumerate(TEST_A_SKILL_COUNTS, start=1):
            expected = 500 * count / 1270
            assert abs(s.skill_counts[skill - 1] - expected) <= 1

    def test_zero_size_warns(self, small_corpus):
        with pytest.warns(UserWarning):
            sub = subsample(small_corpus, 0)
        assert len(sub) == 0

    def test_oversize_errors(self, small_corpus):
        with pytest.raises(ValueError):
            subsample(small_corpus, 11)

    def test_deterministic(self, table_one_corpus):
        a = subsample(table_one_corpus, 750, seed=4)
        b = subsample(table_one_corpus, 750, seed=4)
        assert [i.id for i in a.items] == [i.id for i in b.items]
