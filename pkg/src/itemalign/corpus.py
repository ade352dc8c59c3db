"""Item corpora: parsing, validation, input composition, splitting, subsampling.

An item is one test question (prompt, four options, key, rationale, optional
table/figure text) carrying a domain label and a skill label from a fixed
two-level hierarchy of 4 domains and 10 skills.  Items are stored as
line-delimited JSON; see `parse_corpus` for the record schema.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .rng import derive_seed

OPTION_LETTERS = ("A", "B", "C", "D")

SPLIT_NAMES = ("train", "validation", "test")

DEFAULT_TOKEN_BUDGET = 512


class CorpusError(ValueError):
    """Malformed corpus content; carries the offending line number and field."""

    def __init__(self, message: str, line: int | None = None, field_name: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field_name is not None:
            loc.append(f"field '{field_name}'")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.line = line
        self.field_name = field_name


@dataclass(frozen=True)
class LabelScheme:
    """Two-level label hierarchy: each skill belongs to exactly one domain.

    Indices are 1-based (domains 1..4, skills 1..10) to match the reporting
    convention; `skill_to_domain[s]` gives the domain index of skill `s`.
    """

    domains: tuple[str, ...]
    skills: tuple[str, ...]
    skill_to_domain: dict[int, int]

    def __post_init__(self):
        if len(self.domains) != 4:
            raise ValueError(f"expected 4 domains, got {len(self.domains)}")
        if len(self.skills) != 10:
            raise ValueError(f"expected 10 skills, got {len(self.skills)}")
        if sorted(self.skill_to_domain) != list(range(1, 11)):
            raise ValueError("skill_to_domain must map every skill index 1-10")
        targets = set(self.skill_to_domain.values())
        if not targets <= set(range(1, 5)):
            raise ValueError("skill_to_domain maps to unknown domain indices")
        if targets != set(range(1, 5)):
            raise ValueError("every domain must own at least one skill")

    def domain_index(self, name: str) -> int:
        try:
            return self.domains.index(name) + 1
        except ValueError:
            raise KeyError(f"unknown domain name: {name!r}") from None

    def skill_index(self, name: str) -> int:
        try:
            return self.skills.index(name) + 1
        except ValueError:
            raise KeyError(f"unknown skill name: {name!r}") from None

    def skills_of_domain(self, domain: int) -> list[int]:
        return [s for s, d in sorted(self.skill_to_domain.items()) if d == domain]


def canonical_scheme() -> LabelScheme:
    """The 4-domain / 10-skill scheme used by the reading & writing tests."""
    return LabelScheme(
        domains=(
            "Standard English Conventions",
            "Information and Ideas",
            "Expression of Ideas",
            "Craft and Structure",
        ),
        skills=(
            "Boundaries",
            "Form, Structure, and Sense",
            "Command of Evidence",
            "Inferences",
            "Central Ideas and Details",
            "Transitions",
            "Rhetorical Synthesis",
            "Words in Context",
            "Text Structure and Purpose",
            "Cross-Text Connections",
        ),
        skill_to_domain={1: 1, 2: 1, 3: 2, 4: 2, 5: 2, 6: 3, 7: 3, 8: 4, 9: 4, 10: 4},
    )


@dataclass(frozen=True)
class Item:
    """One test question with its labels.  `domain`/`skill` are 1-based indices."""

    id: str
    prompt: str
    options: tuple[str, str, str, str]
    key: str
    domain: int
    skill: int
    question_text: str | None = None
    rationale: str | None = None
    table_text: str | None = None
    figure_text: str | None = None

    def validate(self, scheme: LabelScheme, line: int | None = None) -> None:
        if not self.id:
            raise CorpusError("item id must be nonempty", line, "id")
        if not self.prompt:
            raise CorpusError("prompt must be nonempty", line, "prompt")
        if len(self.options) != 4 or any(not isinstance(o, str) for o in self.options):
            raise CorpusError("options must be exactly 4 strings", line, "options")
        if self.key not in OPTION_LETTERS:
            raise CorpusError(f"key must be one of A-D, got {self.key!r}", line, "key")
        if not 1 <= self.domain <= 4:
            raise CorpusError(f"domain index out of range: {self.domain}", line, "domain")
        if not 1 <= self.skill <= 10:
            raise CorpusError(f"skill index out of range: {self.skill}", line, "skill")
        if scheme.skill_to_domain[self.skill] != self.domain:
            raise CorpusError(
                f"skill {self.skill} ({scheme.skills[self.skill - 1]!r}) belongs to "
                f"domain {scheme.skill_to_domain[self.skill]}, not {self.domain}",
                line,
                "skill",
            )


@dataclass
class Corpus:
    """An ordered, validated collection of items under one label scheme."""

    name: str
    scheme: LabelScheme
    items: list[Item]

    def __post_init__(self):
        seen: set[str] = set()
        for it in self.items:
            if it.id in seen:
                raise CorpusError(f"duplicate item id {it.id!r}")
            seen.add(it.id)
            it.validate(self.scheme)

    def __len__(self) -> int:
        return len(self.items)

    def item_by_id(self, item_id: str) -> Item:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)

    def labels(self, level: str) -> list[int]:
        """1-based label indices at the given level ('domain' or 'skill')."""
        if level == "domain":
            return [it.domain for it in self.items]
        if level == "skill":
            return [it.skill for it in self.items]
        raise ValueError(f"level must be 'domain' or 'skill', got {level!r}")


class InputCondition(Enum):
    """The nine input compositions, each a fixed ordered list of item parts."""

    PROMPT_ONLY = "prompt_only"
    PROMPT_TABLE_FIGURE = "prompt_table_figure"
    PROMPT_TABLE_FIGURE_OPTIONS = "prompt_table_figure_options"
    PROMPT_TABLE_FIGURE_OPTIONS_KEY = "prompt_table_figure_options_key"
    PROMPT_TABLE_FIGURE_OPTIONS_KEY_RATIONALE = "prompt_table_figure_options_key_rationale"
    PROMPT_TABLE_FIGURE_QTEXT = "prompt_table_figure_qtext"
    PROMPT_TABLE_FIGURE_QTEXT_OPTIONS = "prompt_table_figure_qtext_options"
    PROMPT_TABLE_FIGURE_QTEXT_OPTIONS_KEY = "prompt_table_figure_qtext_options_key"
    PROMPT_TABLE_FIGURE_QTEXT_OPTIONS_KEY_RATIONALE = (
        "prompt_table_figure_qtext_options_key_rationale"
    )

    @property
    def fields(self) -> tuple[str, ...]:
        return _CONDITION_FIELDS[self]

    @property
    def includes_question_text(self) -> bool:
        return "question_text" in self.fields

    @classmethod
    def from_name(cls, name: str) -> "InputCondition":
        for c in cls:
            if c.value == name:
                return c
        raise ValueError(f"unknown input condition: {name!r}")


_CONDITION_FIELDS: dict[InputCondition, tuple[str, ...]] = {
    InputCondition.PROMPT_ONLY: ("prompt",),
    InputCondition.PROMPT_TABLE_FIGURE: ("prompt", "table_text", "figure_text"),
    InputCondition.PROMPT_TABLE_FIGURE_OPTIONS: ("prompt", "table_text", "figure_text", "options"),
    InputCondition.PROMPT_TABLE_FIGURE_OPTIONS_KEY: (
        "prompt", "table_text", "figure_text", "options", "key",
    ),
    InputCondition.PROMPT_TABLE_FIGURE_OPTIONS_KEY_RATIONALE: (
        "prompt", "table_text", "figure_text", "options", "key", "rationale",
    ),
    InputCondition.PROMPT_TABLE_FIGURE_QTEXT: (
        "prompt", "table_text", "figure_text", "question_text",
    ),
    InputCondition.PROMPT_TABLE_FIGURE_QTEXT_OPTIONS: (
        "prompt", "table_text", "figure_text", "question_text", "options",
    ),
    InputCondition.PROMPT_TABLE_FIGURE_QTEXT_OPTIONS_KEY: (
        "prompt", "table_text", "figure_text", "question_text", "options", "key",
    ),
    InputCondition.PROMPT_TABLE_FIGURE_QTEXT_OPTIONS_KEY_RATIONALE: (
        "prompt", "table_text", "figure_text", "question_text", "options", "key", "rationale",
    ),
}

# Conditions 6-9 carry the question text, which invites template shortcut
# learning; the default experiment configuration excludes them.
DEFAULT_CONDITIONS: tuple[InputCondition, ...] = tuple(
    c for c in InputCondition if not c.includes_question_text
)


def whitespace_token_count(text: str) -> int:
    """Default token counter: whitespace-delimited tokens."""
    return len(text.split())


@dataclass(frozen=True)
class ComposedInput:
    item_id: str
    condition: InputCondition
    text: str
    token_count: int
    truncated: bool


def compose_input(
    item: Item,
    condition: InputCondition,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    token_counter: Callable[[str], int] = whitespace_token_count,
) -> ComposedInput:
    """Render an item under one input condition.

    Present fields are joined in condition order with single spaces; absent
    optional fields contribute nothing.  Options render as
    "A: <text> B: <text> C: <text> D: <text>" and the key as its bare letter.
    The truncated flag is accounting only: the text is never cut, since the
    downstream encoder applies its own cutoff.
    """
    if token_budget < 1:
        raise ValueError("token_budget must be positive")
    parts: list[str] = []
    for name in condition.fields:
        if name == "options":
            parts.append(" ".join(f"{let}: {opt}" for let, opt in zip(OPTION_LETTERS, item.options)))
        elif name == "key":
            parts.append(item.key)
        else:
            value = getattr(item, name)
            if value:
                parts.append(value)
    text = " ".join(parts)
    n_tokens = token_counter(text)
    return ComposedInput(
        item_id=item.id,
        condition=condition,
        text=text,
        token_count=n_tokens,
        truncated=n_tokens > token_budget,
    )


@dataclass
class TruncationReport:
    condition: InputCondition
    token_budget: int
    flags: dict[str, bool]
    fraction: float

    @property
    def fraction_4dp(self) -> str:
        return f"{self.fraction:.4f}"


def truncation_report(
    corpus: Corpus,
    condition: InputCondition,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    token_counter: Callable[[str], int] = whitespace_token_count,
) -> TruncationReport:
    """Fraction of items whose composed input exceeds the token budget."""
    if not corpus.items:
        raise ValueError("truncation fraction is undefined on an empty corpus")
    flags = {
        it.id: compose_input(it, condition, token_budget, token_counter).truncated
        for it in corpus.items
    }
    frac = Fraction(sum(flags.values()), len(flags))
    return TruncationReport(condition, token_budget, flags, float(frac))


@dataclass(frozen=True)
class CorpusSummary:
    domain_counts: tuple[int, int, int, int]
    skill_counts: tuple[int, ...]
    total: int


def summarize(corpus: Corpus) -> CorpusSummary:
    """Per-domain and per-skill item counts, consistent under the hierarchy."""
    skill_counts = [0] * 10
    for it in corpus.items:
        skill_counts[it.skill - 1] += 1
    domain_counts = [0] * 4
    for s, n in enumerate(skill_counts, start=1):
        domain_counts[corpus.scheme.skill_to_domain[s] - 1] += n
    return CorpusSummary(tuple(domain_counts), tuple(skill_counts), len(corpus.items))


# ---------------------------------------------------------------------------
# Parsing / serialization (line-delimited JSON, one item object per line)

_REQUIRED_FIELDS = ("id", "prompt", "options", "key", "domain", "skill")
_OPTIONAL_TEXT_FIELDS = {
    "question_text": "question_text",
    "rationale": "rationale",
    "table": "table_text",
    "figure": "figure_text",
}


def parse_corpus(source: str, scheme: LabelScheme | None = None, name: str = "corpus") -> Corpus:
    """Parse a line-delimited JSON item file into a validated Corpus.

    Every malformed record is rejected with its line number and field name.
    Domain and skill are given by their exact scheme names.
    """
    scheme = scheme or canonical_scheme()
    items: list[Item] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(source.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(record, dict):
            raise CorpusError("record must be a JSON object", lineno)
        for field_name in _REQUIRED_FIELDS:
            if field_name not in record or record[field_name] is None:
                raise CorpusError("missing required field", lineno, field_name)
        options = record["options"]
        if not isinstance(options, list) or len(options) != 4:
            raise CorpusError("options must be an array of 4 strings", lineno, "options")
        try:
            domain = scheme.domain_index(record["domain"])
        except KeyError:
            raise CorpusError(
                f"unknown domain name {record['domain']!r}", lineno, "domain"
            ) from None
        try:
            skill = scheme.skill_index(record["skill"])
        except KeyError:
            raise CorpusError(f"unknown skill name {record['skill']!r}", lineno, "skill") from None
        item = Item(
            id=str(record["id"]),
            prompt=record["prompt"],
            options=tuple(options),
            key=record["key"],
            domain=domain,
            skill=skill,
            **{attr: record.get(key) for key, attr in _OPTIONAL_TEXT_FIELDS.items()},
        )
        if item.id in seen:
            raise CorpusError(f"duplicate item id {item.id!r}", lineno, "id")
        seen.add(item.id)
        item.validate(scheme, lineno)
        items.append(item)
    return Corpus(name=name, scheme=scheme, items=items)


def item_to_record(item: Item, scheme: LabelScheme) -> dict:
    return {
        "id": item.id,
        "prompt": item.prompt,
        "question_text": item.question_text,
        "options": list(item.options),
        "key": item.key,
        "rationale": item.rationale,
        "table": item.table_text,
        "figure": item.figure_text,
        "domain": scheme.domains[item.domain - 1],
        "skill": scheme.skills[item.skill - 1],
    }


def write_corpus(corpus: Corpus) -> str:
    """Serialize a corpus back to the line-delimited JSON item format."""
    lines = [
        json.dumps(item_to_record(it, corpus.scheme), ensure_ascii=False)
        for it in corpus.items
    ]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Stratified splitting and subsampling

@dataclass(frozen=True)
class SplitAssignment:
    seed: int
    fractions: tuple[float, float, float]
    stratify_by: str
    assignment: dict[str, str]

    def ids_of(self, split: str) -> list[str]:
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split name {split!r}")
        return [i for i, s in self.assignment.items() if s == split]


def _largest_remainder(total: int, weights: Sequence[Fraction]) -> list[int]:
    """Apportion `total` into integer parts proportional to `weights`.

    Each part differs from its exact share by less than 1.  Remainder ties
    are broken by position order.
    """
    wsum = sum(weights)
    if wsum == 0:
        raise ValueError("weights must not all be zero")
    exact = [Fraction(w, 1) / wsum * total for w in weights]
    base = [int(e) for e in exact]
    leftover = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def _as_fractions(fractions: Sequence[float]) -> tuple[Fraction, ...]:
    fr = tuple(Fraction(f).limit_denominator(10**9) for f in fractions)
    if any(f < 0 for f in fr):
        raise ValueError("fractions must be nonnegative")
    if sum(fr) != 1:
        raise ValueError(f"fractions must sum to 1, got {[float(f) for f in fr]}")
    return fr


def _strata(corpus: Corpus, stratify_by: str) -> dict[int, list[Item]]:
    strata: dict[int, list[Item]] = {}
    for it in corpus.items:
        label = it.domain if stratify_by == "domain" else it.skill
        strata.setdefault(label, []).append(it)
    return strata


def stratified_split(
    corpus: Corpus,
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
    stratify_by: str = "skill",
) -> SplitAssignment:
    """Seeded stratified train/validation/test partition.

    Within each stratum, items are shuffled by a generator seeded from
    (seed, stratum) and partitioned by largest-remainder apportionment, so
    every split count is within 1 of the exact fraction of the stratum size.
    """
    if stratify_by not in ("domain", "skill"):
        raise ValueError(f"stratify_by must be 'domain' or 'skill', got {stratify_by!r}")
    fr = _as_fractions(fractions)
    assignment: dict[str, str] = {}
    for label, members in sorted(_strata(corpus, stratify_by).items()):
        counts = _largest_remainder(len(members), fr)
        if any(f > 0 and c == 0 for f, c in zip(fr, counts)):
            empty = [SPLIT_NAMES[i] for i, (f, c) in enumerate(zip(fr, counts)) if f > 0 and c == 0]
            warnings.warn(
                f"stratum {label} has too few items ({len(members)}); "
                f"splits left empty: {', '.join(empty)}",
                stacklevel=2,
            )
        rng = np.random.default_rng(derive_seed(seed, "split", stratify_by, label))
        order = rng.permutation(len(members))
        cursor = 0
        for split_name, n in zip(SPLIT_NAMES, counts):
            for idx in order[cursor:cursor + n]:
                assignment[members[idx].id] = split_name
            cursor += n
    # report in corpus order for stable serialization
    ordered = {it.id: assignment[it.id] for it in corpus.items}
    return SplitAssignment(seed=seed, fractions=tuple(float(f) for f in fr),
                           stratify_by=stratify_by, assignment=ordered)


def write_split(split: SplitAssignment) -> str:
    """Split file format: line-delimited JSON {id, split}."""
    return "".join(
        json.dumps({"id": i, "split": s}) + "\n" for i, s in split.assignment.items()
    )


def parse_split(source: str) -> dict[str, str]:
    assignment: dict[str, str] = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"invalid JSON: {exc.msg}", lineno) from None
        if record.get("split") not in SPLIT_NAMES:
            raise CorpusError(f"unknown split {record.get('split')!r}", lineno, "split")
        assignment[str(record["id"])] = record["split"]
    return assignment


def subsample(corpus: Corpus, total_size: int, seed: int = 0) -> Corpus:
    """Seeded skill-stratified subsample preserving label proportions within 1.

    Per-skill quotas come from largest-remainder apportionment of
    total_size x (skill count / corpus size); within each skill the members
    are chosen by seeded shuffle.  Item order of the parent corpus is kept.
    """
    if total_size > len(corpus.items):
        raise ValueError(f"total_size {total_size} exceeds corpus size {len(corpus.items)}")
    if total_size == 0:
        warnings.warn("subsample of size 0 produces an empty corpus", stacklevel=2)
        return Corpus(name=corpus.name, scheme=corpus.scheme, items=[])
    if total_size == len(corpus.items):
        return Corpus(name=corpus.name, scheme=corpus.scheme, items=list(corpus.items))
    strata = _strata(corpus, "skill")
    labels = sorted(strata)
    quotas = _largest_remainder(total_size, [Fraction(len(strata[s])) for s in labels])
    chosen: set[str] = set()
    for label, quota in zip(labels, quotas):
        members = strata[label]
        rng = np.random.default_rng(derive_seed(seed, "subsample", label))
        order = rng.permutation(len(members))
        for idx in order[:quota]:
            chosen.add(members[idx].id)
    items = [it for it in corpus.items if it.id in chosen]
    return Corpus(name=corpus.name, scheme=corpus.scheme, items=items)
