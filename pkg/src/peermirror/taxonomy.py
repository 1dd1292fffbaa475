"""Error categories, error profiles and the rules that assign edits to them."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .edits import DELETE, INSERT, SUBSTITUTE, Edit


class Category(str, Enum):
    SUBJECT_VERB_AGREEMENT = "subject_verb_agreement"
    VERB_TENSE = "verb_tense"
    ARTICLE_USAGE = "article_usage"
    NOUN_NUMBER = "noun_number"
    PREPOSITION = "preposition"
    WORD_CHOICE = "word_choice"
    WORD_FORM = "word_form"
    SPELLING = "spelling"
    PUNCTUATION = "punctuation"
    WORD_ORDER = "word_order"
    OTHER = "other"

    def __str__(self) -> str:
        return self.value

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self]


CATEGORIES: tuple[Category, ...] = tuple(Category)

DISPLAY_NAMES = {
    Category.SUBJECT_VERB_AGREEMENT: "Subject-verb agreement error",
    Category.VERB_TENSE: "Verb tense error",
    Category.ARTICLE_USAGE: "Incorrect article usage",
    Category.NOUN_NUMBER: "Singular/plural noun error",
    Category.PREPOSITION: "Preposition error",
    Category.WORD_CHOICE: "Word choice error",
    Category.WORD_FORM: "Word form error",
    Category.SPELLING: "Spelling error",
    Category.PUNCTUATION: "Punctuation error",
    Category.WORD_ORDER: "Word order error",
    Category.OTHER: "Other error",
}

# Ordered, first match wins. Keywords are matched as whole words.
_KEYWORDS: list[tuple[tuple[str, ...], Category]] = [
    (("subject verb", "subject-verb", "agreement", "concord"), Category.SUBJECT_VERB_AGREEMENT),
    (("article", "articles", "determiner", "determiners"), Category.ARTICLE_USAGE),
    (("tense", "tenses"), Category.VERB_TENSE),
    (("plural", "singular", "plurality", "noun number"), Category.NOUN_NUMBER),
    (("preposition", "prepositions", "prepositional"), Category.PREPOSITION),
    (("spelling", "misspelling", "misspelled", "typo", "typos"), Category.SPELLING),
    (("punctuation", "comma", "commas", "capitalization"), Category.PUNCTUATION),
    (("order",), Category.WORD_ORDER),
    (("word choice", "vocabulary", "lexical", "collocation"), Category.WORD_CHOICE),
    (("form", "part of speech", "parts of speech"), Category.WORD_FORM),
]


def normalize_label(raw: str) -> Category:
    """Map a free-form error label to a canonical category (``other`` if nothing fits)."""
    if isinstance(raw, Category):
        return raw
    text = raw.lower().replace("_", " ")
    try:
        return Category(text.replace(" ", "_").strip())
    except ValueError:
        pass
    text = " " + " ".join(re.sub(r"[^\w\s-]", " ", text).split()) + " "
    spaced = text.replace("-", " ")
    for keys, cat in _KEYWORDS:
        for key in keys:
            if f" {key} " in text or f" {key.replace('-', ' ')} " in spaced:
                return cat
    return Category.OTHER


@dataclass(frozen=True)
class ErrorProfile:
    """Category -> count. Only positive counts are stored; ``total`` is their sum."""

    counts: Mapping[Category, int] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[Category, int] = {}
        for key, value in dict(self.counts).items():
            cat = key if isinstance(key, Category) else Category(key)
            if isinstance(value, bool) or int(value) != value or value < 0:
                raise ValueError(f"count for {cat} must be a non-negative integer, got {value!r}")
            if value:
                clean[cat] = clean.get(cat, 0) + int(value)
        ordered = {c: clean[c] for c in CATEGORIES if c in clean}
        object.__setattr__(self, "counts", ordered)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, cat) -> int:
        return self.counts.get(normalize_label(cat) if isinstance(cat, str) else cat, 0)

    def __add__(self, other: "ErrorProfile") -> "ErrorProfile":
        merged = Counter(self.counts)
        merged.update(other.counts)
        return ErrorProfile(merged)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ErrorProfile):
            return NotImplemented
        return dict(self.counts) == dict(other.counts)

    def __hash__(self) -> int:
        return hash(tuple(self.counts.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{c.value}={n}" for c, n in self.counts.items())
        return f"ErrorProfile({inner}; total={self.total})"

    def delta(self, other: "ErrorProfile") -> dict[str, int]:
        """Per-category ``other - self`` for every category present in either."""
        cats = [c for c in CATEGORIES if c in self.counts or c in other.counts]
        return {c.value: other[c] - self[c] for c in cats}

    def to_dict(self) -> dict[str, int]:
        d: dict[str, int] = {c.value: n for c, n in self.counts.items()}
        d["total"] = self.total
        return dict(sorted(d.items()))

    @classmethod
    def from_dict(cls, d: Mapping[str, int]) -> "ErrorProfile":
        d = dict(d)
        total = d.pop("total", None)
        profile = cls({Category(k): v for k, v in d.items()})
        if total is not None and total != profile.total:
            raise ValueError(f"declared total {total} != sum of counts {profile.total}")
        return profile

    @classmethod
    def from_categories(cls, cats: Iterable) -> "ErrorProfile":
        return cls(Counter(normalize_label(c) for c in cats))


def render_profile(profile: ErrorProfile) -> str:
    """The bullet-list-plus-total format the counting step asks the model for."""
    lines = [f"- {cat.display_name}: {n}" for cat, n in profile.counts.items()]
    lines.append(f"Total corrections: {profile.total}")
    return "\n".join(lines)


@dataclass
class CountParse:
    profile: ErrorProfile
    declared_total: Optional[int]
    problems: list[str]

    @property
    def discrepancy(self) -> bool:
        return self.declared_total is not None and self.declared_total != self.profile.total


_TOTAL_LINE = re.compile(r"^\W*total(?:\s+(?:corrections|errors|count))?\W*[:=]\s*\**\s*(-?[\d.]+)", re.I)
_COUNT_LINE = re.compile(
    r"^\s*(?:[-*•·]|\d+[.)])?\s*(.+?)\s*:\s*\**\s*([-+]?\d+(?:\.\d+)?)(?![\d.])\**"
    r"(?:\s*(?:[(\[]|[-\u2013\u2014]\s).*)?\s*$"
)


def parse_error_counts(llm_output: str) -> CountParse:
    """Read ``<label>: <n>`` lines and an optional ``Total corrections: N`` line.

    The profile total is always the sum of the item counts; a declared total
    that disagrees is kept and reported, not trusted.
    """
    counts: Counter = Counter()
    declared: Optional[int] = None
    problems: list[str] = []
    for line in llm_output.splitlines():
        if not line.strip():
            continue
        tm = _TOTAL_LINE.match(line.strip().strip("*"))
        if tm:
            try:
                declared = int(tm.group(1))
            except ValueError:
                problems.append(f"unreadable total: {line.strip()}")
            continue
        m = _COUNT_LINE.match(line)
        if not m:
            continue
        label = m.group(1).strip().strip("*").strip()
        value = m.group(2)
        if not re.fullmatch(r"\+?\d+", value) or int(value) < 0:
            problems.append(f"invalid count {value!r} for {label!r}")
            continue
        counts[normalize_label(label)] += int(value)
    profile = ErrorProfile(counts)
    if declared is not None and declared != profile.total:
        problems.append(f"declared total {declared} != item sum {profile.total}")
    return CountParse(profile, declared, problems)


# -- heuristic classification of deterministic edits ----------------------------

ARTICLES = frozenset({"a", "an", "the"})
PREPOSITIONS = frozenset({"in", "on", "at", "to", "for", "of", "with", "by"})
_SUBJECTS = frozenset({
    "he", "she", "it", "i", "you", "we", "they", "who", "that", "which",
    "everyone", "everybody", "someone", "somebody", "nobody", "people",
    "this", "there",
})
_DETERMINERS = frozenset({
    "a", "an", "the", "this", "these", "those", "my", "your", "his", "her",
    "its", "our", "their", "many", "some", "several", "few", "two", "three",
    "all", "both", "any", "each", "every", "much", "more", "most", "one",
})
COMMON_VERBS = frozenset("""
    be go do have make take see come get give know think want like love need
    use find tell ask work seem feel try leave call play run move live believe
    bring happen write sit stand lose pay meet include continue set learn
    change lead understand watch follow stop create speak read spend grow open
    walk win offer remember consider appear buy wait serve die send expect
    build stay fall cut reach kill remain visit enjoy travel eat study look
    hope help start show hear teach cook swim relax explore prefer imagine
    fascinate belong make say keep let begin mean turn put
""".split())
_SUFFIXES = ("", "s", "es", "ed", "ing")


def _stems(word: str) -> list[tuple[str, str]]:
    out = [(word, "")]
    for suf in _SUFFIXES[1:]:
        if word.endswith(suf) and len(word) > len(suf) + 1:
            out.append((word[: -len(suf)], suf))
    return out


def _same_stem(x: str, y: str) -> bool:
    return x == y or x + "e" == y or y + "e" == x


def _shared_suffix_change(a: str, b: str) -> Optional[tuple[str, str, str]]:
    for sa, fa in _stems(a):
        for sb, fb in _stems(b):
            if fa != fb and _same_stem(sa, sb):
                return (sa, fa, fb)
    return None


def _is_punct(tok: str) -> bool:
    return not any(ch.isalnum() for ch in tok)


def _char_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j - 1] + (ca != cb), prev[j] + 1, cur[j - 1] + 1))
        prev = cur
    return prev[-1]


def _letters(s: str) -> Counter:
    return Counter(ch for ch in s.lower() if ch.isalpha())


def _verb_position(stem: str, previous: Optional[str]) -> bool:
    if previous is not None:
        prev = previous.lower()
        if prev in _SUBJECTS:
            return True
        if prev in _DETERMINERS:
            return False
    return stem in COMMON_VERBS


def classify_edit(edit: Edit, context: Optional[Sequence[str]] = None) -> Category:
    """Ordered first-match rules; ``context`` is the original token list, if known."""
    orig = [t.lower() for t in edit.original_tokens]
    corr = [t.lower() for t in edit.corrected_tokens]
    changed = orig or corr

    if edit.kind in (INSERT, DELETE) and len(changed) == 1 and changed[0] in ARTICLES:
        return Category.ARTICLE_USAGE
    if (edit.kind == SUBSTITUTE and len(orig) == len(corr) == 1
            and orig[0] in ARTICLES and corr[0] in ARTICLES):
        return Category.ARTICLE_USAGE
    if all(_is_punct(t) for t in orig + corr):
        return Category.PUNCTUATION

    single = edit.kind == SUBSTITUTE and len(orig) == 1 and len(corr) == 1
    if single:
        a, b = orig[0], corr[0]
        change = _shared_suffix_change(a, b)
        if change:
            stem, fa, fb = change
            if {fa, fb} <= {"", "s", "es"}:
                previous = None
                if context is not None and edit.original_range[0] > 0:
                    previous = context[edit.original_range[0] - 1]
                if _verb_position(stem, previous):
                    return Category.SUBJECT_VERB_AGREEMENT
                return Category.NOUN_NUMBER
            return Category.VERB_TENSE
        if _letters(a) == _letters(b) or (
            min(len(a), len(b)) >= 5 and _char_distance(a, b) <= 2
        ):
            return Category.SPELLING

    if edit.kind in (INSERT, DELETE) and len(changed) == 1 and changed[0] in PREPOSITIONS:
        return Category.PREPOSITION
    if single and orig[0] in PREPOSITIONS and corr[0] in PREPOSITIONS:
        return Category.PREPOSITION
    if edit.kind == SUBSTITUTE:
        return Category.WORD_CHOICE
    return Category.WORD_ORDER


def profile_from_edits(
    edits: Sequence[Edit],
    category_hints: Optional[Mapping[int, str]] = None,
    context: Optional[Sequence[str]] = None,
) -> tuple[ErrorProfile, list[Edit]]:
    """Count one error per edit; a hint label (by edit index) beats the heuristic.

    Returns the profile and the edits with their ``category`` filled in.
    """
    hints = category_hints or {}
    labelled = []
    for idx, edit in enumerate(edits):
        if idx in hints:
            cat = normalize_label(hints[idx])
        else:
            cat = classify_edit(edit, context)
        labelled.append(edit.with_category(cat.value))
    return ErrorProfile.from_categories(e.category for e in labelled), labelled
