"""A deterministic stand-in for the chat model.

Every error the mock plants is tagged with an invisible marker: a run of
Unicode tag characters (format characters, so the tokenizer glues them to the
preceding token) that records the error category, how many characters of
corrupted text precede the marker, and the original text they replaced.
Correcting a marked essay is then exact: each marker is swapped back for the
text it encodes.

The backend answers every prompt the pipeline sends, recognising the stage
from the instruction text:

* correction   -> known reference correction, else markers restored
* change list  -> deterministic edits, labelled from the markers they contain
* error counts -> profile of those edits in the counting-step list format
* injection    -> the essay with the requested errors planted
* draft / comparison essays -> canned clean essays chosen by topic
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional

from .edits import extract_edits, parse_change_list, reconcile
from .llm import CompletionRequest
from .taxonomy import (
    ARTICLES,
    CATEGORIES,
    COMMON_VERBS,
    PREPOSITIONS,
    Category,
    ErrorProfile,
    parse_error_counts,
    profile_from_edits,
    render_profile,
)
from .text import Token, normalize, tokenize

_OPEN = "\U000E0001"
_CLOSE = "\U000E007F"
_MARKER = re.compile(_OPEN + "([\U000E0020-\U000E007E]+)" + _CLOSE)


def encode_marker(category: Category, visible_len: int, original: str) -> str:
    payload = f"{CATEGORIES.index(category)}:{visible_len}:{original.encode('utf-8').hex()}"
    return _OPEN + "".join(chr(0xE0000 + ord(c)) for c in payload) + _CLOSE


def _decode(body: str) -> tuple[Category, int, str]:
    payload = "".join(chr(ord(c) - 0xE0000) for c in body)
    cat, vis, hexed = payload.split(":")
    return CATEGORIES[int(cat)], int(vis), bytes.fromhex(hexed).decode("utf-8")


def has_markers(text: str) -> bool:
    return _MARKER.search(text) is not None


def marker_categories(text: str) -> list[Category]:
    return [_decode(m.group(1))[0] for m in _MARKER.finditer(text)]


def strip_markers(text: str) -> str:
    """Remove markers but keep the corrupted text (what a reader would see)."""
    return _MARKER.sub("", text)


def restore(text: str) -> str:
    """Undo every planted error."""
    text = normalize(text)
    for m in reversed(list(_MARKER.finditer(text))):
        _, vis, original = _decode(m.group(1))
        text = text[: m.start() - vis] + original + text[m.end():]
    return text


# -- corruption rules ---------------------------------------------------------

_AGREE_SWAP = {"is": "are", "are": "is", "was": "were", "were": "was", "has": "have",
               "have": "has", "does": "do", "do": "does"}
_IRREGULAR_PAST = {"went": "go", "was": "is", "were": "are", "had": "have", "saw": "see",
                   "took": "take", "made": "make", "felt": "feel", "came": "come",
                   "got": "get", "thought": "think", "ate": "eat", "wrote": "write",
                   "bought": "buy", "taught": "teach", "began": "begin", "left": "leave"}
_PREP_SWAP = {"in": "on", "on": "in", "at": "in", "to": "at", "for": "to", "of": "for",
              "with": "by", "by": "with", "about": "of", "from": "of"}
_WORD_SWAP = {"make": "do", "do": "make", "say": "tell", "tell": "say", "see": "watch",
              "watch": "see", "many": "much", "much": "many", "learn": "study",
              "study": "learn", "fun": "funny", "interesting": "interested", "also": "too",
              "really": "truly", "beautiful": "pretty", "enjoy": "like", "want": "hope",
              "place": "spot", "people": "persons", "think": "feel", "because": "since",
              "trip": "travel", "big": "large", "good": "nice", "favorite": "preferred"}
_SINGULAR_CUES = frozenset({"a", "an", "this", "one", "every", "each", "that"})
_THIRD_PERSON = frozenset({"he", "she", "it"})
_PLURAL_SUBJECTS = frozenset({"i", "you", "we", "they"})


def _match_case(template: str, word: str) -> str:
    if template[:1].isupper():
        return word[:1].upper() + word[1:]
    return word


_GAP = 2


@dataclass
class _Site:
    start: int
    end: int  # token index, exclusive
    corrupted: str
    category: Category


@dataclass
class _Planner:
    text: str
    tokens: list[Token]
    used: set = field(default_factory=set)

    def free(self, s: int, e: int) -> bool:
        # Two untouched tokens between sites keep each one a separate edit.
        return 0 <= s and e <= len(self.tokens) and not any(
            k in self.used for k in range(s - _GAP, e + _GAP)
        )

    def word(self, i: int) -> Optional[str]:
        if 0 <= i < len(self.tokens) and self.tokens[i].is_word:
            return self.tokens[i].surface
        return None

    def alpha(self, i: int, min_len: int = 1) -> Optional[str]:
        w = self.word(i)
        if w and w.isalpha() and len(w) >= min_len:
            return w
        return None

    def lower(self, i: int) -> str:
        w = self.word(i)
        return w.lower() if w else ""

    def original(self, s: int, e: int) -> str:
        return self.text[self.tokens[s].start:self.tokens[e - 1].end]

    def take(self, site: _Site) -> _Site:
        self.used.update(range(site.start, site.end))
        return site

    def scan(self, rule) -> Optional[_Site]:
        for i in range(len(self.tokens)):
            got = rule(i)
            if got is None:
                continue
            s, e, corrupted = got
            if self.free(s, e) and corrupted != self.original(s, e):
                return (s, e, corrupted)
        return None


def _rules(p: _Planner, cat: Category):
    """Candidate rules for a category, most natural first, generic last."""
    w, a, low = p.word, p.alpha, p.lower

    def word_rule(fn, min_len=3):
        def rule(i):
            x = a(i, min_len)
            if x is None:
                return None
            out = fn(x, i)
            return (i, i + 1, out) if out else None
        return rule

    if cat is Category.ARTICLE_USAGE:
        def drop(i):
            if low(i) in ARTICLES and w(i + 1):
                return (i, i + 2, _match_case(w(i), w(i + 1)))
        def add(i):
            if w(i) and low(i) not in ARTICLES and w(i - 1) and low(i - 1) not in ARTICLES:
                return (i, i + 1, "the " + w(i))
        return [drop, add]

    if cat is Category.SUBJECT_VERB_AGREEMENT:
        def swap(x, i):
            y = _AGREE_SWAP.get(x.lower())
            return _match_case(x, y) if y else None
        def strip_s(x, i):
            if low(i - 1) in _THIRD_PERSON and x.endswith("s") and len(x) >= 3:
                return x[:-2] if x.endswith(("oes", "shes", "ches", "xes")) else x[:-1]
        def add_s(x, i):
            if low(i - 1) in _PLURAL_SUBJECTS and x.lower() in COMMON_VERBS:
                return x + ("es" if x.endswith(("o", "sh", "ch")) else "s")
        return [word_rule(swap, 2), word_rule(strip_s), word_rule(add_s),
                word_rule(lambda x, i: x + "s")]

    if cat is Category.VERB_TENSE:
        def irregular(x, i):
            y = _IRREGULAR_PAST.get(x.lower())
            return _match_case(x, y) if y else None
        def unpast(x, i):
            if x.endswith("ed") and len(x) >= 5:
                if x[:-1].lower() in COMMON_VERBS:
                    return x[:-1]
                return x[:-2]
        def past(x, i):
            if x.lower() in COMMON_VERBS:
                return x + ("d" if x.endswith("e") else "ed")
        return [word_rule(irregular, 2), word_rule(unpast), word_rule(past),
                word_rule(lambda x, i: x + "ed")]

    if cat is Category.NOUN_NUMBER:
        def pluralize(x, i):
            if low(i - 1) in _SINGULAR_CUES and x.lower() not in COMMON_VERBS:
                return x + "s"
        def singularize(x, i):
            if (x.endswith("s") and not x.endswith("ss") and len(x) >= 4
                    and low(i - 1) not in _THIRD_PERSON):
                return x[:-1]
        return [word_rule(pluralize), word_rule(singularize), word_rule(lambda x, i: x + "s")]

    if cat is Category.PREPOSITION:
        def swap(x, i):
            y = _PREP_SWAP.get(x.lower())
            return _match_case(x, y) if y else None
        def insert_to(i):
            if w(i) and w(i - 1) and low(i - 1) not in PREPOSITIONS and low(i) not in PREPOSITIONS:
                return (i, i + 1, "to " + w(i))
        return [word_rule(swap, 2), insert_to]

    if cat is Category.WORD_CHOICE:
        def swap(x, i):
            y = _WORD_SWAP.get(x.lower())
            return _match_case(x, y) if y else None
        return [word_rule(swap, 2), word_rule(lambda x, i: "stuff" if x.lower() != "stuff" else None, 4)]

    if cat is Category.WORD_FORM:
        def drop_ly(x, i):
            return x[:-2] if x.endswith("ly") and len(x) >= 6 else None
        def ful(x, i):
            return x + "ly" if x.endswith("ful") else None
        return [word_rule(drop_ly), word_rule(ful), word_rule(lambda x, i: x + "ly", 4)]

    if cat is Category.SPELLING:
        def swap_letters(x, i):
            if len(x) >= 5 and x[-3] != x[-2]:
                return x[:-3] + x[-2] + x[-3] + x[-1]
        return [word_rule(swap_letters, 5), word_rule(lambda x, i: x + x[-1])]

    if cat is Category.PUNCTUATION:
        def drop_comma(i):
            if i < len(p.tokens) and p.tokens[i].surface == "," and w(i - 1):
                return (i - 1, i + 1, w(i - 1))
        def add_comma(i):
            if w(i) and w(i + 1):
                return (i, i + 1, w(i) + ",")
        return [drop_comma, add_comma]

    if cat is Category.WORD_ORDER:
        def swap(i):
            x, y = a(i, 2), a(i + 1, 2)
            if x and y and x.lower() != y.lower():
                return (i, i + 2, f"{y} {x}")
        return [swap]

    return [word_rule(lambda x, i: f"{x} {x}", 2)]


def plan_sites(text: str, profile: ErrorProfile) -> list[_Site]:
    p = _Planner(text, tokenize(text))
    sites = []
    for cat, n in profile.counts.items():
        for _ in range(n):
            for rule in _rules(p, cat):
                got = p.scan(rule)
                if got is not None:
                    sites.append(p.take(_Site(*got, category=cat)))
                    break
    return sites


def plant(text: str, profile: ErrorProfile, shortfall: int = 0) -> str:
    """Return ``text`` with the errors of ``profile`` planted and marked.

    ``shortfall`` drops that many errors from the end of the plan, to imitate
    a model that under-delivers.
    """
    text = normalize(text)
    sites = plan_sites(text, profile)
    if shortfall:
        sites = sites[: max(0, len(sites) - shortfall)]
    tokens = tokenize(text)
    out = []
    pos = 0
    for site in sorted(sites, key=lambda s: s.start):
        lo, hi = tokens[site.start].start, tokens[site.end - 1].end
        out.append(text[pos:lo])
        out.append(site.corrupted)
        out.append(encode_marker(site.category, len(site.corrupted), text[lo:hi]))
        pos = hi
    out.append(text[pos:])
    return "".join(out)


# -- canned essays ------------------------------------------------------------

def _load_essays() -> list[dict]:
    raw = resources.files("peermirror").joinpath("data/mock_essays.jsonl").read_text("utf-8")
    return [json.loads(line) for line in raw.splitlines() if line.strip()]


def _pick(essays: list[dict], role: str, topic: str) -> str:
    pool = [e for e in essays if e["role"] == role]
    topic_n = normalize(topic).strip().casefold()
    for e in pool:
        if e["topic"].casefold() == topic_n:
            return e["text"]
    for e in pool:
        if any(k in topic_n for k in e.get("keywords", [])):
            return e["text"]
    idx = int(hashlib.sha256(topic_n.encode("utf-8")).hexdigest(), 16) % len(pool)
    return pool[idx]["text"]


def load_references(path) -> dict[str, str]:
    """Read ``{"text", "corrected"}`` JSONL records into an original -> corrected map."""
    refs = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                refs[rec["text"]] = rec["corrected"]
    return refs


# -- the backend --------------------------------------------------------------

STAGE_CUES = {
    "correct": "Correct any grammatical or structural errors",
    "list_changes": "List the changes made in the corrected essay",
    "count_errors": "Explain the mistakes made in the corrected essay",
    "inject_errors": "mix the specified number of errors",
    "comparison": "pretending to be a different fictional character",
    "draft": "Write an original, grammatically correct essay",
}


def detect_stage(prompt: str) -> str:
    for stage, cue in STAGE_CUES.items():
        if cue in prompt:
            return stage
    raise ValueError("mock backend does not recognise this prompt")


def section(prompt: str, name: str) -> str:
    m = re.search(rf"<{name}>\n(.*?)\n</{name}>", prompt, re.S)
    if m is None:
        raise ValueError(f"prompt has no <{name}> section")
    return m.group(1)


class MockBackend:
    """A perfect (or deliberately short-changing) model for offline runs."""

    def __init__(self, references: Optional[Mapping[str, str]] = None, shortfall: int = 0):
        self.references = {normalize(k): v for k, v in (references or {}).items()}
        self.shortfall = shortfall
        self.essays = _load_essays()
        self.calls: list[str] = []

    def __call__(self, request: CompletionRequest) -> str:
        prompt = "\n".join(m.content for m in request.messages)
        stage = detect_stage(prompt)
        self.calls.append(stage)
        return getattr(self, f"_{stage}")(prompt)

    def _correct(self, prompt: str) -> str:
        essay = normalize(section(prompt, "essay"))
        if essay in self.references:
            return self.references[essay]
        return restore(essay)

    def _list_changes(self, prompt: str) -> str:
        original, corrected = section(prompt, "original"), section(prompt, "corrected")
        lines = []
        for e in extract_edits(original, corrected):
            line = f"- '{e.original_text}' → '{e.corrected_text}'"
            cats = marker_categories(e.original_text)
            if cats:
                line += f" ({cats[0].display_name})"
            lines.append(line)
        return "\n".join(lines)

    def _count_errors(self, prompt: str) -> str:
        original, corrected = section(prompt, "original"), section(prompt, "corrected")
        edits = extract_edits(original, corrected)
        rec = reconcile(edits, parse_change_list(section(prompt, "changes")).items)
        context = [t.surface for t in tokenize(original)]
        profile, _ = profile_from_edits(edits, rec.hints(), context)
        return render_profile(profile)

    def _inject_errors(self, prompt: str) -> str:
        profile = parse_error_counts(section(prompt, "errors")).profile
        return plant(section(prompt, "essay"), profile, self.shortfall)

    def _draft(self, prompt: str) -> str:
        return _pick(self.essays, "draft", section(prompt, "question"))

    def _comparison(self, prompt: str) -> str:
        return _pick(self.essays, "comparison", section(prompt, "question"))
