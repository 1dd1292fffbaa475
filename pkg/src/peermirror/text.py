"""Tokenization, sentence splitting and word counting.

Every other module counts and compares text through these functions, so the
rules here are deliberately simple and fully deterministic:

* input is NFC-normalized first; spans index the normalized string,
* a word is a run of letters/digits, with apostrophes and hyphens kept when
  they sit between two word characters (``don't``, ``well-known``),
* any other non-space character is a punctuation token of its own,
* combining marks and format characters (zero-width joiners, tags, variation
  selectors) extend whatever token precedes them.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

WORD = "word"
PUNCT = "punctuation"

_JOINERS = frozenset("'’-‐")
_SENTENCE_END = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s|$)")


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int
    kind: Literal["word", "punctuation"]

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def is_word(self) -> bool:
        return self.kind == WORD


def normalize(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@lru_cache(maxsize=4096)
def _kind(ch: str) -> str:
    """'w' letter/digit, 'a' attaches to the previous token, 's' space, 'p' anything else."""
    if ch.isalnum():
        return "w"
    if ch.isspace():
        return "s"
    cat = unicodedata.category(ch)
    return "a" if cat[0] == "M" or cat == "Cf" else "p"


def tokenize(text: str) -> list[Token]:
    text = normalize(text)
    kinds = [_kind(c) for c in text]
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        k = kinds[i]
        if k == "s":
            i += 1
            continue
        start = i
        i += 1
        if k == "w":
            while i < n:
                k = kinds[i]
                if k == "w" or k == "a":
                    i += 1
                elif text[i] in _JOINERS and i + 1 < n and kinds[i + 1] == "w":
                    i += 2
                else:
                    break
            tokens.append(Token(text[start:i], start, i, WORD))
        else:
            while i < n and kinds[i] == "a":
                i += 1
            tokens.append(Token(text[start:i], start, i, PUNCT))
    return tokens


def surfaces(text: str) -> list[str]:
    return [t.surface for t in tokenize(text)]


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Return ``(start, end)`` spans of the sentences in ``text``.

    A sentence ends at a run of ``.``, ``!`` or ``?`` (plus closing quotes or
    brackets) followed by whitespace or the end of the text. Leading and
    trailing whitespace is never part of a span.
    """
    text = normalize(text)
    spans = []
    pos = 0
    for m in _SENTENCE_END.finditer(text):
        chunk_start = pos
        while chunk_start < m.end() and text[chunk_start].isspace():
            chunk_start += 1
        if chunk_start < m.end():
            spans.append((chunk_start, m.end()))
        pos = m.end()
    tail = text[pos:]
    if tail.strip():
        lead = len(tail) - len(tail.lstrip())
        spans.append((pos + lead, pos + len(tail.rstrip())))
    return spans


def count_sentences(text: str) -> int:
    return len(split_sentences(text))


def count_words(text: str) -> int:
    return sum(1 for t in tokenize(text) if t.kind == WORD)


def squash(text: str) -> str:
    """Text with all whitespace removed; the basis of whitespace-insensitive equality."""
    return "".join(normalize(text).split())
