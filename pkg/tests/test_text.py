import unicodedata

from hypothesis import given, strategies as st

from peermirror.text import (
    PUNCT, WORD, count_sentences, count_words, normalize, split_sentences, surfaces, tokenize,
)

texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=80)


def test_empty():
    assert tokenize("") == []
    assert count_words("") == 0
    assert split_sentences("") == []


def test_simple_sentence():
    assert surfaces("He go to school.") == ["He", "go", "to", "school", "."]
    assert count_words("He go to school.") == 4


def test_internal_apostrophe_and_hyphen():
    assert surfaces("don't stop") == ["don't", "stop"]
    assert count_words("don't stop") == 2
    assert surfaces("a well-known place") == ["a", "well-known", "place"]
    assert surfaces("dogs' toys") == ["dogs", "'", "toys"]


def test_kinds():
    toks = tokenize("Hi, you!")
    assert [t.kind for t in toks] == [WORD, PUNCT, WORD, PUNCT]
    assert toks[1].span == (2, 3)


def test_sentence_rules():
    assert count_sentences("Hi. Bye.") == 2
    assert count_sentences("no terminator") == 1
    assert count_sentences("Wait... really?! Yes") == 3
    assert count_sentences("3.5 is a number.") == 1


def test_normalization_composes():
    decomposed = "café"
    assert normalize(decomposed) == "café"
    assert surfaces(decomposed) == ["café"]


def test_combining_marks_stay_with_their_token():
    assert surfaces("x⃝ y") == ["x⃝", "y"]


@given(texts)
def test_spans_reread_surfaces(text):
    src = normalize(text)
    toks = tokenize(text)
    last = 0
    for t in toks:
        assert last <= t.start < t.end
        assert src[t.start:t.end] == t.surface
        last = t.end
        if t.kind == WORD:
            assert any(ch.isalnum() for ch in t.surface)


@given(texts)
def test_only_whitespace_is_dropped(text):
    src = normalize(text)
    covered = set()
    for t in tokenize(text):
        covered.update(range(t.start, t.end))
    assert all(src[i].isspace() for i in range(len(src)) if i not in covered)


@given(texts)
def test_retokenizing_the_join_is_idempotent(text):
    toks = surfaces(text)
    assert surfaces(" ".join(toks)) == toks


@given(texts)
def test_word_count_bounded(text):
    assert count_words(text) <= len(tokenize(text))


@given(texts)
def test_sentence_spans_cover_text(text):
    src = normalize(text)
    spans = split_sentences(text)
    covered = set()
    prev = 0
    for a, b in spans:
        assert prev <= a < b
        prev = b
        covered.update(range(a, b))
    assert all(src[i].isspace() for i in range(len(src)) if i not in covered)
    assert unicodedata.is_normalized("NFC", src)
