"""Token-level edit scripts between an original and a corrected essay.

``align`` is a unit-cost Levenshtein alignment over token surfaces.
``extract_edits`` groups the changed tokens into :class:`Edit` objects, and
``parse_change_list`` / ``reconcile`` connect those deterministic edits to the
free-form change list an LLM produces for the same pair of texts.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Literal, Optional, Sequence

from .text import squash, tokenize

log = logging.getLogger(__name__)

MATCH = "match"
SUBSTITUTE = "substitute"
DELETE = "delete"
INSERT = "insert"

EditKind = Literal["insert", "delete", "substitute"]


@dataclass(frozen=True)
class Op:
    """One step of an alignment; ``i``/``j`` are token indices (``None`` when absent)."""

    kind: str
    i: Optional[int]
    j: Optional[int]


@dataclass(frozen=True)
class Alignment:
    cost: int
    ops: tuple[Op, ...]

    def edits_only(self) -> list[Op]:
        return [op for op in self.ops if op.kind != MATCH]


@dataclass(frozen=True)
class Edit:
    kind: EditKind
    original_range: tuple[int, int]
    corrected_range: tuple[int, int]
    original_text: str
    corrected_text: str
    category: Optional[str] = None

    @property
    def original_tokens(self) -> list[str]:
        return self.original_text.split()

    @property
    def corrected_tokens(self) -> list[str]:
        return self.corrected_text.split()

    def with_category(self, category: Optional[str]) -> "Edit":
        return replace(self, category=category)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "original_range": list(self.original_range),
            "corrected_range": list(self.corrected_range),
            "original_text": self.original_text,
            "corrected_text": self.corrected_text,
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Edit":
        return cls(
            kind=d["kind"],
            original_range=tuple(d["original_range"]),
            corrected_range=tuple(d["corrected_range"]),
            original_text=d["original_text"],
            corrected_text=d["corrected_text"],
            category=d.get("category"),
        )


@dataclass(frozen=True)
class ChangeItem:
    original_fragment: str
    corrected_fragment: str
    raw_line: str
    label: Optional[str] = None


@dataclass
class ChangeList:
    items: list[ChangeItem]
    skipped: list[str]

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)


@dataclass
class Reconciliation:
    matched: list[tuple[int, ChangeItem]]
    unmatched_edits: list[int]
    unmatched_items: list[ChangeItem]

    def hints(self) -> dict[int, str]:
        """Edit index -> label for every matched item that carries a label."""
        return {idx: item.label for idx, item in self.matched if item.label}


_INF = float("inf")


def _band_table(a: Sequence, b: Sequence, k: int) -> list[list[float]]:
    n, m = len(a), len(b)
    D = [[_INF] * (m + 1) for _ in range(n + 1)]
    row0 = D[0]
    for j in range(min(m, k) + 1):
        row0[j] = j
    for i in range(1, n + 1):
        prev, cur = D[i - 1], D[i]
        lo, hi = max(0, i - k), min(m, i + k)
        if lo == 0:
            cur[0] = i
            lo = 1
        ai = a[i - 1]
        for j in range(lo, hi + 1):
            best = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            x = prev[j] + 1
            if x < best:
                best = x
            x = cur[j - 1] + 1
            if x < best:
                best = x
            cur[j] = best
    return D


def align(original: Sequence, corrected: Sequence) -> Alignment:
    """Minimal unit-cost alignment of two token sequences.

    Ties are broken at each table cell during the backtrace, preferring
    match, then substitute, then delete, then insert.
    """
    a, b = list(original), list(corrected)
    n, m = len(a), len(b)
    # A common suffix is always matched by the backtrace, so it can be peeled off.
    s = 0
    while s < n and s < m and a[n - 1 - s] == b[m - 1 - s]:
        s += 1
    na, nb = n - s, m - s

    # Banded table: exact whenever the distance fits inside the band.
    k = max(abs(na - nb), 8)
    while True:
        D = _band_table(a[:na], b[:nb], k)
        cost = D[na][nb]
        if cost <= k or k >= max(na, nb):
            break
        k *= 2

    ops: list[Op] = []
    i, j = na, nb
    while i > 0 or j > 0:
        here = D[i][j]
        if i > 0 and j > 0:
            diag = D[i - 1][j - 1]
            if a[i - 1] == b[j - 1] and diag == here:
                ops.append(Op(MATCH, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
            if diag + 1 == here:
                ops.append(Op(SUBSTITUTE, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and D[i - 1][j] + 1 == here:
            ops.append(Op(DELETE, i - 1, None))
            i -= 1
            continue
        ops.append(Op(INSERT, None, j - 1))
        j -= 1
    ops.reverse()
    ops.extend(Op(MATCH, na + t, nb + t) for t in range(s))
    return Alignment(int(cost), tuple(ops))


def _edit_from_run(run: list[Op], a: list[str], b: list[str], i0: int, j0: int) -> Edit:
    o_idx = [op.i for op in run if op.i is not None]
    c_idx = [op.j for op in run if op.j is not None]
    o_range = (o_idx[0], o_idx[-1] + 1) if o_idx else (i0, i0)
    c_range = (c_idx[0], c_idx[-1] + 1) if c_idx else (j0, j0)
    if o_idx and c_idx:
        kind = SUBSTITUTE
    elif o_idx:
        kind = DELETE
    else:
        kind = INSERT
    return Edit(
        kind=kind,
        original_range=o_range,
        corrected_range=c_range,
        original_text=" ".join(a[o_range[0]:o_range[1]]),
        corrected_text=" ".join(b[c_range[0]:c_range[1]]),
    )


def edits_from_alignment(alignment: Alignment, a: list[str], b: list[str]) -> list[Edit]:
    """Merge maximal runs of adjacent non-match operations into edits."""
    edits = []
    run: list[Op] = []
    i_pos = j_pos = 0
    run_start = (0, 0)
    for op in alignment.ops:
        if op.kind == MATCH:
            if run:
                edits.append(_edit_from_run(run, a, b, *run_start))
                run = []
            i_pos, j_pos = op.i + 1, op.j + 1
            continue
        if not run:
            run_start = (i_pos, j_pos)
        run.append(op)
        if op.i is not None:
            i_pos = op.i + 1
        if op.j is not None:
            j_pos = op.j + 1
    if run:
        edits.append(_edit_from_run(run, a, b, *run_start))
    return edits


def extract_edits(original_text: str, corrected_text: str) -> list[Edit]:
    """Merged edits turning ``original_text`` into ``corrected_text``.

    Runs whose two sides differ only in whitespace (a token boundary moved,
    nothing else) are dropped as formatting differences.
    """
    return list(_extract_cached(original_text, corrected_text))


@lru_cache(maxsize=512)
def _extract_cached(original_text: str, corrected_text: str) -> tuple[Edit, ...]:
    # The same pair is diffed by several pipeline stages; edits are immutable.
    a = [t.surface for t in tokenize(original_text)]
    b = [t.surface for t in tokenize(corrected_text)]
    raw = edits_from_alignment(align(a, b), a, b)
    return tuple(e for e in raw if squash(e.original_text) != squash(e.corrected_text))


def apply_edits(original_tokens: Sequence[str], edits: Sequence[Edit]) -> list[str]:
    """Replay an edit script on the original tokens."""
    out: list[str] = []
    pos = 0
    for e in sorted(edits, key=lambda e: e.original_range):
        lo, hi = e.original_range
        out.extend(original_tokens[pos:lo])
        out.extend(e.corrected_tokens)
        pos = hi
    out.extend(original_tokens[pos:])
    return out


# -- LLM change lists ----------------------------------------------------------

_ARROW = re.compile(r"\s*(?:→|->|=>|⟶|➔)\s*")
_BULLET = re.compile(r"^\s*(?:[-*•·]|\d+[.)])\s*")
_QUOTES = "'\"‘’“”`"
_TRAILING_LABEL = re.compile(r"^(.*?)\s*(?:\(([^()]*)\)|[-\u2013\u2014:]\s+([^'\"‘’“”]+))\s*$")


def _strip_quotes(s: str) -> str:
    s = s.strip().strip("*").strip()
    if len(s) >= 2 and s[0] in _QUOTES and s[-1] in _QUOTES:
        return s[1:-1].strip()
    return s


def _split_label(right: str) -> tuple[str, Optional[str]]:
    right = right.strip()
    if right and right[0] in _QUOTES:
        # A quoted fragment: anything after the closing quote is a label.
        close = max(right.rfind(q) for q in _QUOTES)
        if close > 0:
            frag = right[: close + 1]
            rest = right[close + 1:].strip(" \t-\u2013\u2014:")
            rest = rest.strip("()").strip()
            return frag, rest or None
    m = _TRAILING_LABEL.match(right)
    if m and m.group(1):
        label = m.group(2) or m.group(3)
        return m.group(1), label.strip() if label else None
    return right, None


def parse_change_list(llm_output: str) -> ChangeList:
    """Parse lines shaped like ``- 'original' → 'corrected'``.

    Lines without an arrow are skipped and reported; a trailing
    parenthesized note after the corrected fragment is kept as a label.
    """
    items: list[ChangeItem] = []
    skipped: list[str] = []
    for raw in llm_output.splitlines():
        if not raw.strip():
            continue
        line = _BULLET.sub("", raw, count=1)
        parts = _ARROW.split(line, maxsplit=1)
        if len(parts) != 2:
            skipped.append(raw)
            continue
        left, right = parts
        right, label = _split_label(right)
        orig, corr = _strip_quotes(left), _strip_quotes(right)
        if not orig and not corr:
            skipped.append(raw)
            continue
        if squash(orig) == squash(corr):
            continue
        items.append(ChangeItem(orig, corr, raw, label))
    if skipped:
        log.warning("skipped %d malformed change-list line(s)", len(skipped))
    return ChangeList(items, skipped)


def _key(s: str) -> str:
    return squash(s).casefold()


def reconcile(edits: Sequence[Edit], items: Sequence[ChangeItem]) -> Reconciliation:
    """Greedy first-fit pairing of LLM change items with deterministic edits."""
    taken = [False] * len(edits)
    keys = [(_key(e.original_text), _key(e.corrected_text)) for e in edits]
    matched: list[tuple[int, ChangeItem]] = []
    unmatched_items: list[ChangeItem] = []
    for item in items:
        want = (_key(item.original_fragment), _key(item.corrected_fragment))
        for idx, k in enumerate(keys):
            if not taken[idx] and k == want:
                taken[idx] = True
                matched.append((idx, item))
                break
        else:
            unmatched_items.append(item)
    unmatched_edits = [idx for idx, t in enumerate(taken) if not t]
    return Reconciliation(matched, unmatched_edits, unmatched_items)
