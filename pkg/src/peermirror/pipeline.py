"""The mirrored-essay method and the imitate-the-user baseline.

The proposed method runs four model calls in sequence (correct the learner's
essay, list the changes, categorize and count them, then inject the same
errors into a fresh essay) and wraps the last one in a verify-and-retry loop.
Counts always come from the deterministic diff; the model's own count list is
kept only for audit.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterator, Mapping, Optional

from .edits import ChangeItem, Edit, Reconciliation, extract_edits, parse_change_list, reconcile
from .llm import CompletionRequest, LLMClient, LLMError
from .taxonomy import CountParse, ErrorProfile, parse_error_counts, profile_from_edits, render_profile
from .text import count_sentences, count_words, normalize, tokenize

log = logging.getLogger(__name__)

STAGES = ("correct", "list_changes", "count_errors", "draft", "inject_errors", "comparison")

DEFAULT_TEMPERATURES = {
    "correct": 0.0,
    "list_changes": 0.0,
    "count_errors": 0.0,
    "draft": 0.7,
    "inject_errors": 0.7,
    "comparison": 0.7,
}


class PipelineError(Exception):
    pass


class StageError(PipelineError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def load_prompts() -> dict[str, str]:
    root = resources.files("peermirror").joinpath("prompts")
    return {stage: root.joinpath(f"{stage}.txt").read_text("utf-8").rstrip("\n") for stage in STAGES}


@dataclass
class GenerationSpec:
    topic: str
    target_profile: ErrorProfile = field(default_factory=ErrorProfile)
    min_sentences: int = 6
    max_sentences: int = 10
    min_words: int = 70
    max_words: int = 130
    method: str = "proposed"

    def __post_init__(self):
        if self.min_sentences > self.max_sentences or self.min_words > self.max_words:
            raise ValueError("length range has min > max")
        if self.method not in ("proposed", "comparison"):
            raise ValueError(f"unknown method {self.method!r}")

    def length_flags(self, text: str) -> list[str]:
        flags = []
        n_sent, n_words = count_sentences(text), count_words(text)
        if not self.min_sentences <= n_sent <= self.max_sentences:
            flags.append(f"sentences={n_sent} outside {self.min_sentences}-{self.max_sentences}")
        if not self.min_words <= n_words <= self.max_words:
            flags.append(f"words={n_words} outside {self.min_words}-{self.max_words}")
        return flags


@dataclass
class ProfileAudit:
    profile: ErrorProfile
    edits: list[Edit]
    declared: CountParse
    reconciliation: Reconciliation

    @property
    def notes(self) -> list[str]:
        notes = list(self.declared.problems)
        if self.declared.profile.total != self.profile.total:
            notes.append(f"model counted {self.declared.profile.total}, diff has {self.profile.total}")
        return notes


@dataclass
class Extraction:
    text: str
    corrected: str
    edits: list[Edit]
    items: list[ChangeItem]
    profile: ErrorProfile
    audit: ProfileAudit

    def __iter__(self) -> Iterator:
        return iter((self.corrected, self.edits, self.profile))


@dataclass
class Attempt:
    text: Optional[str]
    achieved_total: Optional[int]
    achieved_profile: Optional[ErrorProfile] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"text": self.text, "achieved_total": self.achieved_total}
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class GenerationResult:
    text: str
    target_profile: ErrorProfile
    achieved_profile: ErrorProfile
    attempts: list[Attempt]
    accepted: bool
    audit: dict = field(default_factory=dict)

    def to_record(self, id: str, source_essay_id: str, method: str = "proposed") -> dict:
        return {
            "id": id,
            "source_essay_id": source_essay_id,
            "method": method,
            "text": self.text,
            "target_profile": self.target_profile.to_dict(),
            "achieved_profile": self.achieved_profile.to_dict(),
            "attempts": [a.to_dict() for a in self.attempts],
            "accepted": self.accepted,
        }


def best_attempt(attempts: list[Attempt], target_total: int) -> Optional[Attempt]:
    """Closest achieved total to the target; the earliest wins a tie."""
    done = [a for a in attempts if a.achieved_total is not None]
    if not done:
        return None
    return min(done, key=lambda a: abs(a.achieved_total - target_total))


_FENCE = re.compile(r"^```[\w-]*\n(.*?)\n```$", re.S)


def _clean(text: str) -> str:
    text = text.strip()
    m = _FENCE.match(text)
    return m.group(1).strip() if m else text


def _require(text: str, what: str) -> None:
    if not text or not text.strip():
        raise ValueError(f"{what} must be non-empty")


@dataclass
class Pipeline:
    client: LLMClient
    model: str = "gpt-4o"
    temperatures: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_TEMPERATURES))
    max_attempts: int = 3
    tolerance: int = 1
    max_output_tokens: int = 1024
    prompts: Mapping[str, str] = field(default_factory=load_prompts)

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")

    def request(self, stage: str, **fields: str) -> CompletionRequest:
        prompt = self.prompts[stage].format_map(fields)
        return CompletionRequest.user(
            self.model,
            prompt,
            temperature=self.temperatures.get(stage, DEFAULT_TEMPERATURES[stage]),
            max_output_tokens=self.max_output_tokens,
        )

    def _ask(self, stage: str, **fields) -> str:
        try:
            return _clean(self.client.complete(self.request(stage, **fields)))
        except LLMError as exc:
            raise StageError(stage, str(exc)) from exc

    # -- analysis steps ---------------------------------------------------------

    def correct_essay(self, text: str) -> str:
        _require(text, "essay")
        out = self._ask("correct", essay=normalize(text).strip())
        if not out:
            raise StageError("correct", "model returned an empty correction")
        return out

    def list_changes(self, original: str, corrected: str) -> list[ChangeItem]:
        return self._list_changes(original, corrected).items

    def _list_changes(self, original: str, corrected: str):
        _require(original, "original essay")
        _require(corrected, "corrected essay")
        raw = self._ask("list_changes", original=normalize(original).strip(),
                        corrected=normalize(corrected).strip())
        parsed = parse_change_list(raw)
        for line in parsed.skipped:
            log.debug("change list: skipped %r", line)
        return parsed

    def profile_errors(
        self,
        original: str,
        corrected: str,
        items: list[ChangeItem],
        edits: Optional[list[Edit]] = None,
    ) -> ProfileAudit:
        changes = "\n".join(item.raw_line for item in items)
        raw = self._ask("count_errors", original=normalize(original).strip(),
                        corrected=normalize(corrected).strip(), changes=changes)
        declared = parse_error_counts(raw)
        if edits is None:
            edits = extract_edits(original, corrected)
        rec = reconcile(edits, items)
        context = [t.surface for t in tokenize(original)]
        profile, labelled = profile_from_edits(edits, rec.hints(), context)
        audit = ProfileAudit(profile, labelled, declared, rec)
        for note in audit.notes:
            log.info("profile audit: %s", note)
        return audit

    def extract_profile(self, text: str) -> Extraction:
        _require(text, "essay")
        text = normalize(text).strip()
        corrected = self.correct_essay(text)
        edits = extract_edits(text, corrected)
        items = self.list_changes(text, corrected)
        audit = self.profile_errors(text, corrected, items, edits)
        return Extraction(text, corrected, audit.edits, items, audit.profile, audit)

    # -- generation steps -------------------------------------------------------

    def draft_clean_essay(self, topic: str, spec: Optional[GenerationSpec] = None) -> str:
        spec = spec or GenerationSpec(topic)
        out = self._ask(
            "draft", topic=topic.strip(),
            min_sentences=spec.min_sentences, max_sentences=spec.max_sentences,
            min_words=spec.min_words, max_words=spec.max_words,
        )
        if not out:
            raise StageError("draft", "model returned an empty draft")
        for flag in spec.length_flags(out):
            log.info("draft length: %s", flag)
        return out

    def inject_errors(self, clean_essay: str, profile: ErrorProfile) -> str:
        rendered = render_profile(profile)
        out = self._ask("inject_errors", essay=normalize(clean_essay).strip(), profile=rendered)
        if not out:
            raise StageError("inject_errors", "model returned an empty essay")
        scaffold = [ln for ln in rendered.splitlines()]
        if re.search(r"total corrections\s*:", out, re.I) or any(ln in out for ln in scaffold) \
                or re.search(r"^\s*#", out, re.M):
            raise StageError("inject_errors", "output contains list or header scaffolding")
        return out

    def verify_injection(
        self, text: str, target_profile: ErrorProfile, tolerance: Optional[int] = None
    ) -> tuple[ErrorProfile, bool]:
        tol = self.tolerance if tolerance is None else tolerance
        achieved = self.extract_profile(text).profile
        return achieved, abs(achieved.total - target_profile.total) <= tol

    def generate_mirrored(
        self, user_essay: str, topic: str, spec: Optional[GenerationSpec] = None
    ) -> GenerationResult:
        _require(user_essay, "user essay")
        source = self.extract_profile(user_essay)
        target = source.profile
        spec = spec or GenerationSpec(topic)
        spec.target_profile = target
        draft = self.draft_clean_essay(topic, spec)

        attempts: list[Attempt] = []
        for k in range(self.max_attempts):
            try:
                text = self.inject_errors(draft, target)
                achieved, ok = self.verify_injection(text, target)
            except PipelineError as exc:
                log.warning("attempt %d failed: %s", k + 1, exc)
                attempts.append(Attempt(None, None, error=str(exc)))
                continue
            attempts.append(Attempt(text, achieved.total, achieved))
            if ok:
                break

        best = best_attempt(attempts, target.total)
        if best is None:
            raise PipelineError(f"all {len(attempts)} injection attempts failed")
        accepted = abs(best.achieved_total - target.total) <= self.tolerance
        audit = {
            "draft": draft,
            "draft_flags": spec.length_flags(draft),
            "category_delta": target.delta(best.achieved_profile),
            "source_notes": source.audit.notes,
        }
        return GenerationResult(best.text, target, best.achieved_profile, attempts, accepted, audit)

    def generate_comparison(self, user_essay: str, topic: str) -> str:
        _require(user_essay, "user essay")
        out = self._ask("comparison", topic=topic.strip(), essay=normalize(user_essay).strip())
        if not out:
            raise StageError("comparison", "model returned an empty essay")
        return out
