"""The seven-step peer-learning turn order as a scripted state machine.

Steps and speakers::

    1 TAA   assigns the question        5 TAA  tells the user to check the companion
    2 USER  answers                     6 USER corrects the companion's answer
    3 TAA   gives feedback or a hint    7 TAA  wraps up the discussion
    4 LCAA  (the companion) answers

Events are ``(step, role, content)``. A step-4 event whose content is
:data:`PIPELINE_SENTINEL` asks the session to write the companion's answer with
the mirrored-essay pipeline, using the step-2 answer as the learner sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Iterable, Optional

if TYPE_CHECKING:
    from .pipeline import Pipeline

PIPELINE_SENTINEL = "@pipeline"


class SessionStep(IntEnum):
    TAA_ASSIGNS = 1
    USER_ANSWERS = 2
    TAA_FEEDBACK = 3
    LCAA_ANSWERS = 4
    TAA_INSTRUCTS = 5
    USER_CORRECTS_LCAA = 6
    TAA_CONCLUDES = 7

    @property
    def role(self) -> str:
        return self.name.split("_", 1)[0]


ROLES = ("TAA", "USER", "LCAA")


class SessionError(Exception):
    pass


class ProtocolViolation(SessionError):
    def __init__(self, expected: tuple[int, str], received: tuple[int, str]):
        super().__init__(
            f"protocol violation at step {expected[0]}: expected step {expected[0]} from "
            f"{expected[1]}, received step {received[0]} from {received[1]}"
        )
        self.expected = expected
        self.received = received


@dataclass(frozen=True)
class Event:
    step: int
    role: str
    content: str

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        return cls(int(d["step"]), str(d["role"]).upper(), d.get("content", ""))


@dataclass(frozen=True)
class Entry:
    step: int
    role: str
    content: str
    metadata: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        d = {"step": self.step, "role": self.role, "content": self.content}
        if self.metadata:
            d["metadata"] = self.metadata
        return d


@dataclass(frozen=True)
class Session:
    topic: str
    transcript: tuple[Entry, ...] = ()

    @property
    def completed(self) -> bool:
        return len(self.transcript) == len(SessionStep)

    @property
    def current_step(self) -> Optional[SessionStep]:
        return None if self.completed else SessionStep(len(self.transcript) + 1)

    def answer(self, step: int) -> Optional[str]:
        for e in self.transcript:
            if e.step == step:
                return e.content
        return None


def new_session(topic: str) -> Session:
    if not topic or not topic.strip():
        raise ValueError("a session needs a non-empty topic")
    return Session(topic.strip())


def advance(session: Session, event: Event, companion: Optional["Pipeline"] = None) -> Session:
    """Return a new session with ``event`` appended; the input session is untouched."""
    step = session.current_step
    if step is None:
        raise SessionError("session already completed")
    if (event.step, event.role) != (int(step), step.role):
        raise ProtocolViolation((int(step), step.role), (event.step, event.role))

    content, metadata = event.content, {}
    if step is SessionStep.LCAA_ANSWERS and content.strip() == PIPELINE_SENTINEL:
        if companion is None:
            raise SessionError("step 4 asks for the pipeline but no companion is configured")
        result = companion.generate_mirrored(session.answer(2) or "", session.topic)
        content = result.text
        metadata = {
            "target_total": result.target_profile.total,
            "achieved_total": result.achieved_profile.total,
            "accepted": result.accepted,
        }
    entry = Entry(int(step), step.role, content, metadata)
    return Session(session.topic, session.transcript + (entry,))


def run_script(topic: str, events: Iterable[Event], companion: Optional["Pipeline"] = None) -> Session:
    session = new_session(topic)
    for event in events:
        session = advance(session, event, companion)
    return session


def read_script(lines: Iterable[str]) -> list[Event]:
    return [Event.from_dict(json.loads(line)) for line in lines if line.strip()]
