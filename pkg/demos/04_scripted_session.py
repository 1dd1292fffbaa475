"""
A scripted peer-learning session
================================

Drive the seven-step turn order from a script. Step 4 asks the pipeline
to write the companion's answer from the learner's step-2 answer.
"""

from pathlib import Path

from peermirror.llm import FixtureStore, LLMClient
from peermirror.mock import strip_markers
from peermirror.pipeline import Pipeline
from peermirror.session import ProtocolViolation, advance, new_session, read_script

fixtures = Path(__file__).resolve().parents[1] / "fixtures"
events = read_script((fixtures / "session_script.jsonl").read_text("utf-8").splitlines())

# replay mode: every model answer comes from the recorded fixtures
companion = Pipeline(LLMClient(None, "replay", FixtureStore(fixtures / "replay.jsonl")))

session = new_session("Please introduce your favorite movie.")
for ev in events:
    session = advance(session, ev, companion)

for entry in session.transcript:
    print(f"{entry.step} {entry.role:5s} {strip_markers(entry.content)[:70]}")
print(session.transcript[3].metadata)

# out of turn
try:
    advance(new_session("t"), events[1])
except ProtocolViolation as exc:
    print(exc)
