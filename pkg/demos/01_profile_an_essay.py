"""
Profiling a learner essay
=========================

Correct an essay, diff it against the correction, and count the errors
by category. The mock backend stands in for the model; it knows the
hand-made corrections shipped in fixtures/references.jsonl.
"""

import json
from pathlib import Path

from peermirror.llm import LLMClient
from peermirror.mock import MockBackend, load_references
from peermirror.pipeline import Pipeline

fixtures = Path(__file__).resolve().parents[1] / "fixtures"
essay = json.loads((fixtures / "corpus.jsonl").read_text("utf-8").splitlines()[1])
pipe = Pipeline(LLMClient(MockBackend(load_references(fixtures / "references.jsonl"))))

ex = pipe.extract_profile(essay["text"])
print(essay["text"], "\n")

# one line per deterministic edit
for e in ex.edits:
    print(f"{e.kind:10s} {e.original_text!r:>14} -> {e.corrected_text!r:<14} {e.category}")

# the profile is what gets handed to the generator
print("\n", ex.profile.to_dict())
