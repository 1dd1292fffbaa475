"""
Mirrored essay versus plain imitation
=====================================

Generate a companion essay two ways for the same learner: by injecting
the learner's own error profile into a clean draft, and by asking the
model to imitate the learner. Then count the errors in each.
"""

import json
from pathlib import Path

from peermirror.llm import LLMClient
from peermirror.mock import MockBackend, load_references, strip_markers
from peermirror.pipeline import Pipeline

fixtures = Path(__file__).resolve().parents[1] / "fixtures"
corpus = [json.loads(l) for l in (fixtures / "corpus.jsonl").read_text("utf-8").splitlines()]
pipe = Pipeline(LLMClient(MockBackend(load_references(fixtures / "references.jsonl"))))

for rec in corpus:
    mirrored = pipe.generate_mirrored(rec["text"], rec["topic"])
    imitation = pipe.generate_comparison(rec["text"], rec["topic"])
    n_imitation = pipe.extract_profile(imitation).profile.total
    print(f"{rec['id']}: user {mirrored.target_profile.total:2d} | "
          f"mirrored {mirrored.achieved_profile.total:2d} "
          f"({len(mirrored.attempts)} attempt) | imitation {n_imitation:2d}")

# the mock marks planted errors with invisible tag characters; strip them to read
print("\n" + strip_markers(mirrored.text))
