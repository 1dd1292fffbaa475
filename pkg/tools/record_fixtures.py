"""Regenerate fixtures/replay.jsonl by running every shipped command against the mock backend.

    python3 tools/record_fixtures.py

Afterwards refresh the golden outputs with ``python3 tools/make_golden.py``.
"""

import sys
import tempfile
from pathlib import Path

from peermirror.cli import main

ROOT = Path(__file__).resolve().parents[1]
FIX = ROOT / "fixtures"
STORE = FIX / "replay.jsonl"


def run(*argv):
    code = main([*argv, "--mode", "record", "--backend", "mock",
                 "--references", str(FIX / "references.jsonl"), "--fixtures", str(STORE)])
    if code != 0:
        sys.exit(f"{argv[0]} exited with {code}")


if __name__ == "__main__":
    STORE.unlink(missing_ok=True)
    corpus = str(FIX / "corpus.jsonl")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        run("profile", "--in", corpus, "--out", str(tmp / "profiles.jsonl"))
        run("generate", "--method", "proposed", "--in", corpus, "--out", str(tmp / "proposed.jsonl"))
        run("generate", "--method", "comparison", "--in", corpus, "--out", str(tmp / "comparison.jsonl"))
        run("evaluate", "--user", corpus, "--proposed", str(tmp / "proposed.jsonl"),
            "--comparison", str(tmp / "comparison.jsonl"), "--report", str(tmp / "report.md"))
        run("session", "--topic", "Please introduce your favorite movie.",
            "--script", str(FIX / "session_script.jsonl"), "--transcript", str(tmp / "transcript.jsonl"))
    print(f"wrote {sum(1 for _ in open(STORE))} fixtures to {STORE.relative_to(ROOT)}")
