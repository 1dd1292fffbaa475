"""Replay the shipped corpus through every command, fully offline."""

from __future__ import annotations

from pathlib import Path

from .cli import main

OUTPUTS = (
    "profiles.jsonl",
    "proposed.jsonl",
    "comparison.jsonl",
    "report.md",
    "report.json",
    "report.csv",
    "transcript.jsonl",
)


def run_replay(fixtures: Path | str, out: Path | str) -> list[str]:
    fixtures, out = Path(fixtures), Path(out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = str(fixtures / "corpus.jsonl")
    common = ["--mode", "replay", "--fixtures", str(fixtures / "replay.jsonl")]
    steps = [
        ["profile", "--in", corpus, "--out", str(out / "profiles.jsonl")],
        ["generate", "--method", "proposed", "--in", corpus, "--out", str(out / "proposed.jsonl")],
        ["generate", "--method", "comparison", "--in", corpus, "--out", str(out / "comparison.jsonl")],
    ]
    for fmt, ext in (("markdown", "md"), ("json", "json"), ("csv", "csv")):
        steps.append(["evaluate", "--user", corpus, "--proposed", str(out / "proposed.jsonl"),
                      "--comparison", str(out / "comparison.jsonl"),
                      "--format", fmt, "--report", str(out / f"report.{ext}")])
    steps.append(["session", "--topic", "Please introduce your favorite movie.",
                  "--script", str(fixtures / "session_script.jsonl"),
                  "--transcript", str(out / "transcript.jsonl")])
    for argv in steps:
        code = main(argv + common)
        if code != 0:
            raise RuntimeError(f"{argv[0]} exited with {code}")
    return list(OUTPUTS)
