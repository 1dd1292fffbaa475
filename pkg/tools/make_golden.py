"""Rebuild tests/golden from the replay fixtures (no backend, no network)."""

from pathlib import Path

from peermirror.e2e import run_replay

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    out = ROOT / "tests" / "golden"
    for name in run_replay(ROOT / "fixtures", out):
        print(f"wrote tests/golden/{name}")
