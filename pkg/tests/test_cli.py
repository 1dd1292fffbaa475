import argparse
import json
import shutil

import pytest

from peermirror.cli import Config, build_parser, main, resolve_config

from conftest import FIXTURES

REPLAY = ["--mode", "replay", "--fixtures", str(FIXTURES / "replay.jsonl")]
CORPUS = str(FIXTURES / "corpus.jsonl")


def lines(path):
    return [json.loads(l) for l in path.read_text("utf-8").splitlines() if l.strip()]


def test_profile_replay(tmp_path):
    out = tmp_path / "p.jsonl"
    assert main(["profile", "--in", CORPUS, "--out", str(out)] + REPLAY) == 0
    recs = lines(out)
    assert [r["id"] for r in recs] == ["u1", "u2", "u3", "u4"]
    assert all(r["profile"]["total"] == len(r["edits"]) for r in recs)


def test_profile_missing_file(tmp_path, capsys):
    assert main(["profile", "--in", str(tmp_path / "nope.jsonl")] + REPLAY) == 1
    assert "cannot read" in capsys.readouterr().err


def test_profile_malformed_line_is_partial(tmp_path, capsys):
    bad = tmp_path / "c.jsonl"
    bad.write_text(FIXTURES.joinpath("corpus.jsonl").read_text("utf-8") + "{oops\n", "utf-8")
    out = tmp_path / "p.jsonl"
    assert main(["profile", "--in", str(bad), "--out", str(out)] + REPLAY) == 2
    assert "c.jsonl:5" in capsys.readouterr().err
    assert len(lines(out)) == 4


def test_replay_miss_is_partial(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"id": "new", "text": "An essay nobody recorded."}) + "\n")
    assert main(["profile", "--in", str(corpus), "--out", str(tmp_path / "o.jsonl")] + REPLAY) == 2
    assert "fixture not found" in capsys.readouterr().err


def test_generate_both_methods(tmp_path):
    prop, comp = tmp_path / "p.jsonl", tmp_path / "c.jsonl"
    assert main(["generate", "--method", "proposed", "--in", CORPUS, "--out", str(prop)] + REPLAY) == 0
    assert main(["generate", "--method", "comparison", "--in", CORPUS, "--out", str(comp)] + REPLAY) == 0
    assert all(r["accepted"] for r in lines(prop))
    assert {r["method"] for r in lines(comp)} == {"comparison"}
    assert [r["source_essay_id"] for r in lines(comp)] == ["u1", "u2", "u3", "u4"]


def test_generate_with_topic_ids(tmp_path):
    topics = tmp_path / "topics.jsonl"
    corpus = tmp_path / "c.jsonl"
    recs = lines(FIXTURES / "corpus.jsonl")
    topics.write_text("".join(json.dumps({"id": f"t{i}", "text": r["topic"]}) + "\n" for i, r in enumerate(recs)))
    corpus.write_text("".join(json.dumps({**r, "topic": f"t{i}"}) + "\n" for i, r in enumerate(recs)))
    out = tmp_path / "o.jsonl"
    args = ["generate", "--method", "comparison", "--in", str(corpus), "--topics", str(topics), "--out", str(out)]
    assert main(args + REPLAY) == 0
    assert len(lines(out)) == 4


def test_generate_unknown_method(capsys):
    assert main(["generate", "--method", "magic", "--in", CORPUS] + REPLAY) == 1
    assert "invalid choice" in capsys.readouterr().err


def test_evaluate_orphans(tmp_path, capsys):
    prop = tmp_path / "p.jsonl"
    prop.write_text(json.dumps({"source_essay_id": "zz", "text": "x"}) + "\n")
    args = ["evaluate", "--user", CORPUS, "--proposed", str(prop), "--comparison", str(prop)]
    assert main(args + REPLAY) == 1
    assert "alignment error" in capsys.readouterr().err


def test_evaluate_markdown_to_stdout(capsys):
    golden = FIXTURES.parent / "tests" / "golden"
    args = ["evaluate", "--user", CORPUS, "--proposed", str(golden / "proposed.jsonl"),
            "--comparison", str(golden / "comparison.jsonl"), "--format", "markdown"]
    assert main(args + REPLAY) == 0
    out = capsys.readouterr().out
    assert out.count("\n## ") >= 5 and "| Measure | t | df | p | Cohen's d |" in out


def test_session_canonical_and_sentinel(tmp_path):
    out = tmp_path / "t.jsonl"
    args = ["session", "--topic", "Please introduce your favorite movie.",
            "--script", str(FIXTURES / "session_script.jsonl"), "--transcript", str(out)]
    assert main(args + REPLAY) == 0
    recs = lines(out)
    assert len(recs) == 7 and recs[3]["metadata"]["achieved_total"] == recs[3]["metadata"]["target_total"]


def test_session_out_of_order(tmp_path, capsys):
    script = tmp_path / "s.jsonl"
    events = lines(FIXTURES / "session_script.jsonl")
    events[2], events[3] = events[3], events[2]
    script.write_text("".join(json.dumps(e) + "\n" for e in events))
    assert main(["session", "--topic", "t", "--script", str(script)] + REPLAY) == 1
    err = capsys.readouterr().err
    assert "expected step 3 from TAA" in err and "received step 4 from LCAA" in err


def test_live_without_key_is_fatal(monkeypatch, capsys):
    monkeypatch.delenv("PEERMIRROR_API_KEY", raising=False)
    assert main(["profile", "--in", CORPUS, "--mode", "live", "--backend", "openai"]) == 1
    assert "PEERMIRROR_API_KEY" in capsys.readouterr().err


def _args(*argv):
    return build_parser().parse_args(["profile", "--in", "x", *argv])


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "from-config", "tolerance": 3, "max_attempts": 5,
                               "temperatures": {"inject_errors": 0.2}}))
    env = {"PEERMIRROR_TOLERANCE": "2", "PEERMIRROR_MAX_ATTEMPTS": "4"}
    c = resolve_config(_args("--config", str(cfg), "--max-attempts", "7"), env)
    assert c.model == "from-config"
    assert c.tolerance == 2
    assert c.max_attempts == 7
    assert c.temperatures["inject_errors"] == 0.2 and c.temperatures["correct"] == 0.0
    assert resolve_config(_args(), {}) == Config()


def test_config_validation(tmp_path):
    with pytest.raises(Exception, match="max_attempts"):
        resolve_config(_args("--max-attempts", "0"), {})
    with pytest.raises(Exception, match="proxy_k"):
        resolve_config(_args("--proxy-k", "0"), {})
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"colour": "blue"}))
    with pytest.raises(Exception, match="unknown config keys"):
        resolve_config(_args("--config", str(bad)), {})


def test_jobs_do_not_change_output(tmp_path):
    one, four = tmp_path / "1.jsonl", tmp_path / "4.jsonl"
    assert main(["profile", "--in", CORPUS, "--out", str(one)] + REPLAY) == 0
    assert main(["profile", "--in", CORPUS, "--out", str(four), "--jobs", "4"] + REPLAY) == 0
    assert one.read_bytes() == four.read_bytes()


def test_record_mode_with_mock(tmp_path):
    store = tmp_path / "rec.jsonl"
    corpus = tmp_path / "c.jsonl"
    shutil.copy(CORPUS, corpus)
    args = ["profile", "--in", str(corpus), "--out", str(tmp_path / "o.jsonl"), "--mode", "record",
            "--backend", "mock", "--references", str(FIXTURES / "references.jsonl"), "--fixtures", str(store)]
    assert main(args) == 0
    n = len(store.read_text().splitlines())
    assert n == 12
    assert main(args) == 0
    assert len(store.read_text().splitlines()) == n
