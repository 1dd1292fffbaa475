"""Command-line entry point: ``peermirror {profile,generate,evaluate,session}``.

Settings resolve in this order: command-line flags, then ``PEERMIRROR_*``
environment variables, then the ``--config`` JSON file, then built-in
defaults. Exit codes: 0 success, 1 fatal, 2 partial (some records failed).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Optional

from .evaluate import AlignmentError, EvaluationError, ScorerError, load_scorer, render_report, run_experiment
from .llm import MODES, ConfigurationError, FixtureStore, LLMClient, LLMError, OpenAIChatBackend
from .pipeline import DEFAULT_TEMPERATURES, Pipeline, PipelineError
from .session import Event, SessionError, advance, new_session

log = logging.getLogger("peermirror")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class Fatal(Exception):
    pass


@dataclass
class Config:
    model: str = "gpt-4o"
    temperatures: dict = field(default_factory=lambda: dict(DEFAULT_TEMPERATURES))
    max_attempts: int = 3
    tolerance: int = 1
    proxy_k: float = 5.0
    mode: str = "live"
    fixture_path: Optional[str] = None
    scorer: str = "proxy"
    backend: str = "openai"
    references: Optional[str] = None
    jobs: int = 1
    base_url: Optional[str] = None

    def validate(self) -> "Config":
        if self.max_attempts < 1:
            raise Fatal("max_attempts must be >= 1")
        if self.tolerance < 0:
            raise Fatal("tolerance must be >= 0")
        if self.proxy_k <= 0:
            raise Fatal("proxy_k must be > 0")
        if self.jobs < 1:
            raise Fatal("jobs must be >= 1")
        if self.mode not in MODES:
            raise Fatal(f"mode must be one of {MODES}")
        if self.backend not in ("openai", "mock"):
            raise Fatal("backend must be 'openai' or 'mock'")
        unknown = set(self.temperatures) - set(DEFAULT_TEMPERATURES)
        if unknown:
            raise Fatal(f"unknown stages in temperatures: {sorted(unknown)}")
        return self


# (config key, env suffix, flag dest, type)
_SETTINGS = [
    ("model", "MODEL", "model", str),
    ("max_attempts", "MAX_ATTEMPTS", "max_attempts", int),
    ("tolerance", "TOLERANCE", "tolerance", int),
    ("proxy_k", "PROXY_K", "proxy_k", float),
    ("mode", "MODE", "mode", str),
    ("fixture_path", "FIXTURES", "fixtures", str),
    ("scorer", "SCORER", "scorer", str),
    ("backend", "BACKEND", "backend", str),
    ("references", "REFERENCES", "references", str),
    ("jobs", "JOBS", "jobs", int),
    ("base_url", "BASE_URL", "base_url", str),
]


def resolve_config(args: argparse.Namespace, environ=os.environ) -> Config:
    cfg = Config()
    known = {f.name for f in fields(Config)}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text("utf-8"))
        except (OSError, ValueError) as exc:
            raise Fatal(f"cannot read config {args.config}: {exc}") from exc
        bad = set(data) - known
        if bad:
            raise Fatal(f"unknown config keys: {sorted(bad)}")
        for key, value in data.items():
            if key == "temperatures":
                cfg.temperatures.update(value)
            else:
                setattr(cfg, key, value)
    for key, env, dest, typ in _SETTINGS:
        raw = environ.get(f"PEERMIRROR_{env}")
        if raw is not None:
            try:
                setattr(cfg, key, typ(raw))
            except ValueError as exc:
                raise Fatal(f"PEERMIRROR_{env}: {exc}") from exc
        flag = getattr(args, dest, None)
        if flag is not None:
            setattr(cfg, key, flag)
    return cfg.validate()


def build_pipeline(cfg: Config, environ=os.environ) -> Pipeline:
    store = FixtureStore(cfg.fixture_path) if cfg.fixture_path else None
    backend = None
    if cfg.mode != "replay":
        if cfg.backend == "mock":
            from .mock import MockBackend, load_references

            backend = MockBackend(load_references(cfg.references) if cfg.references else None)
        else:
            backend = OpenAIChatBackend(environ.get("PEERMIRROR_API_KEY"), cfg.base_url)
    client = LLMClient(backend, cfg.mode, store)
    return Pipeline(client, model=cfg.model, temperatures=cfg.temperatures,
                    max_attempts=cfg.max_attempts, tolerance=cfg.tolerance)


# -- record I/O ---------------------------------------------------------------


def read_records(path: str, required: Iterable[str] = ("id", "text")) -> tuple[list[dict], list[str]]:
    """Parse a JSONL file. Bad lines are returned as messages rather than raised."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise Fatal(f"cannot read {path}: {exc.strerror or exc}") from exc
    records, problems = [], []
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                problems.append(f"{path}:{lineno}: malformed JSON ({exc.msg})")
                continue
            missing = [k for k in required if not isinstance(rec, dict) or k not in rec]
            if missing:
                problems.append(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
                continue
            records.append(rec)
    return records, problems


def write_records(path: Optional[str], records: Iterable[dict]) -> None:
    text = "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def _map_records(fn: Callable[[dict], dict], records: list[dict], jobs: int):
    """Apply ``fn`` per record; returns (outputs sorted by id, failure messages)."""

    def guarded(rec):
        try:
            return fn(rec), None
        except (PipelineError, LLMError, ValueError) as exc:
            return None, f"{rec['id']}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(guarded, records))
    else:
        results = [guarded(r) for r in records]
    out = sorted((r for r, _ in results if r is not None), key=lambda r: str(r["id"]))
    return out, [e for _, e in results if e]


def _finish(problems: list[str], total_failed: int) -> int:
    for p in problems:
        print(f"error: {p}", file=sys.stderr)
    return EXIT_PARTIAL if total_failed else EXIT_OK


# -- commands -----------------------------------------------------------------


def cmd_profile(args, cfg: Config) -> int:
    records, problems = read_records(args.input)
    pipe = build_pipeline(cfg)

    def one(rec):
        ex = pipe.extract_profile(rec["text"])
        return {
            "id": rec["id"],
            "corrected": ex.corrected,
            "edits": [e.to_dict() for e in ex.edits],
            "profile": ex.profile.to_dict(),
        }

    out, failed = _map_records(one, records, cfg.jobs)
    write_records(args.out, out)
    return _finish(problems + failed, len(problems) + len(failed))


def _load_topics(path: Optional[str]) -> dict[str, str]:
    if not path:
        return {}
    records, problems = read_records(path, required=("id", "text"))
    if problems:
        raise Fatal("; ".join(problems))
    return {str(r["id"]): r["text"] for r in records}


def cmd_generate(args, cfg: Config) -> int:
    records, problems = read_records(args.input)
    topics = _load_topics(args.topics)
    pipe = build_pipeline(cfg)

    def topic_of(rec):
        topic = rec.get("topic")
        if not topic:
            raise ValueError("record has no topic")
        return topics.get(str(topic), topic)

    def proposed(rec):
        result = pipe.generate_mirrored(rec["text"], topic_of(rec))
        return result.to_record(f"{rec['id']}-proposed", rec["id"], "proposed")

    def comparison(rec):
        text = pipe.generate_comparison(rec["text"], topic_of(rec))
        return {"id": f"{rec['id']}-comparison", "source_essay_id": rec["id"],
                "method": "comparison", "text": text}

    out, failed = _map_records(proposed if args.method == "proposed" else comparison, records, cfg.jobs)
    write_records(args.out, out)
    for rec in out:
        if rec.get("accepted") is False:
            log.warning("%s: best attempt outside tolerance", rec["id"])
    return _finish(problems + failed, len(problems) + len(failed))


def cmd_evaluate(args, cfg: Config) -> int:
    users, p1 = read_records(args.user)
    proposed, p2 = read_records(args.proposed)
    comparison, p3 = read_records(args.comparison)
    problems = p1 + p2 + p3
    try:
        scorer = load_scorer(cfg.scorer, cfg.proxy_k)
        report = run_experiment(users, proposed, comparison, scorer, build_pipeline(cfg),
                                jobs=cfg.jobs, extra_tests=args.extra_tests)
        text = render_report(report, args.format)
    except AlignmentError as exc:
        raise Fatal(f"alignment error: {exc}") from exc
    except (ScorerError, EvaluationError, ValueError) as exc:
        raise Fatal(str(exc)) from exc
    if args.report and args.report != "-":
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    problems += [f"skipped {s['id']}: {s['reason']}" for s in report.skipped]
    return _finish(problems, len(problems))


def cmd_session(args, cfg: Config) -> int:
    try:
        lines = Path(args.script).read_text("utf-8").splitlines()
    except OSError as exc:
        raise Fatal(f"cannot read {args.script}: {exc.strerror or exc}") from exc
    session = new_session(args.topic)
    companion = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            event = Event.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise Fatal(f"{args.script}:{lineno}: bad event ({exc})") from exc
        if companion is None and event.step == 4 and event.content.strip() == "@pipeline":
            companion = build_pipeline(cfg)
        try:
            session = advance(session, event, companion)
        except SessionError as exc:
            raise Fatal(f"{args.script}:{lineno}: {exc}") from exc
    write_records(args.transcript, [e.to_dict() for e in session.transcript])
    if not session.completed:
        print(f"error: script ended at step {len(session.transcript)} of 7", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_FATAL)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("settings")
    g.add_argument("--config", help="JSON settings file")
    g.add_argument("--mode", choices=MODES)
    g.add_argument("--fixtures", help="replay/record fixture file (JSONL)")
    g.add_argument("--backend", choices=("openai", "mock"))
    g.add_argument("--references", help="JSONL of {text, corrected} for the mock backend")
    g.add_argument("--model")
    g.add_argument("--base-url", dest="base_url")
    g.add_argument("--jobs", type=int)
    g.add_argument("--max-attempts", dest="max_attempts", type=int)
    g.add_argument("--tolerance", type=int)
    g.add_argument("--proxy-k", dest="proxy_k", type=float)
    g.add_argument("--scorer", help="'proxy' or module:attribute")
    g.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="peermirror", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("profile", parents=[common], help="extract error profiles")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("generate", parents=[common], help="generate companion essays")
    p.add_argument("--method", choices=("proposed", "comparison"), required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--topics", help="JSONL of {id, text} topic records")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="compare both methods against the users")
    p.add_argument("--user", required=True)
    p.add_argument("--proposed", required=True)
    p.add_argument("--comparison", required=True)
    p.add_argument("--report")
    p.add_argument("--format", choices=("json", "csv", "markdown"), default="markdown")
    p.add_argument("--extra-tests", action="store_true", help="add paired and raw-value t-tests")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("session", parents=[common], help="run a scripted seven-step session")
    p.add_argument("--topic", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--transcript")
    p.set_defaults(func=cmd_session)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_FATAL
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except Fatal as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ConfigurationError, LLMError, PipelineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
