"""Scoring, statistics and report rendering for the mirroring experiment.

Each source essay yields one :class:`EvalRecord` holding the error count and
quality score of the user's essay and of both generated essays. The report
compares the per-essay absolute differences from the user (proposed method
against comparison method) with a pooled two-sample t-test and Cohen's d.

Sample order for the headline statistics is ``(comparison, proposed)``, so a
positive t or d means the proposed method lands closer to the user.
"""

from __future__ import annotations

import csv
import importlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Optional, Protocol, Sequence

import numpy as np
from scipy import stats

from .text import count_words

log = logging.getLogger(__name__)

CONDITIONS = ("user", "proposed", "comparison")
MEASURES = ("errors", "quality")
FORMATS = ("json", "csv", "markdown")
CSV_COLUMNS = ("table", "row", "column", "value")


class EvaluationError(Exception):
    pass


class DegenerateInput(EvaluationError, ValueError):
    pass


class AlignmentError(EvaluationError):
    def __init__(self, orphans: Mapping[str, list[str]]):
        parts = [f"{where}: {', '.join(ids)}" for where, ids in orphans.items() if ids]
        super().__init__("corpora do not align by source essay id; orphans " + "; ".join(parts))
        self.orphans = dict(orphans)


class ScorerError(EvaluationError):
    pass


# -- scorers ------------------------------------------------------------------


def quality_proxy(error_count: int, word_count: int, k: float = 5.0) -> float:
    """``100 * max(0, 1 - k * errors / words)``. Uncalibrated; only monotone in error density."""
    if word_count < 1:
        raise ValueError("word_count must be >= 1")
    if error_count < 0:
        raise ValueError("error_count must be >= 0")
    if k <= 0:
        raise ValueError("k must be positive")
    return 100.0 * max(0.0, 1.0 - k * error_count / word_count)


class Scorer(Protocol):
    def score(self, text: str, error_count: int) -> float: ...


@dataclass(frozen=True)
class ProxyScorer:
    k: float = 5.0

    def score(self, text: str, error_count: int) -> float:
        return quality_proxy(error_count, count_words(text), self.k)


class _CallableScorer:
    def __init__(self, fn):
        self.fn = fn

    def score(self, text: str, error_count: int) -> float:
        return self.fn(text, error_count)


def load_scorer(name: str, k: float = 5.0) -> Scorer:
    """``"proxy"`` or an external adapter given as ``"package.module:attribute"``.

    The attribute may be a class (instantiated with no arguments), an object
    with a ``score(text, error_count)`` method, or a plain callable of the
    same signature.
    """
    if name == "proxy":
        return ProxyScorer(k)
    mod_name, sep, attr = name.partition(":")
    if not sep or not mod_name or not attr:
        raise ScorerError(f"scorer must be 'proxy' or 'module:attribute', got {name!r}")
    try:
        obj = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ScorerError(f"external scorer {name!r} unavailable: {exc}") from exc
    if isinstance(obj, type):
        obj = obj()
    if hasattr(obj, "score"):
        return obj
    if callable(obj):
        return _CallableScorer(obj)
    raise ScorerError(f"{name!r} is neither a scorer nor a callable")


def measure_essay(text: str, scorer: Scorer, pipeline) -> tuple[int, float]:
    """Error count from the extraction pipeline, quality from ``scorer``."""
    errors = pipeline.extract_profile(text).profile.total
    try:
        quality = float(scorer.score(text, errors))
    except ScorerError:
        raise
    except Exception as exc:
        raise ScorerError(f"scorer failed: {type(exc).__name__}: {exc}") from exc
    if not 0.0 <= quality <= 100.0 or math.isnan(quality):
        raise ScorerError(f"scorer returned {quality}, outside [0, 100]")
    return errors, quality


# -- statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    statistic: Optional[float]
    df: Optional[int]
    p: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TestResult":
        return cls(d.get("statistic"), d.get("df"), d["p"])


def _check_samples(a, b) -> tuple[np.ndarray, np.ndarray, float]:
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or len(x) < 2 or len(y) < 2:
        raise ValueError("each sample needs at least two values")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")
    df = len(x) + len(y) - 2
    pooled = ((len(x) - 1) * x.var(ddof=1) + (len(y) - 1) * y.var(ddof=1)) / df
    if pooled == 0:
        raise DegenerateInput("both samples have zero variance")
    return x, y, pooled


def t_test_two_sample(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Pooled-variance Student t-test, two-sided."""
    x, y, pooled = _check_samples(a, b)
    df = len(x) + len(y) - 2
    se = math.sqrt(pooled * (1.0 / len(x) + 1.0 / len(y)))
    t = float((x.mean() - y.mean()) / se)
    p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    return TestResult(t, df, p)


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    x, y, pooled = _check_samples(a, b)
    return float((x.mean() - y.mean()) / math.sqrt(pooled))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TestResult:
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("paired samples need equal length >= 2")
    diff = x - y
    if diff.var(ddof=1) == 0:
        raise DegenerateInput("paired differences have zero variance")
    res = stats.ttest_rel(x, y)
    return TestResult(float(res.statistic), len(x) - 1, float(res.pvalue))


# -- records and reports ------------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    essay_id: str
    user_errors: int
    proposed_errors: int
    comparison_errors: int
    user_quality: float
    proposed_quality: float
    comparison_quality: float

    def __post_init__(self):
        # Six decimals keeps differences exact through a JSON round trip.
        for name in ("user_quality", "proposed_quality", "comparison_quality"):
            object.__setattr__(self, name, round(float(getattr(self, name)), 6))

    @property
    def abs_error_diff_proposed(self) -> float:
        return abs(self.proposed_errors - self.user_errors)

    @property
    def abs_error_diff_comparison(self) -> float:
        return abs(self.comparison_errors - self.user_errors)

    @property
    def abs_quality_diff_proposed(self) -> float:
        return round(abs(self.proposed_quality - self.user_quality), 6)

    @property
    def abs_quality_diff_comparison(self) -> float:
        return round(abs(self.comparison_quality - self.user_quality), 6)

    def abs_diff(self, measure: str, condition: str) -> float:
        stem = "error" if measure == "errors" else "quality"
        return getattr(self, f"abs_{stem}_diff_{condition}")

    def to_dict(self) -> dict:
        d = asdict(self)
        for m in MEASURES:
            for c in ("proposed", "comparison"):
                stem = "error" if m == "errors" else "quality"
                d[f"abs_{stem}_diff_{c}"] = self.abs_diff(m, c)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalRecord":
        return cls(
            str(d["essay_id"]),
            int(d["user_errors"]), int(d["proposed_errors"]), int(d["comparison_errors"]),
            float(d["user_quality"]), float(d["proposed_quality"]), float(d["comparison_quality"]),
        )


@dataclass
class EvalReport:
    n: int
    means: dict[str, dict[str, float]]
    abs_diff_means: dict[str, dict[str, float]]
    tests: dict[str, Optional[TestResult]]
    effect_sizes: dict[str, Optional[float]]
    records: list[EvalRecord] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    extra_tests: dict[str, Any] = field(default_factory=dict)

    def ratio(self, measure: str) -> Optional[float]:
        d = self.abs_diff_means[measure]
        if not d.get("comparison"):
            return None
        return d["proposed"] / d["comparison"]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "means": self.means,
            "abs_diff_means": self.abs_diff_means,
            "tests": {m: (t.to_dict() if t else None) for m, t in self.tests.items()},
            "effect_sizes": self.effect_sizes,
            "records": [r.to_dict() for r in self.records],
            "skipped": self.skipped,
            "notes": self.notes,
            "extra_tests": self.extra_tests,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(
            n=int(d["n"]),
            means={m: dict(v) for m, v in d["means"].items()},
            abs_diff_means={m: dict(v) for m, v in d["abs_diff_means"].items()},
            tests={m: (TestResult.from_dict(t) if t else None) for m, t in d["tests"].items()},
            effect_sizes=dict(d["effect_sizes"]),
            records=[EvalRecord.from_dict(r) for r in d.get("records", [])],
            skipped=list(d.get("skipped", [])),
            notes=list(d.get("notes", [])),
            extra_tests=dict(d.get("extra_tests", {})),
        )


def _safe(fn, *args, label: str, notes: list[str]):
    try:
        return fn(*args)
    except DegenerateInput as exc:
        notes.append(f"{label}: degenerate input ({exc})")
    except ValueError as exc:
        notes.append(f"{label}: not computed ({exc})")
    return None


def aggregate(records: Iterable[EvalRecord], skipped: Sequence[dict] = (), extra: bool = False) -> EvalReport:
    """Build the report from records; the result does not depend on record order."""
    records = sorted(records, key=lambda r: r.essay_id)
    n = len(records)
    notes: list[str] = []
    means = {
        "errors": {c: float(np.mean([getattr(r, f"{c}_errors") for r in records])) if n else math.nan
                   for c in CONDITIONS},
        "quality": {c: float(np.mean([getattr(r, f"{c}_quality") for r in records])) if n else math.nan
                    for c in CONDITIONS},
    }
    diffs = {m: {c: [r.abs_diff(m, c) for r in records] for c in ("proposed", "comparison")}
             for m in MEASURES}
    abs_means = {m: {c: float(np.mean(v)) if n else math.nan for c, v in diffs[m].items()}
                 for m in MEASURES}
    tests: dict[str, Optional[TestResult]] = {}
    effects: dict[str, Optional[float]] = {}
    for m in MEASURES:
        a, b = diffs[m]["comparison"], diffs[m]["proposed"]
        tests[m] = _safe(t_test_two_sample, a, b, label=f"{m} t-test", notes=notes)
        effects[m] = _safe(cohens_d, a, b, label=f"{m} Cohen's d", notes=notes)

    extra_tests: dict[str, Any] = {}
    if extra:
        extra_tests["paired_abs_diff"] = {}
        extra_tests["raw_values"] = {}
        for m in MEASURES:
            a, b = diffs[m]["comparison"], diffs[m]["proposed"]
            res = _safe(paired_t_test, a, b, label=f"{m} paired t-test", notes=notes)
            extra_tests["paired_abs_diff"][m] = res.to_dict() if res else None
            key = "errors" if m == "errors" else "quality"
            user = [getattr(r, f"user_{key}") for r in records]
            raw = {}
            for c in ("proposed", "comparison"):
                vals = [getattr(r, f"{c}_{key}") for r in records]
                res = _safe(t_test_two_sample, vals, user, label=f"{m} raw {c} vs user", notes=notes)
                raw[f"{c}_vs_user"] = res.to_dict() if res else None
            extra_tests["raw_values"][m] = raw

    return EvalReport(n, means, abs_means, tests, effects, list(records),
                      [dict(s) for s in sorted(skipped, key=lambda s: s["id"])], notes, extra_tests)


def _source_id(rec: Mapping) -> str:
    return str(rec.get("source_essay_id", rec.get("id")))


def _index(rows: Iterable[Mapping], key, where: str) -> dict[str, Mapping]:
    out: dict[str, Mapping] = {}
    for row in rows:
        k = key(row)
        if k in out:
            raise EvaluationError(f"duplicate id {k!r} in {where}")
        out[k] = row
    return out


def run_experiment(
    user_corpus: Iterable[Mapping],
    proposed_outputs: Iterable[Mapping],
    comparison_outputs: Iterable[Mapping],
    scorer: Scorer,
    pipeline,
    jobs: int = 1,
    extra_tests: bool = False,
) -> EvalReport:
    users = _index(user_corpus, lambda r: str(r["id"]), "user corpus")
    proposed = _index(proposed_outputs, _source_id, "proposed outputs")
    comparison = _index(comparison_outputs, _source_id, "comparison outputs")
    every = set(users) | set(proposed) | set(comparison)
    orphans = {
        "user": sorted(every - set(users)),
        "proposed": sorted(every - set(proposed)),
        "comparison": sorted(every - set(comparison)),
    }
    if any(orphans.values()):
        raise AlignmentError({f"missing from {k}": v for k, v in orphans.items()})

    def one(essay_id: str):
        try:
            values = [measure_essay(src[essay_id]["text"], scorer, pipeline)
                      for src in (users, proposed, comparison)]
        except ScorerError as exc:
            return essay_id, None, str(exc)
        (ue, uq), (pe, pq), (ce, cq) = values
        return essay_id, EvalRecord(essay_id, ue, pe, ce, uq, pq, cq), None

    ids = sorted(every)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, ids))
    else:
        results = [one(i) for i in ids]

    records, skipped = [], []
    for essay_id, rec, err in results:
        if rec is None:
            log.warning("skipping %s: %s", essay_id, err)
            skipped.append({"id": essay_id, "reason": err})
        else:
            records.append(rec)
    return aggregate(records, skipped, extra=extra_tests)


def published_aggregates_report() -> EvalReport:
    """The published aggregates as a report (p-values and d only; no statistic or df)."""
    return EvalReport(
        n=32,
        means={
            "errors": {"user": 6.34, "proposed": 6.16, "comparison": 0.47},
            "quality": {"user": 60.06, "proposed": 69.19, "comparison": 90.28},
        },
        abs_diff_means={
            "errors": {"proposed": 2.06, "comparison": 5.94},
            "quality": {"proposed": 11.94, "comparison": 30.22},
        },
        tests={"errors": TestResult(None, None, 3.002e-8), "quality": TestResult(None, None, 1.731e-10)},
        effect_sizes={"errors": 3.70, "quality": 2.91},
        notes=["published aggregates; per-essay records unavailable"],
    )


# -- rendering ----------------------------------------------------------------


def _round(x):
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return None
        return float(f"{x:.10g}")
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_round(v) for v in x]
    return x


def _fmt(x) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return f"{x:.4g}" if (x != 0 and (abs(x) < 1e-3 or abs(x) >= 1e6)) else f"{x:.2f}"
    return str(x)


def comparison_statement(report: EvalReport, measure: str) -> str:
    d = report.abs_diff_means[measure]
    ratio = report.ratio(measure)
    label = "Errors" if measure == "errors" else "Quality"
    head = (f"{label}: mean absolute difference from the user is {_fmt(d['proposed'])} "
            f"for the proposed method and {_fmt(d['comparison'])} for the comparison method")
    if ratio is None:
        return head + " (ratio undefined)."
    verdict = "less than half" if ratio < 0.5 else "not less than half"
    return f"{head}; the proposed difference is {verdict} the comparison difference (ratio {ratio:.3f})."


def _table(header: Sequence[str], rows: Iterable[Sequence]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(_fmt(c) if not isinstance(c, str) else c for c in row) + " |" for row in rows]
    return lines


def _tables(report: EvalReport) -> list[tuple[str, list[str], list[list]]]:
    names = {"user": "User", "proposed": "Proposed", "comparison": "Comparison"}
    out = [
        ("Mean errors", ["Condition", "Errors"],
         [[names[c], report.means["errors"][c]] for c in CONDITIONS]),
        ("Mean quality", ["Condition", "Quality"],
         [[names[c], report.means["quality"][c]] for c in CONDITIONS]),
        ("Mean absolute difference from user", ["Measure", "Proposed", "Comparison", "Ratio"],
         [[m.capitalize(), report.abs_diff_means[m]["proposed"], report.abs_diff_means[m]["comparison"],
           report.ratio(m)] for m in MEASURES]),
    ]
    rows = []
    for m in MEASURES:
        t = report.tests.get(m)
        rows.append([m.capitalize(), t.statistic if t else None, t.df if t else None,
                     t.p if t else None, report.effect_sizes.get(m)])
    out.append(("Tests and effect sizes", ["Measure", "t", "df", "p", "Cohen's d"], rows))
    return out


def render_report(report: EvalReport, format: str = "markdown") -> str:
    if format not in FORMATS:
        raise ValueError(f"unknown report format {format!r}; expected one of {FORMATS}")
    if report.n < 2:
        raise ValueError(f"report has n={report.n}; at least 2 records are needed")
    if format == "json":
        return json.dumps(_round(report.to_dict()), indent=2, ensure_ascii=False) + "\n"

    tables = _tables(report)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerow(["summary", "n", "", report.n])
        for title, header, rows in tables:
            for row in rows:
                for col, val in zip(header[1:], row[1:]):
                    w.writerow([title, row[0], col, "" if val is None else _round(val)])
        return buf.getvalue()

    lines = ["# Mirroring evaluation", "", f"Essays compared: {report.n}", ""]
    for title, header, rows in tables:
        lines += [f"## {title}", ""] + _table(header, rows) + [""]
    lines += ["## Summary", ""]
    lines += [f"- {comparison_statement(report, m)}" for m in MEASURES]
    if report.skipped:
        lines += ["", "## Skipped", ""] + [f"- {s['id']}: {s['reason']}" for s in report.skipped]
    if report.notes:
        lines += ["", "## Notes", ""] + [f"- {n}" for n in report.notes]
    return "\n".join(lines) + "\n"
