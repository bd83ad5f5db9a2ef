"""Results grid: one row per corpus, columns Text / Audio x source / Multimodal x source.

A multimodal cell shows the better of the early- and late-fusion aggregates
for that audio source. Best cells per row are bolded (all tied cells when
several share the best value); derived figures compare each cell with the
text-only baseline.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from ..corpus.descriptors import DESCRIPTORS, TABLE_ORDER
from ..corpus.types import MetricName, TaskType
from ..runs import RunResult
from .metrics import Direction, MetricValue, aggregate_runs
from .significance import SignificanceResult, binomial_outperformance_test, t_test

SOURCES = ("gold", "local", "remote")
TEXT = "text"
COLUMNS = (TEXT,) + tuple(f"audio/{s}" for s in SOURCES) + tuple(f"multimodal/{s}" for s in SOURCES)
MULTIMODAL_MODES = ("early", "late")
DEFAULT_LABELS = {"gold": "Gold", "local": "Local", "remote": "Remote"}

BINOMIAL_MARK = "†"
TTEST_MARK = "*"


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class Aggregate:
    corpus: str
    mode: str
    engine: str
    metric: MetricValue
    n_runs: int = 1


def column_of(mode: str, engine: str) -> str:
    if mode == "text_only":
        return TEXT
    if mode == "audio_only":
        return f"audio/{engine}"
    if mode in MULTIMODAL_MODES:
        return f"multimodal/{engine}"
    raise ReportError(f"unknown mode {mode!r}")


def aggregate_all(runs: Iterable[RunResult]) -> list[Aggregate]:
    groups: dict[tuple, list[RunResult]] = defaultdict(list)
    for r in runs:
        groups[(r.corpus, r.mode, r.engine, r.metric_name)].append(r)
    return [
        Aggregate(corpus, mode, engine, aggregate_runs(group), len(group))
        for (corpus, mode, engine, _), group in sorted(groups.items())
    ]


def _pick_cells(aggregates: Iterable[Aggregate]) -> dict[str, dict[str, Aggregate]]:
    """corpus -> column -> aggregate, keeping the better fusion variant per multimodal column."""
    table: dict[str, dict[str, Aggregate]] = defaultdict(dict)
    for agg in aggregates:
        col = column_of(agg.mode, agg.engine)
        current = table[agg.corpus].get(col)
        if current is None or agg.metric.better_than(current.metric) or (
            agg.metric.value == current.metric.value and agg.mode < current.mode
        ):
            table[agg.corpus][col] = agg
    return table


def _row_order(corpora: Iterable[str]) -> list[str]:
    known = [c for c in TABLE_ORDER if c in corpora]
    return known + sorted(c for c in corpora if c not in TABLE_ORDER)


def _derived(base: float, value: float, metric: MetricName) -> dict:
    if metric is MetricName.MAE:
        return {
            "baseline": base,
            "value": value,
            "percent_decrease": 100.0 * (base - value) / base if base else None,
        }
    return {
        "baseline": base,
        "value": value,
        "point_improvement": value - base,
        "error_decrease_percent": 100.0 * (value - base) / (100.0 - base) if base < 100.0 else None,
    }


def build_report(
    aggregates: Sequence[Aggregate],
    tests: Sequence[SignificanceResult] = (),
    *,
    engine_labels: Optional[Mapping[str, str]] = None,
) -> dict:
    """Assemble the report document (plain JSON-serialisable dict)."""
    labels = {**DEFAULT_LABELS, **(engine_labels or {})}
    table = _pick_cells(aggregates)
    rows = []
    for corpus in _row_order(table):
        cells = table[corpus]
        if TEXT not in cells:
            raise ReportError(f"{corpus}: no text-only baseline to compare against")
        descriptor = DESCRIPTORS.get(corpus)
        metric = cells[TEXT].metric.name
        direction = cells[TEXT].metric.direction
        values = [a.metric.value for a in cells.values()]
        best = min(values) if direction is Direction.LOWER_BETTER else max(values)
        base = cells[TEXT].metric.value
        row_cells = {}
        derived = {}
        for col in COLUMNS:
            agg = cells.get(col)
            if agg is None:
                continue
            markers = [
                TTEST_MARK
                for t in tests
                if t.scope == f"{corpus}:{col}" and t.test.value == "paired_t" and t.significant
            ]
            row_cells[col] = {
                "value": agg.metric.value,
                "mode": agg.mode,
                "n_runs": agg.n_runs,
                "bold": agg.metric.value == best,
                "markers": markers,
            }
            if col != TEXT:
                derived[col] = _derived(base, agg.metric.value, metric)
        rows.append(
            {
                "corpus": corpus,
                "task": descriptor.title if descriptor else corpus,
                "type": descriptor.task_type.value if descriptor else "other",
                "metric": metric.value,
                "direction": direction.value,
                "cells": row_cells,
                "derived": derived,
            }
        )
    column_markers = {
        col: [BINOMIAL_MARK] for col in COLUMNS if any(t.scope == col and t.significant for t in tests)
    }
    return {
        "columns": list(COLUMNS),
        "column_labels": {col: _column_label(col, labels) for col in COLUMNS},
        "column_markers": column_markers,
        "rows": rows,
        "tests": [_test_json(t) for t in tests],
        "claims": _claims(rows, labels),
    }


def _column_label(col: str, labels: Mapping[str, str]) -> str:
    if col == TEXT:
        return "Text"
    kind, source = col.split("/")
    return f"{kind.capitalize()} {labels.get(source, source)}"


def _test_json(t: SignificanceResult) -> dict:
    return {
        "test": t.test.value,
        "statistic": t.statistic if t.statistic == t.statistic else None,
        "p_value": t.p_value,
        "n": t.n,
        "df": t.df,
        "degenerate": t.degenerate,
        "significant": t.significant,
        "scope": t.scope,
        "description": t.description,
    }


def format_value(value: float, metric: str) -> str:
    return f"{value:.3f}" if metric == MetricName.MAE.value else f"{value:.1f}"


def _claims(rows: list[dict], labels: Mapping[str, str]) -> list[str]:
    out = []
    for row in rows:
        for col, d in row["derived"].items():
            if not col.startswith("multimodal/"):
                continue
            name = f"{row['task']} ({_column_label(col, labels)} vs Text)"
            if row["metric"] == MetricName.MAE.value:
                if d["percent_decrease"] is not None:
                    out.append(f"{name}: {d['percent_decrease']:.1f}% decrease in MAE")
            else:
                line = f"{name}: {d['point_improvement']:+.1f} points {row['metric']}"
                if d["error_decrease_percent"] is not None:
                    line += f", {d['error_decrease_percent']:.1f}% {row['metric']} error decrease"
                out.append(line)
    return out


def render_markdown(report: dict) -> str:
    cols = report["columns"]
    head = ["Type", "Task", "Metric"] + [
        report["column_labels"][c] + "".join(report["column_markers"].get(c, [])) for c in cols
    ]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in report["rows"]:
        arrow = "↓" if row["direction"] == Direction.LOWER_BETTER.value else "↑"
        cells = []
        for c in cols:
            cell = row["cells"].get(c)
            if cell is None:
                cells.append("-")
                continue
            text = format_value(cell["value"], row["metric"]) + "".join(cell["markers"])
            cells.append(f"**{text}**" if cell["bold"] else text)
        lines.append("| " + " | ".join([row["type"], row["task"], f"{row['metric']} {arrow}"] + cells) + " |")
    out = ["# Results", "", *lines, ""]
    if report["claims"]:
        out += ["## Derived figures", "", *[f"- {c}" for c in report["claims"]], ""]
    if report["tests"]:
        out += ["## Significance tests", ""]
        for t in report["tests"]:
            p = "degenerate (zero variance)" if t["p_value"] is None else f"p = {t['p_value']:.4g}"
            out.append(f"- {t['test']} [{t['scope']}] {t['description']}: n = {t['n']}, {p}")
        out += ["", f"{BINOMIAL_MARK} binomial test (pi0 = 0.5) p < 0.05 across non-control corpora; "
                    f"{TTEST_MARK} paired t-test vs Text p < 0.05.", ""]
    return "\n".join(out)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# --- significance tests from per-unit runs ------------------------------------

def _unit_values(runs: Iterable[RunResult]) -> dict[tuple[str, str, str], dict[str, float]]:
    out: dict[tuple[str, str, str], dict[str, float]] = defaultdict(dict)
    for r in runs:
        out[(r.corpus, r.mode, r.engine)][r.unit] = r.metric_value
    return out


def _strictly_better(a: float, b: float, metric: MetricName) -> bool:
    return a < b if metric.lower_is_better else a > b


def significance_tests(runs: Sequence[RunResult]) -> list[SignificanceResult]:
    """Binomial outperformance tests per audio column plus per-corpus t-tests."""
    runs = list(runs)
    units = _unit_values(runs)
    table = _pick_cells(aggregate_all(runs))
    metric_of = {r.corpus: MetricName(r.metric_name) for r in runs}
    tests: list[SignificanceResult] = []

    def is_control(corpus: str) -> bool:
        d = DESCRIPTORS.get(corpus)
        return d is not None and d.task_type is TaskType.CONTROL

    def values(corpus: str, col: str) -> Optional[dict[str, float]]:
        agg = table[corpus].get(col)
        return units.get((corpus, agg.mode, agg.engine)) if agg else None

    for col in COLUMNS[1:]:
        for group, members in (("non-control", [c for c in table if not is_control(c)]),
                               ("control", [c for c in table if is_control(c)])):
            k = n = 0
            for corpus in sorted(members):
                base, cand = values(corpus, TEXT), values(corpus, col)
                if not base or not cand:
                    continue
                for unit in sorted(set(base) & set(cand)):
                    n += 1
                    k += _strictly_better(cand[unit], base[unit], metric_of[corpus])
            if n:
                scope = col if group == "non-control" else f"{col}@control"
                tests.append(binomial_outperformance_test(
                    k, n, scope=scope, description=f"{col} beats Text on {k}/{n} {group} runs"))

    for corpus in _row_order(table):
        base = values(corpus, TEXT)
        for col in COLUMNS[1:]:
            cand = values(corpus, col)
            if not base or not cand:
                continue
            shared = sorted(set(base) & set(cand))
            if len(shared) >= 2:
                tests.append(t_test([cand[u] for u in shared], [base[u] for u in shared], "paired",
                                    scope=f"{corpus}:{col}", description=f"{corpus} {col} vs text (paired)"))
        gold = values(corpus, "multimodal/gold")
        for source in ("local", "remote"):
            synth = values(corpus, f"multimodal/{source}")
            if gold and synth and len(gold) >= 2 and len(synth) >= 2:
                tests.append(t_test(list(gold.values()), list(synth.values()), "two_sample",
                                    scope=f"{corpus}:multimodal/gold~multimodal/{source}",
                                    description=f"{corpus} gold vs {source} multimodal (Welch)"))
    return tests
