from .metrics import Direction, MetricError, MetricValue, aggregate_runs, compute_metric, direction_of, f1_score
from .report import (
    COLUMNS,
    Aggregate,
    ReportError,
    aggregate_all,
    build_report,
    render_markdown,
    report_json,
    significance_tests,
)
from .significance import (
    SignificanceError,
    SignificanceResult,
    TestKind,
    binomial_outperformance_test,
    binomial_tail,
    t_test,
)

__all__ = [
    "Aggregate",
    "COLUMNS",
    "Direction",
    "MetricError",
    "MetricValue",
    "ReportError",
    "SignificanceError",
    "SignificanceResult",
    "TestKind",
    "aggregate_all",
    "aggregate_runs",
    "binomial_outperformance_test",
    "binomial_tail",
    "build_report",
    "compute_metric",
    "direction_of",
    "f1_score",
    "render_markdown",
    "report_json",
    "significance_tests",
    "t_test",
]
