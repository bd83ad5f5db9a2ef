from .adapters import load_corpus
from .descriptors import DESCRIPTORS, TABLE_ORDER, get_descriptor
from .interchange import read_interchange, write_interchange
from .ops import (
    BudgetError,
    Violation,
    downsample_to_budget,
    make_split_plan,
    select_target_text,
    validate_corpus,
)
from .spans import StubParser, Token, head_to_span
from .types import (
    CorpusDescriptor,
    CorpusError,
    Label,
    LabelKind,
    LabelSpec,
    MetricName,
    Sample,
    SplitPlan,
    SplitStrategy,
    TargetRule,
    TaskType,
)

__all__ = [
    "BudgetError",
    "CorpusDescriptor",
    "CorpusError",
    "DESCRIPTORS",
    "Label",
    "LabelKind",
    "LabelSpec",
    "MetricName",
    "Sample",
    "SplitPlan",
    "SplitStrategy",
    "StubParser",
    "TABLE_ORDER",
    "TargetRule",
    "TaskType",
    "Token",
    "Violation",
    "downsample_to_budget",
    "get_descriptor",
    "head_to_span",
    "load_corpus",
    "make_split_plan",
    "read_interchange",
    "select_target_text",
    "validate_corpus",
    "write_interchange",
]
