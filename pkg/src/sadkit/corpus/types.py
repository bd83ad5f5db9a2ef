"""Unified sample model shared by every corpus adapter."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence


class CorpusError(Exception):
    """Raised when a corpus cannot be loaded or violates its declared contract."""


class LabelKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class TaskType(str, enum.Enum):
    CONTROL = "control"
    SENTIMENT = "sentiment"
    BELIEF = "belief"
    EMOTION = "emotion"


class MetricName(str, enum.Enum):
    MAE = "MAE"
    ACCURACY = "Accuracy"
    F1 = "F1"

    @property
    def lower_is_better(self) -> bool:
        return self is MetricName.MAE


class TargetRule(str, enum.Enum):
    """How the text handed to TTS and the encoders is chosen from a sample."""

    SPAN = "span"  # target_span when present, else full text
    LAST_SENTENCE = "last_sentence"  # drop the distribution-provided context prefix


@dataclass(frozen=True)
class LabelSpec:
    kind: LabelKind
    range: Optional[tuple[float, float]] = None
    classes: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.kind is LabelKind.CONTINUOUS:
            if self.range is None or self.classes is not None:
                raise ValueError("continuous LabelSpec needs a range and no classes")
            lo, hi = self.range
            if not lo <= hi:
                raise ValueError(f"empty label range {self.range}")
        else:
            if not self.classes or self.range is not None:
                raise ValueError("categorical LabelSpec needs nonempty classes and no range")

    @classmethod
    def continuous(cls, lo: float, hi: float) -> "LabelSpec":
        return cls(LabelKind.CONTINUOUS, range=(float(lo), float(hi)))

    @classmethod
    def categorical(cls, classes: Sequence[str]) -> "LabelSpec":
        return cls(LabelKind.CATEGORICAL, classes=tuple(classes))

    @property
    def num_classes(self) -> int:
        return len(self.classes) if self.classes else 0

    def class_id(self, name: str) -> int:
        assert self.classes is not None
        try:
            return self.classes.index(name)
        except ValueError:
            raise CorpusError(f"unknown class {name!r}; expected one of {list(self.classes)}") from None

    def admits(self, label: "Label") -> bool:
        if self.kind is LabelKind.CONTINUOUS:
            if label.value is None:
                return False
            lo, hi = self.range  # type: ignore[misc]
            return lo <= label.value <= hi
        return label.class_id is not None and 0 <= label.class_id < self.num_classes

    def describe(self) -> str:
        if self.kind is LabelKind.CONTINUOUS:
            lo, hi = self.range  # type: ignore[misc]
            return f"[{lo:g}, {hi:g}]"
        return "{" + ", ".join(self.classes or ()) + "}"


@dataclass(frozen=True)
class Label:
    """Exactly one of ``value`` (continuous) or ``class_id`` (categorical) is set."""

    value: Optional[float] = None
    class_id: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.value is None) == (self.class_id is None):
            raise ValueError("Label needs exactly one of value / class_id")

    @classmethod
    def continuous(cls, value: float) -> "Label":
        return cls(value=float(value))

    @classmethod
    def categorical(cls, class_id: int) -> "Label":
        return cls(class_id=int(class_id))

    @property
    def kind(self) -> LabelKind:
        return LabelKind.CONTINUOUS if self.value is not None else LabelKind.CATEGORICAL

    def as_number(self) -> float:
        return float(self.value) if self.value is not None else float(self.class_id)  # type: ignore[arg-type]


@dataclass(frozen=True)
class Sample:
    id: str
    text: str
    label: Label
    context: Optional[str] = None
    target_span: Optional[tuple[int, int]] = None
    gold_audio: Optional[str] = None
    annotator_values: Optional[tuple[float, ...]] = None
    # Split name from the distribution (train/dev/test); None for corpora without one.
    split: Optional[str] = None


@dataclass(frozen=True)
class CorpusDescriptor:
    name: str
    task_type: TaskType
    label_spec: LabelSpec
    has_gold_audio: bool
    has_canonical_split: bool
    metric: MetricName
    size: int
    target_rule: TargetRule = TargetRule.SPAN
    display_name: str = ""

    @property
    def title(self) -> str:
        return self.display_name or self.name


class SplitStrategy(str, enum.Enum):
    CANONICAL_SEEDS = "canonical_seeds"
    KFOLD = "kfold"


DEFAULT_SEEDS = (42, 0, 1)
DEFAULT_FOLDS = 5


@dataclass(frozen=True)
class SplitPlan:
    strategy: SplitStrategy
    seeds: tuple[int, ...] = ()
    n_folds: int = 0
    # sample id -> fold index, for kfold plans
    assignment: dict[str, int] = field(default_factory=dict)

    def units(self) -> list[str]:
        if self.strategy is SplitStrategy.CANONICAL_SEEDS:
            return [f"seed{s}" for s in self.seeds]
        return [f"fold{k}" for k in range(self.n_folds)]

    def fold_members(self, k: int) -> list[str]:
        return [sid for sid, fold in self.assignment.items() if fold == k]
