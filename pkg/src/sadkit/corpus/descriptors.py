"""Static metadata for the ten supported corpora.

``size`` is the published (post-downsampling) sample count. Categorical
corpora whose label inventory is data-driven (FactBank, IEMOCAP) carry a
placeholder class list here; their adapters rebuild it from the training split.
"""

from __future__ import annotations

from .types import CorpusDescriptor, CorpusError, LabelSpec, MetricName, TargetRule, TaskType

BINARY = LabelSpec.categorical(["False", "True"])

GOEMOTIONS_CLASSES = (
    "admiration", "amusement", "anger", "annoyance", "approval", "caring",
    "confusion", "curiosity", "desire", "disappointment", "disapproval",
    "disgust", "embarrassment", "excitement", "fear", "gratitude", "grief",
    "joy", "love", "nervousness", "optimism", "pride", "realization",
    "relief", "remorse", "sadness", "surprise", "neutral",
)

_DATA_DRIVEN = LabelSpec.categorical(["<from-train-split>"])


def _d(name, display, task, spec, gold, canonical, metric, size, rule=TargetRule.SPAN):
    return CorpusDescriptor(
        name=name,
        task_type=task,
        label_spec=spec,
        has_gold_audio=gold,
        has_canonical_split=canonical,
        metric=metric,
        size=size,
        target_rule=rule,
        display_name=display,
    )


DESCRIPTORS: dict[str, CorpusDescriptor] = {
    d.name: d
    for d in (
        _d("boolq", "BoolQ", TaskType.CONTROL, BINARY, False, True, MetricName.ACCURACY, 509),
        _d("wic", "WIC", TaskType.CONTROL, BINARY, False, True, MetricName.ACCURACY, 6066),
        _d("wsc", "WSC", TaskType.CONTROL, BINARY, False, True, MetricName.ACCURACY, 658),
        _d("swbd-s", "SWBD-S", TaskType.SENTIMENT, LabelSpec.continuous(-1, 1), True, False, MetricName.MAE, 2856),
        _d("imdb", "IMDB", TaskType.SENTIMENT, LabelSpec.categorical(["neg", "pos"]), False, True, MetricName.ACCURACY, 372),
        _d("cb-prosody", "CB-Prosody", TaskType.BELIEF, LabelSpec.continuous(-3, 3), True, False, MetricName.MAE, 334,
           TargetRule.LAST_SENTENCE),
        _d("cb", "CB", TaskType.BELIEF, LabelSpec.continuous(-3, 3), False, True, MetricName.MAE, 500,
           TargetRule.LAST_SENTENCE),
        _d("factbank", "FactBank", TaskType.BELIEF, _DATA_DRIVEN, False, True, MetricName.F1, 7540),
        _d("iemocap", "IEMOCAP", TaskType.EMOTION, _DATA_DRIVEN, True, True, MetricName.F1, 7529),
        _d("goemotions", "GoEmotions", TaskType.EMOTION, LabelSpec.categorical(GOEMOTIONS_CLASSES), False, True,
           MetricName.F1, 4753),
    )
}

# Row order of the results table: grouped by task type.
TABLE_ORDER = ("boolq", "wic", "wsc", "swbd-s", "imdb", "cb-prosody", "cb", "factbank", "iemocap", "goemotions")


def get_descriptor(name: str) -> CorpusDescriptor:
    key = name.lower()
    if key not in DESCRIPTORS:
        raise CorpusError(f"unknown corpus {name!r}; known corpora: {', '.join(sorted(DESCRIPTORS))}")
    return DESCRIPTORS[key]
