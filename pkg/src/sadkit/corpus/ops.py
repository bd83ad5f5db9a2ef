from __future__ import annotations

import os
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .types import (
    DEFAULT_FOLDS,
    DEFAULT_SEEDS,
    CorpusDescriptor,
    CorpusError,
    LabelKind,
    Sample,
    SplitPlan,
    SplitStrategy,
    TargetRule,
)


def select_target_text(sample: Sample, descriptor: CorpusDescriptor) -> str:
    """Text to synthesize and encode for ``sample``.

    A target span wins when present. For last-sentence corpora the context
    prefix given by the distribution is dropped. Otherwise the full text.
    """
    if sample.target_span is not None:
        start, end = sample.target_span
        return sample.text[start:end]
    if descriptor.target_rule is TargetRule.LAST_SENTENCE and sample.context:
        if sample.text.startswith(sample.context):
            return sample.text[len(sample.context):].strip()
    return sample.text


class BudgetError(CorpusError):
    pass


def downsample_to_budget(
    samples: Sequence[Sample],
    budget: float,
    rate: float,
    seed: int,
    *,
    text_of: Callable[[Sample], str] = lambda s: s.text,
    stratify: bool = False,
) -> list[Sample]:
    """Random subset of ``samples`` whose synthesis cost fits in ``budget``.

    Samples are drawn without replacement in a seeded random order until the
    next draw would overshoot the budget. A sample that alone costs more than
    the budget is never drawn. The result keeps the input order.
    """
    if budget <= 0 or rate <= 0:
        raise ValueError("budget and rate must be positive")
    lengths = [len(text_of(s)) for s in samples]
    max_chars = affordable_chars(budget, rate)
    if sum(lengths) <= max_chars:
        return list(samples)

    pool = [i for i, n in enumerate(lengths) if n <= max_chars]
    if not pool:
        raise BudgetError(f"budget {budget} cannot afford any sample at rate {rate} per character")

    rng = np.random.default_rng(seed)
    order = [pool[j] for j in rng.permutation(len(pool))]
    if stratify:
        order = _interleave_by_label(order, samples)

    chosen: list[int] = []
    spent = 0
    for i in order:
        if spent + lengths[i] > max_chars:
            break
        chosen.append(i)
        spent += lengths[i]
    return [samples[i] for i in sorted(chosen)]


# Relative slack so that e.g. 3 chars at 0.1 fit a 0.3 budget despite binary rounding.
BUDGET_RTOL = 1e-9


def affordable_chars(budget: float, rate: float) -> int:
    """Largest n with n * rate <= budget (up to BUDGET_RTOL)."""
    limit = budget * (1 + BUDGET_RTOL)
    n = int(budget / rate)
    while (n + 1) * rate <= limit:
        n += 1
    while n > 0 and n * rate > limit:
        n -= 1
    return n


def _interleave_by_label(order: list[int], samples: Sequence[Sample]) -> list[int]:
    buckets: dict[tuple, list[int]] = defaultdict(list)
    for i in order:
        lab = samples[i].label
        key = (lab.class_id,) if lab.class_id is not None else ("cont",)
        buckets[key].append(i)
    keys = sorted(buckets, key=lambda k: str(k))
    out: list[int] = []
    total = len(order)
    # Proportional round robin: repeatedly take from the bucket that is furthest behind its share.
    taken = Counter()
    sizes = {k: len(buckets[k]) for k in keys}
    while len(out) < total:
        k = min(
            (k for k in keys if taken[k] < sizes[k]),
            key=lambda k: (taken[k] / sizes[k], str(k)),
        )
        out.append(buckets[k][taken[k]])
        taken[k] += 1
    return out


def make_split_plan(
    descriptor: CorpusDescriptor,
    samples: Sequence[Sample],
    seed: int,
    *,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    n_folds: int = DEFAULT_FOLDS,
) -> SplitPlan:
    """Seed plan for corpora with a canonical split, balanced k-fold plan otherwise."""
    if not samples:
        raise CorpusError("cannot plan splits for an empty corpus")
    if descriptor.has_canonical_split:
        return SplitPlan(SplitStrategy.CANONICAL_SEEDS, seeds=tuple(seeds))
    if len(samples) < n_folds:
        raise CorpusError(f"{len(samples)} samples cannot fill {n_folds} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(samples))
    assignment = {samples[int(j)].id: pos % n_folds for pos, j in enumerate(perm)}
    return SplitPlan(SplitStrategy.KFOLD, n_folds=n_folds, assignment=assignment)


@dataclass(frozen=True)
class Violation:
    kind: str
    sample_id: Optional[str]
    message: str

    def __str__(self) -> str:
        where = f" [{self.sample_id}]" if self.sample_id else ""
        return f"{self.kind}{where}: {self.message}"


def validate_corpus(
    descriptor: CorpusDescriptor,
    samples: Iterable[Sample],
    *,
    check_files: bool = True,
) -> list[Violation]:
    """Every invariant violation in the corpus; an empty list means valid."""
    spec = descriptor.label_spec
    out: list[Violation] = []
    seen: Counter[str] = Counter()
    for s in samples:
        seen[s.id] += 1
        if seen[s.id] == 2:
            out.append(Violation("duplicate_id", s.id, f"id {s.id!r} occurs more than once"))
        if s.label.kind is not spec.kind:
            out.append(Violation("label_kind", s.id, f"{s.label.kind.value} label in a {spec.kind.value} corpus"))
        elif not spec.admits(s.label):
            if spec.kind is LabelKind.CONTINUOUS:
                msg = f"label {s.label.value:g} outside {spec.describe()}"
            else:
                msg = f"class id {s.label.class_id} outside 0..{spec.num_classes - 1}"
            out.append(Violation("label_range", s.id, msg))
        if s.target_span is not None:
            start, end = s.target_span
            if not (0 <= start < len(s.text) and start < end <= len(s.text)):
                out.append(Violation("dangling_span", s.id, f"span {s.target_span} outside text of length {len(s.text)}"))
        if descriptor.has_gold_audio:
            if not s.gold_audio:
                out.append(Violation("missing_gold_audio", s.id, "no gold audio reference"))
            elif check_files and not os.path.isfile(s.gold_audio):
                out.append(Violation("missing_gold_audio", s.id, f"gold audio file not found: {s.gold_audio}"))
    return out
