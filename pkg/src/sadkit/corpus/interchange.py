"""JSON-lines interchange: one UTF-8 file per split, one record per line.

Record fields: ``id, text, context, span_start, span_end, label,
gold_audio_path``. Continuous labels are numbers; categorical labels are
class names.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Union

from .adapters import RawRecord, _PLACEHOLDER, _iter_jsonl, resolve_labels
from .descriptors import get_descriptor
from .types import CorpusDescriptor, CorpusError, LabelKind, Sample

NO_SPLIT = "all"


def sample_to_record(sample: Sample, descriptor: CorpusDescriptor) -> dict:
    spec = descriptor.label_spec
    if spec.kind is LabelKind.CONTINUOUS:
        label = sample.label.value
    else:
        label = spec.classes[sample.label.class_id]  # type: ignore[index]
    start, end = sample.target_span if sample.target_span else (None, None)
    return {
        "id": sample.id,
        "text": sample.text,
        "context": sample.context,
        "span_start": start,
        "span_end": end,
        "label": label,
        "gold_audio_path": sample.gold_audio,
    }


def write_interchange(directory: Union[str, Path], descriptor: CorpusDescriptor, samples: Iterable[Sample]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_split: dict[str, list[Sample]] = defaultdict(list)
    for s in samples:
        by_split[s.split or NO_SPLIT].append(s)
    written = []
    for split in sorted(by_split):
        path = directory / f"{descriptor.name}.{split}.jsonl"
        with path.open("w", encoding="utf-8") as fh:
            for s in by_split[split]:
                fh.write(json.dumps(sample_to_record(s, descriptor), ensure_ascii=False) + "\n")
        written.append(path)
    return written


def read_interchange(name: str, directory: Union[str, Path]) -> tuple[CorpusDescriptor, list[Sample]]:
    descriptor = get_descriptor(name)
    directory = Path(directory)
    files = sorted(directory.glob(f"{descriptor.name}.*.jsonl"))
    if not files:
        raise CorpusError(f"no interchange files for {descriptor.name!r} in {directory}")
    raw: list[RawRecord] = []
    seen: set[str] = set()
    for f in files:
        split = f.name[len(descriptor.name) + 1 : -len(".jsonl")]
        for lineno, rec in _iter_jsonl(f):
            where = f"{f}:{lineno}"
            try:
                sid, text, label = rec["id"], rec["text"], rec["label"]
            except KeyError as exc:
                raise CorpusError(f"{where}: missing field {exc.args[0]!r}") from None
            if sid in seen:
                raise CorpusError(f"{where}: duplicate id {sid!r}")
            seen.add(sid)
            start, end = rec.get("span_start"), rec.get("span_end")
            span = (int(start), int(end)) if start is not None and end is not None else None
            sample = Sample(
                id=sid,
                text=text,
                label=_PLACEHOLDER,
                context=rec.get("context"),
                target_span=span,
                gold_audio=rec.get("gold_audio_path"),
                split=None if split == NO_SPLIT else split,
            )
            raw.append((sample, label, where))
    return resolve_labels(descriptor, raw)
