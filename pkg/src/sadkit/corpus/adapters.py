"""Readers for each corpus's published distribution format.

Every adapter takes a path (a directory, or for single-file corpora the file
itself) and yields :class:`Sample` records with raw label *names* or values.
``load_corpus`` then resolves class names against the corpus label spec.

Layouts
-------
boolq, wic, wsc
    SuperGLUE JSON-lines: ``train.jsonl`` and ``val.jsonl``. The public test
    files carry no labels, so ``val`` plays the test role.
imdb
    The ``aclImdb`` tree: ``{train,test}/{pos,neg}/<id>_<rating>.txt``.
swbd-s
    ``swbd_sentiment.csv`` with columns ``id, text, sentiment_1, sentiment_2,
    sentiment_3, audio_path``. The label is the annotator mean.
cb-prosody
    ``cb_prosody.csv`` with columns ``id, context, target, label, audio_path``.
cb
    ``commitment_bank.csv`` with columns ``uID, Context, Target, Answer, split``.
    ``Context`` holds the two preceding sentences, ``Target`` the annotated one.
factbank
    ``{train,dev,test}.jsonl`` records ``{id, text, head_start, head_end,
    label}``; optionally pre-parsed with ``tokens`` (``[{text,start,end}]``) and
    ``heads`` (parent index per token, -1 for the root).
iemocap
    ``utterances.csv`` (``id, text, label, audio_path``) plus an explicit
    ``split.csv`` (``id, split``). No session partition is guessed.
goemotions
    ``{train,dev,test}.tsv`` without header: ``text<TAB>label_ids<TAB>id``.
    Only single-label rows are kept.

Audio paths are resolved relative to the corpus directory.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterator, Optional, Union

from .descriptors import GOEMOTIONS_CLASSES, get_descriptor
from .spans import DependencyParser, SpanError, Token, head_to_span, token_at
from .types import CorpusDescriptor, CorpusError, Label, LabelKind, LabelSpec, Sample

PathLike = Union[str, Path]

# Raw record before label resolution: sample with a placeholder label plus the raw label.
RawRecord = tuple[Sample, Union[str, float], str]


def _locate(path: PathLike, default_name: str) -> Path:
    p = Path(path)
    if p.is_dir():
        p = p / default_name
    if not p.is_file():
        raise CorpusError(f"corpus file not found: {p}")
    return p


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None


def _iter_csv(path: Path, required: tuple[str, ...]) -> Iterator[tuple[int, dict]]:
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or ())]
        if missing:
            raise CorpusError(f"{path}: missing columns {missing}")
        for row in reader:
            yield reader.line_num, row


def _field(rec: dict, key: str, where: str):
    if key not in rec or rec[key] is None:
        raise CorpusError(f"{where}: missing field {key!r}")
    return rec[key]


def _float(value, where: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise CorpusError(f"{where}: not a number: {value!r}") from None
    if not math.isfinite(out):
        raise CorpusError(f"{where}: non-finite label {value!r}")
    return out


_PLACEHOLDER = Label.continuous(0.0)


def _raw(sid: str, text: str, label, where: str, **kw) -> RawRecord:
    return Sample(id=sid, text=text, label=_PLACEHOLDER, **kw), label, where


def _audio(root: Path, rel: str) -> Optional[str]:
    rel = (rel or "").strip()
    if not rel:
        return None
    p = Path(rel)
    return str(p if p.is_absolute() else root / p)


# --- SuperGLUE control tasks -------------------------------------------------

_SUPERGLUE_SPLITS = (("train", "train"), ("val", "test"))


def _superglue(path: PathLike, build: Callable[[dict, str], tuple[str, Optional[str]]]) -> list[RawRecord]:
    root = Path(path)
    out = []
    for fname, split in _SUPERGLUE_SPLITS:
        f = root / f"{fname}.jsonl"
        if not f.is_file():
            raise CorpusError(f"corpus file not found: {f}")
        for lineno, rec in _iter_jsonl(f):
            where = f"{f}:{lineno}"
            label = _field(rec, "label", where)
            if not isinstance(label, bool):
                raise CorpusError(f"{where}: label must be a boolean, got {label!r}")
            text, context = build(rec, where)
            out.append(_raw(f"{split}-{rec.get('idx', lineno)}", text, str(label), where, context=context, split=split))
    return out


def _boolq(rec: dict, where: str) -> tuple[str, Optional[str]]:
    passage = _field(rec, "passage", where)
    question = _field(rec, "question", where).strip()
    if not question.endswith("?"):
        question += "?"
    return f"{passage} {question}", passage


def _wic(rec: dict, where: str) -> tuple[str, Optional[str]]:
    return f"{_field(rec, 'sentence1', where)} {_field(rec, 'sentence2', where)}", None


def _wsc(rec: dict, where: str) -> tuple[str, Optional[str]]:
    return _field(rec, "text", where), None


def load_boolq(path: PathLike, **_) -> list[RawRecord]:
    return _superglue(path, _boolq)


def load_wic(path: PathLike, **_) -> list[RawRecord]:
    return _superglue(path, _wic)


def load_wsc(path: PathLike, **_) -> list[RawRecord]:
    return _superglue(path, _wsc)


# --- Sentiment ---------------------------------------------------------------

_IMDB_NAME = re.compile(r"^(\d+)_(\d+)\.txt$")


def load_imdb(path: PathLike, **_) -> list[RawRecord]:
    root = Path(path)
    if (root / "aclImdb").is_dir():
        root = root / "aclImdb"
    out = []
    for split in ("train", "test"):
        for polarity in ("neg", "pos"):
            d = root / split / polarity
            if not d.is_dir():
                raise CorpusError(f"corpus directory not found: {d}")
            for f in sorted(d.iterdir()):
                m = _IMDB_NAME.match(f.name)
                if not m:
                    continue
                text = f.read_text(encoding="utf-8").replace("<br />", " ").strip()
                if not text:
                    raise CorpusError(f"{f}: empty review")
                out.append(_raw(f"{split}-{polarity}-{m.group(1)}", text, polarity, str(f), split=split))
    return out


def load_swbd_s(path: PathLike, **_) -> list[RawRecord]:
    f = _locate(path, "swbd_sentiment.csv")
    cols = ("id", "text", "sentiment_1", "sentiment_2", "sentiment_3", "audio_path")
    out = []
    for lineno, row in _iter_csv(f, cols):
        where = f"{f}:{lineno}"
        votes = tuple(_float(row[c], where) for c in cols[2:5])
        mean = sum(votes) / len(votes)
        out.append(
            _raw(row["id"], row["text"], mean, where, annotator_values=votes, gold_audio=_audio(f.parent, row["audio_path"]))
        )
    return out


# --- Belief ------------------------------------------------------------------

def _join(context: str, target: str) -> tuple[str, Optional[str]]:
    context = (context or "").strip()
    target = target.strip()
    if not context:
        return target, None
    return f"{context} {target}", context


def load_cb_prosody(path: PathLike, **_) -> list[RawRecord]:
    f = _locate(path, "cb_prosody.csv")
    out = []
    for lineno, row in _iter_csv(f, ("id", "context", "target", "label", "audio_path")):
        where = f"{f}:{lineno}"
        text, context = _join(row["context"], row["target"])
        out.append(
            _raw(row["id"], text, _float(row["label"], where), where, context=context,
                 gold_audio=_audio(f.parent, row["audio_path"]))
        )
    return out


def load_cb(path: PathLike, **_) -> list[RawRecord]:
    f = _locate(path, "commitment_bank.csv")
    out = []
    for lineno, row in _iter_csv(f, ("uID", "Context", "Target", "Answer", "split")):
        where = f"{f}:{lineno}"
        text, context = _join(row["Context"], row["Target"])
        out.append(_raw(row["uID"], text, _float(row["Answer"], where), where, context=context, split=row["split"].strip()))
    return out


def load_factbank(path: PathLike, parser: Optional[DependencyParser] = None, **_) -> list[RawRecord]:
    root = Path(path)
    out = []
    for split in ("train", "dev", "test"):
        f = root / f"{split}.jsonl"
        if not f.is_file():
            if split == "dev":
                continue
            raise CorpusError(f"corpus file not found: {f}")
        for lineno, rec in _iter_jsonl(f):
            where = f"{f}:{lineno}"
            text = _field(rec, "text", where)
            hs, he = int(_field(rec, "head_start", where)), int(_field(rec, "head_end", where))
            if "tokens" in rec and "heads" in rec:
                tokens = [Token(t["text"], int(t["start"]), int(t["end"])) for t in rec["tokens"]]
                heads = [int(h) for h in rec["heads"]]
            else:
                if parser is None:
                    parser = _default_parser(where)
                tokens, heads = parser.parse(text)
            try:
                span = head_to_span(tokens, heads, token_at(tokens, hs, he))
            except SpanError as exc:
                raise CorpusError(f"{where}: {exc}") from None
            out.append(_raw(str(_field(rec, "id", where)), text, str(_field(rec, "label", where)), where,
                            target_span=span, split=split))
    return out


def _default_parser(where: str) -> DependencyParser:
    from .spans import SpacyParser

    try:
        return SpacyParser()
    except Exception as exc:
        raise CorpusError(f"{where}: record is not pre-parsed and no dependency parser is available ({exc})") from None


# --- Emotion -----------------------------------------------------------------

def load_iemocap(path: PathLike, **_) -> list[RawRecord]:
    root = Path(path)
    utt = _locate(root, "utterances.csv")
    split_file = _locate(root, "split.csv")
    splits = {row["id"]: row["split"].strip() for _, row in _iter_csv(split_file, ("id", "split"))}
    out = []
    for lineno, row in _iter_csv(utt, ("id", "text", "label", "audio_path")):
        where = f"{utt}:{lineno}"
        if row["id"] not in splits:
            raise CorpusError(f"{where}: id {row['id']!r} missing from {split_file.name}")
        out.append(_raw(row["id"], row["text"], row["label"].strip(), where, split=splits[row["id"]],
                        gold_audio=_audio(root, row["audio_path"])))
    return out


def load_goemotions(path: PathLike, **_) -> list[RawRecord]:
    root = Path(path)
    out = []
    for split in ("train", "dev", "test"):
        f = root / f"{split}.tsv"
        if not f.is_file():
            raise CorpusError(f"corpus file not found: {f}")
        with f.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                where = f"{f}:{lineno}"
                if len(parts) != 3:
                    raise CorpusError(f"{where}: expected 3 tab-separated fields, got {len(parts)}")
                text, labels, sid = parts
                ids = [x for x in labels.split(",") if x]
                if len(ids) != 1:
                    continue
                try:
                    name = GOEMOTIONS_CLASSES[int(ids[0])]
                except (ValueError, IndexError):
                    raise CorpusError(f"{where}: bad emotion id {ids[0]!r}") from None
                out.append(_raw(sid, text, name, where, split=split))
    return out


ADAPTERS: dict[str, Callable[..., list[RawRecord]]] = {
    "boolq": load_boolq,
    "wic": load_wic,
    "wsc": load_wsc,
    "swbd-s": load_swbd_s,
    "imdb": load_imdb,
    "cb-prosody": load_cb_prosody,
    "cb": load_cb,
    "factbank": load_factbank,
    "iemocap": load_iemocap,
    "goemotions": load_goemotions,
}


def resolve_labels(descriptor: CorpusDescriptor, raw: list[RawRecord]) -> tuple[CorpusDescriptor, list[Sample]]:
    """Attach typed labels, rebuilding data-driven class lists from the training split."""
    spec = descriptor.label_spec
    if spec.kind is LabelKind.CATEGORICAL and spec.classes == ("<from-train-split>",):
        train = sorted({str(lab) for s, lab, _ in raw if s.split == "train"})
        if not train:
            raise CorpusError(f"{descriptor.name}: no training records to derive the label inventory from")
        spec = LabelSpec.categorical(train)
        descriptor = replace(descriptor, label_spec=spec)

    samples = []
    for s, lab, where in raw:
        if spec.kind is LabelKind.CONTINUOUS:
            label = Label.continuous(float(lab))
            if not spec.admits(label):
                raise CorpusError(f"{where}: label {float(lab):g} outside {spec.describe()}")
        else:
            try:
                label = Label.categorical(spec.class_id(str(lab)))
            except CorpusError as exc:
                raise CorpusError(f"{where}: {exc}") from None
        samples.append(replace(s, label=label))
    return descriptor, samples


def load_corpus(
    name: str, path: PathLike, *, parser: Optional[DependencyParser] = None
) -> tuple[CorpusDescriptor, list[Sample]]:
    """Load a corpus from its published layout into the unified sample model."""
    descriptor = get_descriptor(name)
    raw = ADAPTERS[descriptor.name](path, parser=parser)
    ids = set()
    for s, _, where in raw:
        if s.id in ids:
            raise CorpusError(f"{where}: duplicate id {s.id!r}")
        ids.add(s.id)
    return resolve_labels(descriptor, raw)
