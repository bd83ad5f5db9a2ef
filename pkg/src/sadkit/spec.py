"""Experiment spec files: YAML validated against :class:`ExperimentSpec`.

Validation errors carry the line of the offending key, e.g.
``exp.yaml:7: engines.0.voice: String should have at least 1 character``.

Example::

    corpus:
      name: cb-prosody
      path: data/cb_prosody
    engines:
      - engine_id: remote_api
        model_name: tts-1-hd
        voice: alloy
      - engine_id: local
        model_name: matcha
        voice: "0"
        command: [matcha-tts, --text, "{text}", --output, "{output}"]
    budget: 10.0
    cost_rate: 3.0e-05
    modes: [text_only, audio_only, early, late]
    audio_sources: [gold, local, remote]
    output_dir: runs/cb-prosody
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .corpus.descriptors import DESCRIPTORS
from .synthesis.engines import EngineConfig

# Published price of the HD speech model per input character; override per spec.
DEFAULT_COST_RATE = 30.0 / 1_000_000


class SpecError(ValueError):
    pass


class CorpusRef(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    path: str
    format: Literal["native", "interchange"] = "native"

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v.lower() not in DESCRIPTORS:
            raise ValueError(f"no adapter for corpus {v!r}; known: {', '.join(sorted(DESCRIPTORS))}")
        return v.lower()


class TrainOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=10, ge=1)
    learning_rate: float = Field(default=2e-5, ge=0)
    batch_size: int = Field(default=1, ge=1)
    freeze_encoders: bool = False


ModeName = Literal["text_only", "audio_only", "early", "late"]
SourceName = Literal["gold", "local", "remote"]
_MODE_ALIASES = {"text": "text_only", "audio": "audio_only"}


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    corpus: CorpusRef
    engines: list[EngineConfig] = Field(default_factory=list)
    budget: float = Field(default=10.0, gt=0)
    cost_rate: float = Field(default=DEFAULT_COST_RATE, gt=0)
    stratify: bool = False
    modes: list[ModeName] = Field(default_factory=lambda: ["text_only", "audio_only", "early", "late"], min_length=1)
    audio_sources: Optional[list[SourceName]] = None
    train: TrainOverrides = Field(default_factory=TrainOverrides)
    backend: Literal["tiny", "hf"] = "tiny"
    text_model: Optional[str] = None
    audio_model: Optional[str] = None
    seed: int = 0
    parallelism: int = Field(default=1, ge=1)
    window_seconds: float = Field(default=30.0, gt=0)
    output_dir: str = "runs"
    keep_checkpoints: bool = False

    @field_validator("modes", mode="before")
    @classmethod
    def _mode_aliases(cls, v):
        if isinstance(v, list):
            v = list(dict.fromkeys(_MODE_ALIASES.get(m, m) if isinstance(m, str) else m for m in v))
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentSpec":
        ids = [e.engine_id for e in self.engines]
        if len(ids) != len(set(ids)):
            raise ValueError("at most one engine per engine_id (remote_api, local)")
        if self.backend == "hf" and self.window_seconds != 30.0:
            raise ValueError("the hf backend's Whisper encoder needs window_seconds: 30")
        descriptor = DESCRIPTORS[self.corpus.name]
        available = {e.source for e in self.engines}
        for src in self.sources:
            if src == "gold" and not descriptor.has_gold_audio:
                raise ValueError(
                    f"audio source 'gold' requested but {descriptor.title} has no gold audio "
                    "(only SWBD-S, CB-Prosody and IEMOCAP ship gold audio)"
                )
            if src in ("local", "remote") and src not in available:
                raise ValueError(f"audio source {src!r} requested but no {src} engine is configured")
        return self

    @property
    def sources(self) -> list[str]:
        if self.audio_sources is not None:
            return list(self.audio_sources)
        out = ["gold"] if DESCRIPTORS[self.corpus.name].has_gold_audio else []
        return out + sorted(e.source for e in self.engines)

    def engine(self, source: str) -> EngineConfig:
        return next(e for e in self.engines if e.source == source)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False, allow_unicode=True)


def _line_of(node: Optional[yaml.Node], loc: tuple) -> Optional[int]:
    """1-based line of the YAML node addressed by a pydantic error location."""
    line = node.start_mark.line + 1 if node is not None else None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if k.value == part), None)
            if match is None:
                break
            node = match
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
        else:
            break
        line = node.start_mark.line + 1
    return line


def parse_spec(text: str, source: str = "<spec>") -> ExperimentSpec:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise SpecError(f"{where}: invalid YAML ({getattr(exc, 'problem', exc)})") from None
    if not isinstance(data, dict):
        raise SpecError(f"{source}:1: spec must be a mapping")
    try:
        return ExperimentSpec.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p.startswith("function-")))
            line = _line_of(root, loc)
            path = ".".join(str(p) for p in loc) or "<root>"
            msgs.append(f"{source}:{line}: {path}: {err['msg']}")
        raise SpecError("; ".join(msgs)) from None


def load_spec(path: Union[str, Path]) -> ExperimentSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"{p}: cannot read spec ({exc.strerror})") from None
    return parse_spec(text, str(p))


def spec_from_dict(data: dict[str, Any]) -> ExperimentSpec:
    return parse_spec(yaml.safe_dump(data, sort_keys=False))
