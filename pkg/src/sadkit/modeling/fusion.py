"""Max-pooling, prediction heads and the four modality variants.

``early``: pool each modality over time, concatenate, one shared linear head.
``late``: pool each modality, one linear head per modality, concatenate the
two head outputs and map them through a final linear combiner.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
from torch import nn

from ..corpus.types import Label, LabelKind, LabelSpec
from .encoders import EncoderOutput, build_encoders


class FusionError(ValueError):
    pass


class Mode(str, enum.Enum):
    TEXT_ONLY = "text_only"
    AUDIO_ONLY = "audio_only"
    EARLY = "early"
    LATE = "late"

    @property
    def uses_text(self) -> bool:
        return self is not Mode.AUDIO_ONLY

    @property
    def uses_audio(self) -> bool:
        return self is not Mode.TEXT_ONLY


class HeadKind(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class FusionConfig:
    mode: Mode
    head_kind: HeadKind
    num_classes: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "head_kind", HeadKind(self.head_kind))
        if self.head_kind is HeadKind.CLASSIFICATION:
            if self.num_classes is None or self.num_classes < 2:
                raise FusionError("classification needs num_classes >= 2")
        elif self.num_classes is not None:
            raise FusionError("regression heads take no num_classes")

    @classmethod
    def for_labels(cls, mode: Union[Mode, str], spec: LabelSpec) -> "FusionConfig":
        if spec.kind is LabelKind.CONTINUOUS:
            return cls(Mode(mode), HeadKind.REGRESSION)
        return cls(Mode(mode), HeadKind.CLASSIFICATION, spec.num_classes)

    @property
    def output_dim(self) -> int:
        return 1 if self.head_kind is HeadKind.REGRESSION else int(self.num_classes)  # type: ignore[arg-type]


@dataclass(frozen=True)
class Prediction:
    scalar: Optional[float] = None
    logits: Optional[tuple[float, ...]] = None

    @classmethod
    def from_output(cls, out: torch.Tensor, config: FusionConfig) -> "Prediction":
        values = out.detach().double().cpu().reshape(-1).tolist()
        if config.head_kind is HeadKind.REGRESSION:
            return cls(scalar=values[0])
        return cls(logits=tuple(values))


def predict_label(p: Prediction, spec: LabelSpec) -> Label:
    """Argmax for classification (ties go to the lowest class index); identity for regression."""
    if spec.kind is LabelKind.CONTINUOUS:
        if p.scalar is None:
            raise FusionError("regression label spec needs a scalar prediction")
        return Label.continuous(p.scalar)
    if p.logits is None:
        raise FusionError("categorical label spec needs logits")
    if len(p.logits) != spec.num_classes:
        raise FusionError(f"{len(p.logits)} logits for {spec.num_classes} classes")
    return Label.categorical(int(np.argmax(np.asarray(p.logits))))


def max_pool(hidden: torch.Tensor) -> torch.Tensor:
    """Coordinatewise maximum over the time axis of a ``(time, hidden)`` tensor."""
    if hidden.ndim != 2 or hidden.shape[0] == 0:
        raise FusionError(f"expected a nonempty (time, hidden) tensor, got shape {tuple(hidden.shape)}")
    return hidden.max(dim=0).values


class FusionHead(nn.Module):
    def __init__(self, config: FusionConfig, text_dim: int = 0, audio_dim: int = 0) -> None:
        super().__init__()
        self.config = config
        self.text_dim = text_dim
        self.audio_dim = audio_dim
        out = config.output_dim
        mode = config.mode
        if mode.uses_text and text_dim <= 0:
            raise FusionError(f"{mode.value} needs a text hidden size")
        if mode.uses_audio and audio_dim <= 0:
            raise FusionError(f"{mode.value} needs an audio hidden size")
        if mode is Mode.TEXT_ONLY:
            self.head = nn.Linear(text_dim, out)
        elif mode is Mode.AUDIO_ONLY:
            self.head = nn.Linear(audio_dim, out)
        elif mode is Mode.EARLY:
            self.head = nn.Linear(text_dim + audio_dim, out)
        else:
            self.text_head = nn.Linear(text_dim, out)
            self.audio_head = nn.Linear(audio_dim, out)
            self.combiner = nn.Linear(2 * out, out)

    @property
    def input_dim(self) -> int:
        if self.config.mode is Mode.LATE:
            return self.combiner.in_features
        return self.head.in_features

    def forward(self, text_hidden: Optional[torch.Tensor], audio_hidden: Optional[torch.Tensor]) -> torch.Tensor:
        mode = self.config.mode
        if mode.uses_text and text_hidden is None:
            raise FusionError(f"{mode.value} requires text encoder output")
        if mode.uses_audio and audio_hidden is None:
            raise FusionError(f"{mode.value} requires audio encoder output")
        t = max_pool(text_hidden) if mode.uses_text else None
        a = max_pool(audio_hidden) if mode.uses_audio else None
        for vec, dim, name in ((t, self.text_dim, "text"), (a, self.audio_dim, "audio")):
            if vec is not None and vec.shape[0] != dim:
                raise FusionError(f"{name} hidden size {vec.shape[0]} != expected {dim}")
        if mode is Mode.TEXT_ONLY:
            return self.head(t)
        if mode is Mode.AUDIO_ONLY:
            return self.head(a)
        if mode is Mode.EARLY:
            return self.head(torch.cat([t, a]))
        return self.combiner(torch.cat([self.text_head(t), self.audio_head(a)]))


def pool_and_fuse(
    text_out: Optional[EncoderOutput], audio_out: Optional[EncoderOutput], head: FusionHead
) -> Prediction:
    with torch.no_grad():
        out = head(
            text_out.hidden_states if text_out is not None else None,
            audio_out.hidden_states if audio_out is not None else None,
        )
    return Prediction.from_output(out, head.config)


class SADModel(nn.Module):
    """Encoders plus fusion head; ``forward(text, features)`` returns the raw head output."""

    def __init__(
        self,
        config: FusionConfig,
        text_encoder: Optional[nn.Module] = None,
        audio_encoder: Optional[nn.Module] = None,
        *,
        freeze_encoders: bool = False,
    ) -> None:
        super().__init__()
        if config.mode.uses_text and text_encoder is None:
            raise FusionError(f"{config.mode.value} needs a text encoder")
        if config.mode.uses_audio and audio_encoder is None:
            raise FusionError(f"{config.mode.value} needs an audio encoder")
        self.config = config
        self.text_encoder = text_encoder if config.mode.uses_text else None
        self.audio_encoder = audio_encoder if config.mode.uses_audio else None
        self.head = FusionHead(
            config,
            text_dim=self.text_encoder.hidden_size if self.text_encoder is not None else 0,
            audio_dim=self.audio_encoder.hidden_size if self.audio_encoder is not None else 0,
        )
        if freeze_encoders:
            for enc in (self.text_encoder, self.audio_encoder):
                if enc is not None:
                    enc.requires_grad_(False)

    def forward(self, text: Optional[str], features: Optional[torch.Tensor]) -> torch.Tensor:
        mode = self.config.mode
        if mode.uses_text and text is None:
            raise FusionError(f"{mode.value} requires text input")
        if mode.uses_audio and features is None:
            raise FusionError(f"{mode.value} requires audio features")
        th = self.text_encoder(text) if self.text_encoder is not None else None
        ah = self.audio_encoder(features) if self.audio_encoder is not None else None
        return self.head(th, ah)

    @torch.no_grad()
    def predict(self, text: Optional[str], features: Optional[torch.Tensor]) -> Prediction:
        was_training = self.training
        self.eval()
        try:
            return Prediction.from_output(self(text, features), self.config)
        finally:
            self.train(was_training)


def build_model(
    config: FusionConfig,
    backend: str = "tiny",
    *,
    seed: int = 0,
    text_model: Optional[str] = None,
    audio_model: Optional[str] = None,
    freeze_encoders: bool = False,
) -> SADModel:
    text, audio = build_encoders(
        backend,
        text_model=text_model,
        audio_model=audio_model,
        need_text=config.mode.uses_text,
        need_audio=config.mode.uses_audio,
        seed=seed,
    )
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return SADModel(config, text, audio, freeze_encoders=freeze_encoders)


def save_checkpoint(model: SADModel, directory: Union[str, Path], **encoder_info) -> None:
    """Write ``params.pt`` (named tensors) and ``config.json`` (mode, head, encoder ids)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), directory / "params.pt")
    doc = {
        "mode": model.config.mode.value,
        "head_kind": model.config.head_kind.value,
        "num_classes": model.config.num_classes,
        **encoder_info,
    }
    (directory / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(directory: Union[str, Path]) -> SADModel:
    directory = Path(directory)
    doc = json.loads((directory / "config.json").read_text(encoding="utf-8"))
    config = FusionConfig(Mode(doc["mode"]), HeadKind(doc["head_kind"]), doc.get("num_classes"))
    model = build_model(
        config,
        doc.get("backend", "tiny"),
        seed=doc.get("seed", 0),
        text_model=doc.get("text_model"),
        audio_model=doc.get("audio_model"),
    )
    model.load_state_dict(torch.load(directory / "params.pt", weights_only=True))
    return model
