"""Text and audio encoder backends.

Every encoder is an ``nn.Module`` mapping one input to a ``(time, hidden)``
tensor. Text encoders take a string and emit at most 512 positions; audio
encoders take a ``(3000, 80)`` log-mel matrix (30 s at 100 frames/s).

The ``tiny`` backend is a pair of small randomly initialised transformers
(2 layers, hidden size 32) seeded for bit-reproducibility. The ``hf``
backend wraps pretrained BERT and Whisper checkpoints.
"""

from __future__ import annotations

import math
import re
import zlib
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from ..audio import N_MELS

MAX_TEXT_POSITIONS = 512
AUDIO_FRAMES = 3000


class EncoderError(Exception):
    pass


class BackendUnavailable(EncoderError):
    pass


@dataclass(frozen=True, eq=False)
class EncoderOutput:
    hidden_states: torch.Tensor  # (time, hidden)

    @property
    def time(self) -> int:
        return self.hidden_states.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.hidden_states.shape[1]


@contextmanager
def _seeded(seed: int):
    # parameter init draws from the global RNG; isolate it so construction is reproducible
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def _transformer(hidden: int, layers: int, heads: int) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        hidden, heads, dim_feedforward=2 * hidden, dropout=0.0, batch_first=True, norm_first=True
    )
    return nn.TransformerEncoder(layer, layers, enable_nested_tensor=False)


def _sinusoids(length: int, channels: int) -> torch.Tensor:
    log_timescale = math.log(10000) / (channels // 2 - 1)
    inv = torch.exp(-log_timescale * torch.arange(channels // 2, dtype=torch.float32))
    t = torch.arange(length, dtype=torch.float32)[:, None] * inv[None, :]
    return torch.cat([torch.sin(t), torch.cos(t)], dim=1)


_WORD_RE = re.compile(r"\w+|[^\w\s]")


class TinyTextEncoder(nn.Module):
    """Hashed-vocabulary transformer text encoder for desk-scale runs."""

    PAD, CLS, SEP = 0, 1, 2

    def __init__(self, hidden_size: int = 32, layers: int = 2, vocab_size: int = 4096, seed: int = 0) -> None:
        super().__init__()
        self.hidden_size = hidden_size
        self.vocab_size = vocab_size
        self.max_positions = MAX_TEXT_POSITIONS
        with _seeded(seed):
            self.embed = nn.Embedding(vocab_size + 3, hidden_size)
            self.pos = nn.Embedding(MAX_TEXT_POSITIONS, hidden_size)
            self.body = _transformer(hidden_size, layers, heads=4)
            self.norm = nn.LayerNorm(hidden_size)

    def tokenize(self, text: str) -> list[int]:
        ids = [3 + zlib.crc32(w.encode("utf-8")) % self.vocab_size for w in _WORD_RE.findall(text.lower())]
        return [self.CLS] + ids[: MAX_TEXT_POSITIONS - 2] + [self.SEP]

    def forward(self, text: str) -> torch.Tensor:
        device = self.embed.weight.device
        ids = torch.tensor(self.tokenize(text), device=device)
        x = self.embed(ids) + self.pos(torch.arange(len(ids), device=device))
        return self.norm(self.body(x[None]))[0]


class TinyAudioEncoder(nn.Module):
    """Whisper-shaped audio encoder: conv stem (stride 2) plus a small transformer.

    Unlike Whisper it also accepts windows shorter than 30 s (any frame count up
    to 3000), which keeps desk-scale experiments cheap.
    """

    def __init__(self, hidden_size: int = 32, layers: int = 2, n_mels: int = N_MELS, seed: int = 1) -> None:
        super().__init__()
        self.hidden_size = hidden_size
        self.n_mels = n_mels
        self.n_frames = AUDIO_FRAMES
        with _seeded(seed):
            self.conv1 = nn.Conv1d(n_mels, hidden_size, kernel_size=3, padding=1)
            self.conv2 = nn.Conv1d(hidden_size, hidden_size, kernel_size=3, stride=2, padding=1)
            self.body = _transformer(hidden_size, layers, heads=4)
            self.norm = nn.LayerNorm(hidden_size)
        self.register_buffer("positions", _sinusoids(AUDIO_FRAMES // 2, hidden_size), persistent=False)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        frames = features.shape[0] if features.ndim == 2 else -1
        _check_audio_shape(features, frames if 0 < frames <= self.n_frames else self.n_frames, self.n_mels)
        x = features.T[None].to(self.conv1.weight.device)
        x = nn.functional.gelu(self.conv1(x))
        x = nn.functional.gelu(self.conv2(x))
        x = x.transpose(1, 2)
        x = x + self.positions[: x.shape[1]]
        return self.norm(self.body(x))[0]


def _check_audio_shape(features: torch.Tensor, frames: int, mels: int) -> None:
    if tuple(features.shape) != (frames, mels):
        raise EncoderError(f"audio features must have shape ({frames}, {mels}), got {tuple(features.shape)}")


class HFTextEncoder(nn.Module):
    """Pretrained transformers text encoder (BERT by default), truncated to 512 tokens."""

    def __init__(self, name: str = "google-bert/bert-base-uncased", *, model=None, tokenizer=None) -> None:
        super().__init__()
        if model is None or tokenizer is None:
            try:
                from transformers import AutoModel, AutoTokenizer

                tokenizer = tokenizer or AutoTokenizer.from_pretrained(name)
                model = model or AutoModel.from_pretrained(name)
            except Exception as exc:
                raise BackendUnavailable(f"cannot load text encoder {name!r}: {exc}") from exc
        self.name = name
        self.model = model
        self.tokenizer = tokenizer
        self.hidden_size = model.config.hidden_size
        self.max_positions = min(MAX_TEXT_POSITIONS, getattr(model.config, "max_position_embeddings", MAX_TEXT_POSITIONS))

    def forward(self, text: str) -> torch.Tensor:
        enc = self.tokenizer(text, truncation=True, max_length=self.max_positions, return_tensors="pt")
        enc = {k: v.to(self.model.device) for k, v in enc.items()}
        return self.model(**enc).last_hidden_state[0]


class HFAudioEncoder(nn.Module):
    """Encoder half of a pretrained Whisper checkpoint (whisper-base by default)."""

    def __init__(self, name: str = "openai/whisper-base", *, model=None) -> None:
        super().__init__()
        if model is None:
            try:
                from transformers import WhisperModel

                model = WhisperModel.from_pretrained(name).get_encoder()
            except Exception as exc:
                raise BackendUnavailable(f"cannot load audio encoder {name!r}: {exc}") from exc
        self.name = name
        self.model = model
        self.hidden_size = model.config.d_model
        self.n_mels = model.config.num_mel_bins
        self.n_frames = 2 * model.config.max_source_positions

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        _check_audio_shape(features, self.n_frames, self.n_mels)
        x = features.T[None].to(self.model.device)
        return self.model(input_features=x).last_hidden_state[0]


def build_encoders(
    backend: str = "tiny",
    *,
    text_model: Optional[str] = None,
    audio_model: Optional[str] = None,
    need_text: bool = True,
    need_audio: bool = True,
    seed: int = 0,
) -> tuple[Optional[nn.Module], Optional[nn.Module]]:
    if backend == "tiny":
        text = TinyTextEncoder(seed=seed) if need_text else None
        audio = TinyAudioEncoder(seed=seed + 1) if need_audio else None
    elif backend == "hf":
        text = HFTextEncoder(text_model or "google-bert/bert-base-uncased") if need_text else None
        audio = HFAudioEncoder(audio_model or "openai/whisper-base") if need_audio else None
    else:
        raise BackendUnavailable(f"unknown encoder backend {backend!r}")
    return text, audio


@torch.no_grad()
def encode_text(encoder: nn.Module, text: str) -> EncoderOutput:
    """Hidden states for ``text`` in evaluation mode."""
    was_training = encoder.training
    encoder.eval()
    try:
        return EncoderOutput(encoder(text))
    finally:
        encoder.train(was_training)


@torch.no_grad()
def encode_audio(encoder: nn.Module, features) -> EncoderOutput:
    """Hidden states for a fixed-window feature matrix in evaluation mode."""
    frames = features.frames if hasattr(features, "frames") else features
    x = torch.as_tensor(frames, dtype=torch.float32)
    was_training = encoder.training
    encoder.eval()
    try:
        return EncoderOutput(encoder(x))
    finally:
        encoder.train(was_training)
