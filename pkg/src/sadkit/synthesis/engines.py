"""TTS engines behind one interface: ``synthesize(text) -> WAV bytes``.

Transport-level problems raise :class:`TransportError` (retried by the
caller); a definitive refusal raises :class:`EngineRejected`.
"""

from __future__ import annotations

import hashlib
import io
import os
import subprocess
import tempfile
import wave
from pathlib import Path
from typing import Literal, Optional, Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..audio import Waveform, encode_wav


class EngineError(Exception):
    pass


class TransportError(EngineError):
    """Retryable: connection problems, timeouts, rate limiting, 5xx."""


class EngineRejected(EngineError):
    """Not retryable: the engine refused the request."""


class CredentialsError(EngineError):
    pass


class EngineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    engine_id: Literal["remote_api", "local"]
    model_name: str = Field(min_length=1)
    voice: str = Field(min_length=1)
    output_format: Literal["wav", "pcm"] = "wav"
    target_sample_rate: int = Field(default=16_000, gt=0)
    # remote engine
    api_key_env: str = "OPENAI_API_KEY"
    base_url: str = "https://api.openai.com/v1"
    timeout: float = Field(default=60.0, gt=0)
    # local engine: argv template with {text}, {output}, {voice}, {model} placeholders
    command: Optional[list[str]] = None
    # longest string the engine accepts; longer target texts are cut to it
    max_input_chars: int = Field(default=4096, gt=0)

    @field_validator("model_name", "voice")
    @classmethod
    def _not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("must not be blank")
        return v

    @property
    def source(self) -> str:
        """Audio-source label used in run names and reports."""
        return "remote" if self.engine_id == "remote_api" else "local"


class Engine(Protocol):
    def synthesize(self, text: str) -> bytes: ...


PCM_RATE = 24_000  # raw PCM responses from the speech endpoint are 24 kHz, 16-bit mono


def pcm_to_wav(pcm: bytes, rate: int = PCM_RATE) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm)
    return buf.getvalue()


class RemoteEngine:
    """Client for an OpenAI-style ``POST /audio/speech`` endpoint."""

    def __init__(self, config: EngineConfig, client=None) -> None:
        import httpx

        key = os.environ.get(config.api_key_env)
        if not key:
            raise CredentialsError(f"environment variable {config.api_key_env} is not set")
        self.config = config
        self._httpx = httpx
        self._client = client or httpx.Client(timeout=config.timeout)
        self._headers = {"Authorization": f"Bearer {key}"}

    def synthesize(self, text: str) -> bytes:
        cfg = self.config
        payload = {"model": cfg.model_name, "voice": cfg.voice, "input": text, "response_format": cfg.output_format}
        try:
            resp = self._client.post(f"{cfg.base_url.rstrip('/')}/audio/speech", json=payload, headers=self._headers)
        except self._httpx.TransportError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise EngineRejected(f"HTTP {resp.status_code}: {resp.text[:200]}")
        body = resp.content
        return pcm_to_wav(body) if cfg.output_format == "pcm" else body


class CommandEngine:
    """Runs an external synthesis program that writes a WAV file."""

    def __init__(self, config: EngineConfig) -> None:
        if not config.command:
            raise EngineError("local engine needs a command template or a builtin model")
        self.config = config

    def synthesize(self, text: str) -> bytes:
        cfg = self.config
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "out.wav"
            argv = [a.format(text=text, output=str(out), voice=cfg.voice, model=cfg.model_name) for a in cfg.command]
            try:
                proc = subprocess.run(argv, capture_output=True, timeout=cfg.timeout)
            except subprocess.TimeoutExpired as exc:
                raise TransportError(f"synthesis timed out after {cfg.timeout:g}s") from exc
            except OSError as exc:
                raise EngineRejected(f"cannot run {argv[0]!r}: {exc}") from exc
            if proc.returncode != 0:
                raise EngineRejected(f"exit {proc.returncode}: {proc.stderr.decode(errors='replace')[-200:]}")
            if not out.is_file():
                raise EngineRejected("synthesis command produced no output file")
            return out.read_bytes()


def _h(s: str) -> int:
    return int.from_bytes(hashlib.sha256(s.encode("utf-8")).digest()[:4], "big")


class ToneEngine:
    """Deterministic offline synthesizer for desk-scale runs and tests.

    Each word becomes a short harmonic tone whose pitch depends on the word
    and the voice; ``!`` raises loudness and ``?`` adds a rising contour. It
    makes no attempt at intelligible speech.
    """

    rate = 22_050

    def __init__(self, config: EngineConfig) -> None:
        self.config = config
        self.base_f0 = 100.0 + _h(config.voice) % 120

    def synthesize(self, text: str) -> bytes:
        words = text.split()
        if not words:
            raise EngineRejected("nothing to say")
        loud = 0.8 if "!" in text else 0.4
        question = text.rstrip().endswith("?")
        chunks = []
        for i, word in enumerate(words):
            dur = 0.05 + 0.035 * len(word)
            t = np.arange(int(dur * self.rate)) / self.rate
            f0 = self.base_f0 * (1.0 + (_h(word.lower()) % 50) / 100.0)
            if question and i == len(words) - 1:
                f0 = f0 * (1.0 + 0.6 * t / dur)
            phase = 2 * np.pi * np.cumsum(np.broadcast_to(f0, t.shape)) / self.rate
            tone = sum(np.sin(k * phase) / k for k in (1, 2, 3))
            env = np.sin(np.pi * t / dur) ** 2
            chunks.append(loud * 0.5 * env * tone)
            chunks.append(np.zeros(int(0.04 * self.rate)))
        return encode_wav(Waveform(np.concatenate(chunks).astype(np.float32), self.rate))


def make_engine(config: EngineConfig, client=None) -> Engine:
    if config.engine_id == "remote_api":
        return RemoteEngine(config, client=client)
    if config.model_name.startswith("builtin:tone"):
        return ToneEngine(config)
    return CommandEngine(config)
