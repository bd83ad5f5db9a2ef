"""Waveform loading and fixed-window feature extraction.

Every clip, gold or synthetic, is brought to mono at the encoder rate, fitted
to a fixed window (zero-padded or truncated at the end) and turned into an
80-bin log-mel matrix following the Whisper front end: 25 ms Hann windows,
10 ms hop, Slaney mel scale, log10 with an 8-decade dynamic range clamp.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

DEFAULT_RATE = 16_000
DEFAULT_WINDOW = 30.0

N_FFT = 400
HOP = 160
N_MELS = 80


class AudioError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray  # 1-D float32 in [-1, 1]
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    frames: np.ndarray  # (time, n_mels) float32
    frame_rate: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape  # type: ignore[return-value]


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float32) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float32) / 32768.0
    if data.dtype == np.int32:
        return (data.astype(np.float64) / 2147483648.0).astype(np.float32)
    if np.issubdtype(data.dtype, np.floating):
        return data.astype(np.float32)
    raise AudioError(f"unsupported sample format {data.dtype}")


def decode_wav(source: Union[str, Path, bytes], *, channel: Optional[int] = None) -> Waveform:
    """Decode a WAV file or WAV bytes to a mono float waveform at its native rate.

    Multi-channel audio is averaged unless ``channel`` picks one channel.
    """
    handle = io.BytesIO(source) if isinstance(source, (bytes, bytearray)) else source
    try:
        rate, data = wavfile.read(handle)
    except FileNotFoundError:
        raise AudioError(f"audio file not found: {source}") from None
    except (ValueError, EOFError) as exc:
        raise AudioError(f"cannot decode audio ({exc})") from None
    x = _to_float(np.asarray(data))
    if x.ndim == 2:
        if channel is not None:
            if not 0 <= channel < x.shape[1]:
                raise AudioError(f"channel {channel} not present in {x.shape[1]}-channel audio")
            x = x[:, channel]
        else:
            x = x.mean(axis=1, dtype=np.float64).astype(np.float32)
    return Waveform(np.ascontiguousarray(x), int(rate))


def resample(w: Waveform, target_rate: int) -> Waveform:
    if w.sample_rate == target_rate:
        return w
    g = gcd(w.sample_rate, target_rate)
    y = resample_poly(w.samples.astype(np.float64), target_rate // g, w.sample_rate // g)
    return Waveform(np.clip(y, -1.0, 1.0).astype(np.float32), target_rate)


def load_waveform(path: Union[str, Path], target_rate: int = DEFAULT_RATE, *, channel: Optional[int] = None) -> Waveform:
    """Mono waveform at ``target_rate``; channels are mixed down before resampling."""
    return resample(decode_wav(path, channel=channel), target_rate)


def encode_wav(w: Waveform) -> bytes:
    """16-bit PCM WAV bytes for ``w``."""
    pcm = np.clip(np.round(w.samples.astype(np.float64) * 32767.0), -32768, 32767).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, w.sample_rate, pcm)
    return buf.getvalue()


def window_length(window: float, rate: int) -> int:
    return int(round(window * rate))


def fit_to_window(w: Waveform, window: float = DEFAULT_WINDOW) -> Waveform:
    """Zero-pad or truncate at the end so the clip lasts exactly ``window`` seconds."""
    if window <= 0:
        raise ValueError("window must be positive")
    n = window_length(window, w.sample_rate)
    x = w.samples
    if len(x) == n:
        return w
    if len(x) > n:
        return Waveform(x[:n].copy(), w.sample_rate)
    out = np.zeros(n, dtype=np.float32)
    out[: len(x)] = x
    return Waveform(out, w.sample_rate)


def _hz_to_mel(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz, min_log_mel, logstep = 1000.0, 1000.0 / f_sp, np.log(6.4) / 27.0
    return np.where(f >= min_log_hz, min_log_mel + np.log(np.maximum(f, 1e-12) / min_log_hz) / logstep, f / f_sp)


def _mel_to_hz(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz, min_log_mel, logstep = 1000.0, 1000.0 / f_sp, np.log(6.4) / 27.0
    return np.where(m >= min_log_mel, min_log_hz * np.exp(logstep * (m - min_log_mel)), f_sp * m)


@lru_cache(maxsize=4)
def mel_filterbank(sample_rate: int = DEFAULT_RATE, n_fft: int = N_FFT, n_mels: int = N_MELS) -> np.ndarray:
    """Slaney-normalised triangular filters, shape ``(n_mels, n_fft // 2 + 1)``."""
    fft_freqs = np.linspace(0, sample_rate / 2, n_fft // 2 + 1)
    mel_pts = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2), n_mels + 2))
    fdiff = np.diff(mel_pts)
    ramps = mel_pts[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (mel_pts[2:] - mel_pts[:-2]))[:, None]
    weights.setflags(write=False)
    return weights


def extract_features(w: Waveform, window: float = DEFAULT_WINDOW, sample_rate: int = DEFAULT_RATE) -> FeatureTensor:
    """Log-mel features of a window-fitted clip, shape ``(window * 100, 80)``."""
    if w.sample_rate != sample_rate:
        raise AudioError(f"expected {sample_rate} Hz audio, got {w.sample_rate} Hz")
    n = window_length(window, sample_rate)
    if len(w.samples) != n:
        raise AudioError(f"waveform has {len(w.samples)} samples; fit it to the {window:g} s window ({n}) first")

    x = w.samples.astype(np.float64)
    padded = np.pad(x, N_FFT // 2, mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(padded, N_FFT)[::HOP]
    hann = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(N_FFT) / N_FFT)
    power = np.abs(np.fft.rfft(frames * hann, axis=1)) ** 2
    power = power[:-1]  # drop the trailing frame so 30 s -> 3000 frames
    mel = power @ mel_filterbank(sample_rate, N_FFT, N_MELS).T
    log_spec = np.log10(np.maximum(mel, 1e-10))
    log_spec = np.maximum(log_spec, log_spec.max() - 8.0)
    log_spec = (log_spec + 4.0) / 4.0
    return FeatureTensor(log_spec.astype(np.float32), frame_rate=sample_rate / HOP)


def featurize_file(
    path: Union[str, Path], window: float = DEFAULT_WINDOW, sample_rate: int = DEFAULT_RATE, channel: Optional[int] = None
) -> FeatureTensor:
    return extract_features(fit_to_window(load_waveform(path, sample_rate, channel=channel), window), window, sample_rate)
