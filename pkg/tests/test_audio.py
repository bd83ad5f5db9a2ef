from __future__ import annotations

import io
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.io import wavfile

from sadkit.audio import (
    AudioError,
    Waveform,
    decode_wav,
    encode_wav,
    extract_features,
    featurize_file,
    fit_to_window,
    load_waveform,
    mel_filterbank,
    resample,
)

RATE = 16000


def sine(freq: float, seconds: float, rate: int, amp: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(seconds * rate))) / rate
    return (amp * np.sin(2 * np.pi * freq * t)).astype(np.float32)


def wav_bytes(data: np.ndarray, rate: int) -> bytes:
    buf = io.BytesIO()
    wavfile.write(buf, rate, data)
    return buf.getvalue()


def test_mono_at_target_rate_is_identity(tmp_path: Path):
    x = sine(220, 0.5, RATE)
    p = tmp_path / "a.wav"
    p.write_bytes(wav_bytes(x, RATE))
    assert np.array_equal(load_waveform(p, RATE).samples, decode_wav(p).samples)


def test_stereo_cancellation_averages_to_zero():
    left = sine(300, 0.2, RATE)
    w = decode_wav(wav_bytes(np.stack([left, -left], axis=1), RATE))
    assert w.samples.ndim == 1 and not w.samples.any()


def test_stereo_channel_selection():
    left = sine(300, 0.2, RATE)
    w = decode_wav(wav_bytes(np.stack([left, np.zeros_like(left)], axis=1), RATE), channel=0)
    assert np.allclose(w.samples, left)


def test_int16_pcm_scaled_to_unit_range():
    pcm = np.array([0, 16384, -32768], dtype=np.int16)
    assert decode_wav(wav_bytes(pcm, RATE)).samples.tolist() == [0.0, 0.5, -1.0]


def test_undecodable_bytes():
    with pytest.raises(AudioError):
        decode_wav(b"definitely not a wav file")


def test_resample_keeps_spectral_peak():
    w = resample(Waveform(sine(440, 1.0, 8000), 8000), RATE)
    assert len(w) == 16000 and w.sample_rate == RATE
    spectrum = np.abs(np.fft.rfft(w.samples))
    freqs = np.fft.rfftfreq(len(w), 1 / RATE)
    assert abs(freqs[spectrum.argmax()] - 440) <= 1


def test_encode_decode_round_trip():
    w = Waveform(sine(100, 0.1, RATE), RATE)
    back = decode_wav(encode_wav(w))
    assert back.sample_rate == RATE and np.allclose(back.samples, w.samples, atol=1 / 32767)


# --- window contract ------------------------------------------------------------------

def test_window_examples():
    exact = Waveform(np.ones(30 * RATE, np.float32), RATE)
    assert np.array_equal(fit_to_window(exact).samples, exact.samples)
    ten = fit_to_window(Waveform(np.ones(10 * RATE, np.float32), RATE))
    assert len(ten) == 480_000 and not ten.samples[-320_000:].any() and ten.samples[:160_000].all()
    long = Waveform(np.random.default_rng(0).standard_normal(45 * RATE).astype(np.float32), RATE)
    cut = fit_to_window(long)
    assert np.array_equal(cut.samples, long.samples[: 30 * RATE])


@settings(max_examples=500, deadline=None)
@given(seconds=st.floats(min_value=1e-4, max_value=90.0, exclude_min=False))
def test_fit_to_window_properties(seconds):
    n = max(1, int(seconds * 1000))
    rate = 1000  # small rate keeps 500 cases fast; the contract is rate-independent
    x = np.linspace(-1, 1, n, dtype=np.float32)
    out = fit_to_window(Waveform(x, rate), 30.0)
    assert len(out) == 30 * rate
    assert np.array_equal(fit_to_window(out, 30.0).samples, out.samples)
    keep = min(n, 30 * rate)
    assert np.array_equal(out.samples[:keep], x[:keep])
    assert not out.samples[keep:].any()


# --- features -------------------------------------------------------------------------

def test_feature_shape_and_silence_is_finite():
    f = extract_features(fit_to_window(Waveform(np.zeros(10, np.float32), RATE)))
    assert f.frames.shape == (3000, 80) and np.isfinite(f.frames).all()


def test_features_require_fitted_window():
    with pytest.raises(AudioError):
        extract_features(Waveform(np.zeros(RATE, np.float32), RATE))


def test_features_deterministic_and_amplitude_sensitive(tmp_path: Path):
    p = tmp_path / "a.wav"
    p.write_bytes(wav_bytes(sine(330, 2.0, 22050), 22050))
    a, b = featurize_file(p), featurize_file(p)
    assert np.array_equal(a.frames, b.frames)
    w = fit_to_window(load_waveform(p))
    half = extract_features(Waveform(w.samples * 0.5, RATE))
    assert not np.array_equal(extract_features(w).frames, half.frames)


def test_short_window_features():
    w = fit_to_window(Waveform(sine(200, 0.5, RATE), RATE), 2.0)
    assert extract_features(w, window=2.0).frames.shape == (200, 80)


def test_features_match_whisper_feature_extractor():
    transformers = pytest.importorskip("transformers")
    fe = transformers.WhisperFeatureExtractor(feature_size=80, sampling_rate=RATE)
    rng = np.random.default_rng(3)
    x = (0.3 * rng.standard_normal(7 * RATE)).astype(np.float32) + sine(500, 7.0, RATE, 0.2)
    ours = extract_features(fit_to_window(Waveform(x, RATE))).frames
    ref = fe(x, sampling_rate=RATE, return_tensors="np").input_features[0].T
    assert ours.shape == ref.shape
    assert np.max(np.abs(ours - ref)) < 1e-4
    assert np.allclose(mel_filterbank(), fe.mel_filters.T, atol=1e-12)
