from __future__ import annotations

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from sadkit.corpus import LabelSpec
from sadkit.modeling import (
    EncoderError,
    FusionConfig,
    FusionError,
    FusionHead,
    HeadKind,
    Mode,
    Prediction,
    build_model,
    encode_audio,
    encode_text,
    load_checkpoint,
    max_pool,
    pool_and_fuse,
    predict_label,
    save_checkpoint,
)
from sadkit.modeling.encoders import (
    BackendUnavailable,
    HFAudioEncoder,
    HFTextEncoder,
    TinyAudioEncoder,
    TinyTextEncoder,
    build_encoders,
)

BINARY = LabelSpec.categorical(["no", "yes"])
BELIEF = LabelSpec.continuous(-3, 3)


def test_text_encoder_caps_at_512_and_is_deterministic():
    enc = TinyTextEncoder()
    long = encode_text(enc, "word " * 2000)
    assert long.hidden_states.shape[0] == 512
    short = encode_text(enc, "hello world")
    assert short.hidden_states.shape[0] <= 512
    assert torch.equal(short.hidden_states, encode_text(enc, "hello world").hidden_states)


def test_audio_encoder_shapes_and_sensitivity():
    enc = TinyAudioEncoder()
    silence = encode_audio(enc, np.zeros((3000, 80), np.float32)).hidden_states
    assert silence.shape == (1500, 32) and torch.isfinite(silence).all()
    rng = np.random.default_rng(0)
    a = encode_audio(enc, rng.standard_normal((3000, 80)).astype(np.float32)).hidden_states
    b = encode_audio(enc, rng.standard_normal((3000, 80)).astype(np.float32)).hidden_states
    assert not torch.equal(a, b)
    for bad in ((3000, 40), (4000, 80), (80,)):
        with pytest.raises(EncoderError):
            encode_audio(enc, np.zeros(bad, np.float32))


def test_unknown_backend():
    with pytest.raises(BackendUnavailable):
        build_encoders("nope")


def test_early_fusion_input_dim_768_plus_512():
    head = FusionHead(FusionConfig(Mode.EARLY, HeadKind.CLASSIFICATION, 4), text_dim=768, audio_dim=512)
    assert head.input_dim == 1280


def test_max_pool_identities():
    v = torch.tensor([1.0, -2.0, 3.5])
    assert torch.equal(max_pool(v.repeat(7, 1)), v)
    with pytest.raises(FusionError):
        max_pool(torch.zeros(0, 3))


@settings(max_examples=50, deadline=None)
@given(t=st.integers(1, 20), h=st.integers(1, 8), seed=st.integers(0, 10_000))
def test_max_pool_permutation_invariant(t, h, seed):
    g = torch.Generator().manual_seed(seed)
    x = torch.randn(t, h, generator=g)
    perm = torch.randperm(t, generator=g)
    assert torch.equal(max_pool(x), max_pool(x[perm]))
    assert torch.equal(max_pool(x), torch.tensor(np.max(x.numpy(), axis=0)))


def test_predict_label_examples():
    assert predict_label(Prediction(logits=(0.1, 2.3, -1.0)), LabelSpec.categorical("abc")).class_id == 1
    assert predict_label(Prediction(scalar=2.7), BELIEF).value == 2.7
    for logits, expect in (((1.0, 1.0), 0), ((0.0, 2.0, 2.0), 1), ((5.0, 5.0, 5.0), 0)):
        spec = LabelSpec.categorical([str(i) for i in range(len(logits))])
        assert predict_label(Prediction(logits=logits), spec).class_id == expect


def _fd_check(head: FusionHead, t: torch.Tensor, a: torch.Tensor, target) -> None:
    head = head.double()
    params = list(head.parameters())
    assert sum(p.numel() for p in params) <= 64

    def loss() -> torch.Tensor:
        out = head(t, a)
        if head.config.head_kind is HeadKind.REGRESSION:
            return (out.reshape(()) - target) ** 2
        return torch.nn.functional.cross_entropy(out[None], torch.tensor([target]))

    head.zero_grad()
    loss().backward()
    eps = 1e-6
    for p in params:
        for idx in np.ndindex(*p.shape):
            with torch.no_grad():
                orig = p[idx].item()
                p[idx] = orig + eps
                up = loss().item()
                p[idx] = orig - eps
                down = loss().item()
                p[idx] = orig
            assert p.grad[idx].item() == pytest.approx((up - down) / (2 * eps), rel=1e-5, abs=1e-8)


@pytest.mark.parametrize("mode", [Mode.EARLY, Mode.LATE])
@pytest.mark.parametrize("kind", [HeadKind.REGRESSION, HeadKind.CLASSIFICATION])
def test_fusion_gradients_match_finite_differences(mode, kind):
    torch.manual_seed(0)
    cfg = FusionConfig(mode, kind, 2 if kind is HeadKind.CLASSIFICATION else None)
    head = FusionHead(cfg, text_dim=3, audio_dim=2)
    t = torch.randn(5, 3, dtype=torch.float64)
    a = torch.randn(4, 2, dtype=torch.float64)
    _fd_check(head, t, a, 1 if kind is HeadKind.CLASSIFICATION else 0.7)


def test_pool_and_fuse_and_mode_requirements():
    head = FusionHead(FusionConfig(Mode.LATE, HeadKind.CLASSIFICATION, 3), text_dim=4, audio_dim=4)
    out = pool_and_fuse(encode_text(TinyTextEncoder(hidden_size=4, layers=1), "hi"),
                        encode_text(TinyTextEncoder(hidden_size=4, layers=1, seed=3), "there"), head)
    assert len(out.logits) == 3
    with pytest.raises(FusionError):
        head(torch.zeros(2, 4), None)
    text_only = FusionHead(FusionConfig(Mode.TEXT_ONLY, HeadKind.REGRESSION), text_dim=4)
    assert text_only(torch.ones(3, 4), None).shape == (1,)


def test_model_build_is_seeded_and_checkpoint_round_trips(tmp_path):
    cfg = FusionConfig.for_labels(Mode.EARLY, BINARY)
    m1, m2 = build_model(cfg, seed=5), build_model(cfg, seed=5)
    assert all(torch.equal(a, b) for a, b in zip(m1.state_dict().values(), m2.state_dict().values()))
    feats = torch.zeros(3000, 80)
    save_checkpoint(m1, tmp_path / "ck", backend="tiny", seed=5)
    back = load_checkpoint(tmp_path / "ck")
    assert back.predict("some text", feats) == m1.predict("some text", feats)


def test_model_accepts_short_windows_on_tiny_backend():
    m = build_model(FusionConfig.for_labels(Mode.AUDIO_ONLY, BELIEF))
    assert m.predict(None, torch.zeros(200, 80)).scalar is not None


# --- transformers-backed encoders, built from tiny random configs (no download) -------

@pytest.fixture(scope="module")
def tiny_bert(tmp_path_factory):
    transformers = pytest.importorskip("transformers")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + [f"w{i}" for i in range(50)] + ["hello", "world"]
    path = tmp_path_factory.mktemp("bert") / "vocab.txt"
    path.write_text("\n".join(vocab) + "\n")
    tok = transformers.BertTokenizer(str(path))
    cfg = transformers.BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=1,
                                  num_attention_heads=2, intermediate_size=32, max_position_embeddings=600)
    torch.manual_seed(0)
    return HFTextEncoder("tiny-bert", model=transformers.BertModel(cfg), tokenizer=tok)


def test_hf_text_encoder_truncates_to_512(tiny_bert):
    out = encode_text(tiny_bert, "hello world " * 600)
    assert out.hidden_states.shape == (512, 16)
    assert torch.equal(out.hidden_states, encode_text(tiny_bert, "hello world " * 600).hidden_states)


def test_hf_audio_encoder_whisper_shapes():
    transformers = pytest.importorskip("transformers")
    cfg = transformers.WhisperConfig(d_model=16, encoder_layers=1, encoder_attention_heads=2, decoder_layers=1,
                                     decoder_attention_heads=2, encoder_ffn_dim=32, decoder_ffn_dim=32,
                                     num_mel_bins=80, max_source_positions=1500)
    torch.manual_seed(0)
    enc = HFAudioEncoder("tiny-whisper", model=transformers.WhisperModel(cfg).get_encoder())
    out = encode_audio(enc, np.zeros((3000, 80), np.float32))
    assert out.hidden_states.shape == (1500, 16)
    with pytest.raises(EncoderError):
        encode_audio(enc, np.zeros((200, 80), np.float32))


def test_hf_backend_unavailable_without_weights(monkeypatch):
    pytest.importorskip("transformers")
    monkeypatch.setenv("HF_HUB_OFFLINE", "1")
    with pytest.raises(BackendUnavailable):
        HFTextEncoder("/nonexistent/checkpoint")
