from .encoders import (
    BackendUnavailable,
    EncoderError,
    EncoderOutput,
    HFAudioEncoder,
    HFTextEncoder,
    TinyAudioEncoder,
    TinyTextEncoder,
    build_encoders,
    encode_audio,
    encode_text,
)
from .fusion import (
    FusionConfig,
    FusionError,
    FusionHead,
    HeadKind,
    Mode,
    Prediction,
    SADModel,
    build_model,
    load_checkpoint,
    max_pool,
    pool_and_fuse,
    predict_label,
    save_checkpoint,
)

__all__ = [
    "BackendUnavailable",
    "EncoderError",
    "EncoderOutput",
    "FusionConfig",
    "FusionError",
    "FusionHead",
    "HFAudioEncoder",
    "HFTextEncoder",
    "HeadKind",
    "Mode",
    "Prediction",
    "SADModel",
    "TinyAudioEncoder",
    "TinyTextEncoder",
    "build_encoders",
    "build_model",
    "encode_audio",
    "encode_text",
    "load_checkpoint",
    "max_pool",
    "pool_and_fuse",
    "predict_label",
    "save_checkpoint",
]
