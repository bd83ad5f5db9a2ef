from .engines import (
    CommandEngine,
    CredentialsError,
    Engine,
    EngineConfig,
    EngineError,
    EngineRejected,
    RemoteEngine,
    ToneEngine,
    TransportError,
    make_engine,
)
from .manifest import AudioManifestEntry, ManifestStore, cache_key, read_manifest, text_hash
from .runner import (
    BudgetExceeded,
    EmptyTextError,
    SynthesisResult,
    estimate_cost,
    synthesize_corpus,
    synthesize_one,
)

__all__ = [
    "AudioManifestEntry",
    "BudgetExceeded",
    "CommandEngine",
    "CredentialsError",
    "EmptyTextError",
    "Engine",
    "EngineConfig",
    "EngineError",
    "EngineRejected",
    "ManifestStore",
    "RemoteEngine",
    "SynthesisResult",
    "ToneEngine",
    "TransportError",
    "cache_key",
    "estimate_cost",
    "make_engine",
    "read_manifest",
    "synthesize_corpus",
    "synthesize_one",
    "text_hash",
]
