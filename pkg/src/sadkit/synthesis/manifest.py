"""Persistent, append-only audio manifest with content-addressed files.

Layout next to ``manifest.jsonl``::

    manifest.jsonl
    audio/<key[:2]>/<key>.wav

Audio is written to a temporary file and renamed into place before its
manifest line is appended, so an interrupted run can at worst leave an orphan
temp file or a partial last line; both are repaired when the store is opened.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Optional, Union

from ..audio import AudioError, decode_wav

OK = "ok"
FAILED = "failed"
BUDGET_ABORT = "budget_abort"


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cache_key(engine_id: str, model_name: str, voice: str, digest: str) -> str:
    ident = json.dumps([engine_id, model_name, voice, digest], separators=(",", ":"))
    return hashlib.sha256(ident.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AudioManifestEntry:
    sample_id: str
    engine_id: str
    model_name: str
    voice: str
    text_hash: str
    file_path: Optional[str]  # relative to the manifest directory
    duration: float
    char_count: int
    cost_estimate: float
    status: str = OK
    error: Optional[str] = None

    @property
    def key(self) -> str:
        return cache_key(self.engine_id, self.model_name, self.voice, self.text_hash)

    @property
    def ok(self) -> bool:
        return self.status == OK


class ManifestStore:
    """Thread-safe view of one manifest file plus its audio directory."""

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)
        self.root = self.path.parent
        self.audio_dir = self.root / "audio"
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self.entries: list[AudioManifestEntry] = []
        self._by_key: dict[str, AudioManifestEntry] = {}
        self.dropped: list[AudioManifestEntry] = []
        self.root.mkdir(parents=True, exist_ok=True)
        self._load()

    # -- loading / repair --------------------------------------------------
    def _load(self) -> None:
        for tmp in self.audio_dir.glob("**/*.tmp"):
            tmp.unlink(missing_ok=True)
        if not self.path.exists():
            return
        raw = self.path.read_bytes()
        if raw and not raw.endswith(b"\n"):
            # partial last line from an interrupted append
            raw = raw[: raw.rfind(b"\n") + 1]
            with open(self.path, "r+b") as fh:
                fh.truncate(len(raw))
        for line in raw.decode("utf-8").splitlines():
            if not line.strip():
                continue
            entry = AudioManifestEntry(**json.loads(line))
            if entry.ok and not self._file_valid(entry):
                self.dropped.append(entry)
                continue
            self.entries.append(entry)
            if entry.ok:
                self._by_key.setdefault(entry.key, entry)

    def _file_valid(self, entry: AudioManifestEntry) -> bool:
        if not entry.file_path:
            return False
        try:
            w = decode_wav(self.resolve(entry))
        except AudioError:
            return False
        return len(w) > 0

    # -- lookup --------------------------------------------------------------
    def resolve(self, entry: AudioManifestEntry) -> Path:
        assert entry.file_path is not None
        return self.root / entry.file_path

    def lookup(self, key: str) -> Optional[AudioManifestEntry]:
        with self._lock:
            return self._by_key.get(key)

    def latest_by_sample(self) -> dict[str, AudioManifestEntry]:
        """Last recorded entry per sample id, successful entries taking precedence."""
        out: dict[str, AudioManifestEntry] = {}
        with self._lock:
            for e in self.entries:
                if e.ok or e.sample_id not in out or not out[e.sample_id].ok:
                    out[e.sample_id] = e
        return out

    def audio_paths(self) -> dict[str, Path]:
        return {sid: self.resolve(e) for sid, e in self.latest_by_sample().items() if e.ok}

    @contextmanager
    def key_lock(self, key: str) -> Iterator[None]:
        with self._lock:
            lock = self._key_locks.setdefault(key, threading.Lock())
        with lock:
            yield

    # -- writing -------------------------------------------------------------
    def audio_relpath(self, key: str) -> str:
        return f"audio/{key[:2]}/{key}.wav"

    def write_audio(self, key: str, data: bytes) -> str:
        rel = self.audio_relpath(key)
        final = self.root / rel
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.with_name(f"{final.name}.{threading.get_ident()}.tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, final)
        return rel

    def append(self, entry: AudioManifestEntry) -> None:
        line = json.dumps(asdict(entry), ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self.entries.append(entry)
            if entry.ok:
                self._by_key.setdefault(entry.key, entry)


def read_manifest(path: Union[str, Path]) -> list[AudioManifestEntry]:
    return list(ManifestStore(path).entries)
