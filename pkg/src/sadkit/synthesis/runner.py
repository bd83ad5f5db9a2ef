from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..corpus.ops import affordable_chars
from ..audio import AudioError, decode_wav, encode_wav, resample
from .engines import Engine, EngineConfig, EngineRejected, TransportError, make_engine
from .manifest import BUDGET_ABORT, FAILED, OK, AudioManifestEntry, ManifestStore, cache_key, text_hash

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
BACKOFF_START = 1.0


class SynthesisError(Exception):
    pass


class EmptyTextError(SynthesisError, ValueError):
    pass


class BudgetExceeded(SynthesisError):
    """Raised after a run stops for budget; ``result`` holds the partial outcome."""

    def __init__(self, result: "SynthesisResult") -> None:
        super().__init__(
            f"budget exhausted after {result.new_requests} new requests "
            f"({result.budget_aborts} samples not synthesized)"
        )
        self.result = result


def estimate_cost(texts: Sequence[str], rate: float) -> float:
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return sum(len(t) for t in texts) * rate


def _call_with_retry(engine: Engine, text: str, sleep: Callable[[float], None]) -> bytes:
    delay = BACKOFF_START
    for attempt in range(1, MAX_ATTEMPTS + 1):
        try:
            return engine.synthesize(text)
        except TransportError as exc:
            if attempt == MAX_ATTEMPTS:
                raise
            log.warning("transport failure (attempt %d/%d): %s", attempt, MAX_ATTEMPTS, exc)
            sleep(delay)
            delay *= 2
    raise AssertionError("unreachable")


def _postprocess(data: bytes, config: EngineConfig) -> tuple[bytes, float]:
    try:
        w = decode_wav(data)
    except AudioError as exc:
        raise EngineRejected(f"engine returned undecodable audio: {exc}") from None
    w = resample(w, config.target_sample_rate)
    if len(w) == 0:
        raise EngineRejected("engine returned empty audio")
    return encode_wav(w), w.duration


def _entry(sample_id, config, digest, text, **kw) -> AudioManifestEntry:
    base = dict(
        sample_id=sample_id,
        engine_id=config.engine_id,
        model_name=config.model_name,
        voice=config.voice,
        text_hash=digest,
        file_path=None,
        duration=0.0,
        char_count=len(text),
        cost_estimate=0.0,
    )
    base.update(kw)
    return AudioManifestEntry(**base)


@dataclass
class _Budget:
    max_chars: Optional[int]
    spent_chars: int = 0
    exhausted: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)

    def reserve(self, n: int) -> bool:
        with self.lock:
            if self.exhausted:
                return False
            if self.max_chars is not None and self.spent_chars + n > self.max_chars:
                self.exhausted = True
                return False
            self.spent_chars += n
            return True

    def refund(self, n: int) -> None:
        with self.lock:
            self.spent_chars -= n


def synthesize_one(
    text: str,
    config: EngineConfig,
    cache: ManifestStore,
    *,
    engine: Optional[Engine] = None,
    sample_id: Optional[str] = None,
    rate: float = 0.0,
    sleep: Callable[[float], None] = time.sleep,
) -> AudioManifestEntry:
    """Synthesize ``text`` unless the cache already holds it; return its manifest entry.

    A cache hit issues no engine request. Engine rejections and exhausted
    retries are recorded as failed entries and then re-raised.
    """
    entry, _ = _synthesize(text, config, cache, engine, sample_id, rate, sleep, None)
    return entry


def _synthesize(
    text: str,
    config: EngineConfig,
    cache: ManifestStore,
    engine: Optional[Engine],
    sample_id: Optional[str],
    rate: float,
    sleep: Callable[[float], None],
    budget: Optional[_Budget],
) -> tuple[AudioManifestEntry, bool]:
    if not text.strip():
        raise EmptyTextError("cannot synthesize empty text")
    text = text[: config.max_input_chars]
    sid = sample_id if sample_id is not None else text_hash(text)[:16]
    digest = text_hash(text)
    key = cache_key(config.engine_id, config.model_name, config.voice, digest)

    with cache.key_lock(key):
        hit = cache.lookup(key)
        if hit is not None:
            if hit.sample_id == sid:
                return hit, True
            entry = _entry(sid, config, digest, text, file_path=hit.file_path, duration=hit.duration)
            cache.append(entry)
            return entry, True

        if budget is not None and not budget.reserve(len(text)):
            entry = _entry(sid, config, digest, text, status=BUDGET_ABORT, error="budget exhausted")
            cache.append(entry)
            return entry, False

        engine = engine or make_engine(config)
        try:
            data, duration = _postprocess(_call_with_retry(engine, text, sleep), config)
        except (TransportError, EngineRejected) as exc:
            if budget is not None:
                budget.refund(len(text))
            cache.append(_entry(sid, config, digest, text, status=FAILED, error=f"{type(exc).__name__}: {exc}"))
            raise
        rel = cache.write_audio(key, data)
        entry = _entry(
            sid, config, digest, text, file_path=rel, duration=duration, cost_estimate=len(text) * rate, status=OK
        )
        cache.append(entry)
        return entry, False


@dataclass
class SynthesisResult:
    entries: dict[str, AudioManifestEntry]
    new_requests: int = 0
    cache_hits: int = 0
    chars_synthesized: int = 0
    spend: float = 0.0
    failures: int = 0
    budget_aborts: int = 0

    @property
    def aborted(self) -> bool:
        return self.budget_aborts > 0

    def summary(self) -> str:
        return (
            f"{self.new_requests} new requests, {self.cache_hits} cache hits, "
            f"{self.chars_synthesized} characters synthesized, spend {self.spend:.4f}, "
            f"{self.failures} failures, {self.budget_aborts} budget aborts"
        )


def synthesize_corpus(
    items: Sequence[tuple[str, str]],
    config: EngineConfig,
    store: ManifestStore,
    *,
    rate: float,
    budget: Optional[float] = None,
    parallelism: int = 1,
    engine: Optional[Engine] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> SynthesisResult:
    """Synthesize ``(sample_id, text)`` pairs with at most ``parallelism`` requests in flight.

    Newly synthesized characters never cost more than ``budget``. Once a
    sample cannot be afforded, no further engine calls are made: remaining
    uncached samples get budget-abort records and :class:`BudgetExceeded` is
    raised carrying the partial result.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be positive")
    # rate 0 means synthesis is free, so the budget cannot bind
    max_chars = affordable_chars(max(budget, 0.0), rate) if budget is not None and rate > 0 else None
    ledger = _Budget(max_chars)
    engine = engine or make_engine(config)
    result = SynthesisResult(entries={})
    counter_lock = threading.Lock()

    def work(item: tuple[str, str]) -> None:
        sid, text = item
        try:
            entry, hit = _synthesize(text, config, store, engine, sid, rate, sleep, ledger)
        except (TransportError, EngineRejected):
            with counter_lock:
                result.failures += 1
                result.new_requests += 1
                result.entries[sid] = store.latest_by_sample()[sid]
            return
        with counter_lock:
            result.entries[sid] = entry
            if entry.status == BUDGET_ABORT:
                result.budget_aborts += 1
            elif hit:
                result.cache_hits += 1
            else:
                result.new_requests += 1
                result.chars_synthesized += entry.char_count
                result.spend += entry.cost_estimate

    if parallelism == 1:
        for item in items:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(work, items))

    if result.aborted:
        raise BudgetExceeded(result)
    return result

