from __future__ import annotations

import json
import os
import signal
import subprocess
import sys
import textwrap
import time
from pathlib import Path

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sadkit.audio import decode_wav
from sadkit.synthesis import (
    BudgetExceeded,
    CredentialsError,
    EmptyTextError,
    EngineConfig,
    EngineRejected,
    ManifestStore,
    RemoteEngine,
    ToneEngine,
    TransportError,
    estimate_cost,
    make_engine,
    read_manifest,
    synthesize_corpus,
    synthesize_one,
)
from sadkit.synthesis.manifest import BUDGET_ABORT, FAILED

from conftest import MockEngine

NO_SLEEP = lambda _s: None  # noqa: E731
LOCAL = EngineConfig(engine_id="local", model_name="mock", voice="v1")


def test_estimate_cost_examples():
    assert estimate_cost([], 0.3) == 0
    assert estimate_cost(["abcde", "fg"], 2) == 14
    assert estimate_cost(["x" * 1000] * 1000, 3e-5) == pytest.approx(1_000_000 * 3e-5, rel=1e-12)


def test_cache_hit_issues_no_request(tmp_path, local_config):
    store = ManifestStore(tmp_path / "m.jsonl")
    eng = MockEngine()
    first = synthesize_one("hello there", local_config, store, engine=eng, sample_id="a")
    again = synthesize_one("hello there", local_config, store, engine=eng, sample_id="a")
    assert eng.total == 1 and first == again
    w = decode_wav(store.resolve(first))
    assert w.sample_rate == local_config.target_sample_rate and w.duration > 0
    assert first.duration == pytest.approx(w.duration)


def test_empty_text_rejected_without_entry(tmp_path, local_config):
    store = ManifestStore(tmp_path / "m.jsonl")
    with pytest.raises(EmptyTextError):
        synthesize_one("   ", local_config, store, engine=MockEngine())
    assert read_manifest(tmp_path / "m.jsonl") == []


def test_retry_then_success_and_failure_records(tmp_path, local_config):
    store = ManifestStore(tmp_path / "m.jsonl")
    sleeps = []
    eng = MockEngine(fail_times=2)
    synthesize_one("flaky", local_config, store, engine=eng, sleep=sleeps.append)
    assert eng.calls["flaky"] == 3 and sleeps == [1.0, 2.0]

    dead = MockEngine(fail_times=99)
    with pytest.raises(TransportError):
        synthesize_one("dead", local_config, store, engine=dead, sleep=NO_SLEEP)
    assert dead.calls["dead"] == 3
    with pytest.raises(EngineRejected):
        synthesize_one("bad", local_config, store, engine=MockEngine(reject={"bad"}), sleep=NO_SLEEP)
    statuses = [e.status for e in read_manifest(tmp_path / "m.jsonl")]
    assert statuses == ["ok", FAILED, FAILED]


def test_budget_two_of_three(tmp_path, local_config):
    store = ManifestStore(tmp_path / "m.jsonl")
    items = [("a", "x" * 10), ("b", "y" * 10), ("c", "z" * 10)]
    with pytest.raises(BudgetExceeded) as info:
        synthesize_corpus(items, local_config, store, rate=1.0, budget=25.0, engine=MockEngine())
    res = info.value.result
    assert res.new_requests == 2 and res.budget_aborts == 1 and res.spend == 20.0
    assert sorted(e.status for e in res.entries.values()) == [BUDGET_ABORT, "ok", "ok"]


def test_cached_pass_costs_nothing(tmp_path, local_config):
    store = ManifestStore(tmp_path / "m.jsonl")
    items = [(f"s{i}", f"text number {i}") for i in range(5)]
    synthesize_corpus(items, local_config, store, rate=0.5, engine=MockEngine())
    eng = MockEngine()
    res = synthesize_corpus(items, local_config, ManifestStore(tmp_path / "m.jsonl"), rate=0.5, budget=0.01,
                            engine=eng)
    assert eng.total == 0 and res.spend == 0 and res.cache_hits == 5 and res.new_requests == 0


def test_shared_text_across_samples_is_one_request(tmp_path, local_config):
    store = ManifestStore(tmp_path / "m.jsonl")
    eng = MockEngine()
    res = synthesize_corpus([("a", "same"), ("b", "same")], local_config, store, rate=1.0, engine=eng)
    assert eng.total == 1 and res.cache_hits == 1
    assert set(store.audio_paths()) == {"a", "b"}


class ConcurrencyProbe(MockEngine):
    def __init__(self) -> None:
        super().__init__()
        self.in_flight = 0
        self.peak = 0

    def synthesize(self, text: str) -> bytes:
        with self.lock:
            self.in_flight += 1
            self.peak = max(self.peak, self.in_flight)
        try:
            time.sleep(0.002)
            return super().synthesize(text)
        finally:
            with self.lock:
                self.in_flight -= 1


def test_parallelism_bound(tmp_path, local_config):
    eng = ConcurrencyProbe()
    items = [(f"s{i}", f"utterance {i}") for i in range(100)]
    synthesize_corpus(items, local_config, ManifestStore(tmp_path / "m.jsonl"), rate=0.0, parallelism=4, engine=eng)
    assert 1 <= eng.peak <= 4 and eng.total == 100


@settings(max_examples=40, deadline=None)
@given(
    lengths=st.lists(st.integers(1, 60), min_size=1, max_size=12),
    budget=st.floats(0.5, 400.0),
    parallelism=st.integers(1, 4),
    dup=st.booleans(),
)
def test_budget_never_exceeded(tmp_path_factory, lengths, budget, parallelism, dup):
    root = tmp_path_factory.mktemp("b")
    texts = [chr(97 + i % 26) * n for i, n in enumerate(lengths)]
    if dup:
        texts = texts + texts[:2]
    items = [(f"s{i}", t) for i, t in enumerate(texts)]
    eng = MockEngine()
    try:
        res = synthesize_corpus(items, LOCAL, ManifestStore(root / "m.jsonl"), rate=1.0, budget=budget,
                                engine=eng, parallelism=parallelism)
    except BudgetExceeded as exc:
        res = exc.result
    assert res.spend <= budget * (1 + 1e-9)
    assert sum(len(t) for t in eng.calls) <= budget * (1 + 1e-9)
    assert all(n == 1 for n in eng.calls.values())


def test_remote_engine_requires_credentials(monkeypatch):
    monkeypatch.delenv("SADKIT_TEST_KEY", raising=False)
    cfg = EngineConfig(engine_id="remote_api", model_name="tts-1-hd", voice="alloy", api_key_env="SADKIT_TEST_KEY")

    def explode(request):  # any network attempt fails the test
        raise AssertionError("network call attempted")

    with pytest.raises(CredentialsError):
        make_engine(cfg, client=httpx.Client(transport=httpx.MockTransport(explode)))


def _remote(monkeypatch, handler, **kw):
    monkeypatch.setenv("SADKIT_TEST_KEY", "sk-test")
    cfg = EngineConfig(engine_id="remote_api", model_name="tts-1-hd", voice="alloy",
                       api_key_env="SADKIT_TEST_KEY", **kw)
    return cfg, RemoteEngine(cfg, client=httpx.Client(transport=httpx.MockTransport(handler)))


def test_remote_engine_request_and_status_mapping(monkeypatch, tmp_path):
    seen = []
    pcm = (np.sin(np.arange(2400) / 5) * 10000).astype("<i2").tobytes()

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append((request.url.path, json.loads(request.content), request.headers["authorization"]))
        return httpx.Response(200, content=pcm)

    cfg, eng = _remote(monkeypatch, handler, output_format="pcm")
    entry = synthesize_one("Hello.", cfg, ManifestStore(tmp_path / "m.jsonl"), engine=eng)
    assert seen == [("/v1/audio/speech", {"model": "tts-1-hd", "voice": "alloy", "input": "Hello.",
                                          "response_format": "pcm"}, "Bearer sk-test")]
    assert entry.duration == pytest.approx(0.1, abs=1e-3)

    for code, exc in ((429, TransportError), (503, TransportError), (400, EngineRejected)):
        _, eng = _remote(monkeypatch, lambda r, c=code: httpx.Response(c, text="nope"))
        with pytest.raises(exc):
            eng.synthesize("x")


def test_tone_engine_is_deterministic_and_voice_dependent(local_config):
    a = ToneEngine(EngineConfig(engine_id="local", model_name="builtin:tone", voice="a"))
    b = ToneEngine(EngineConfig(engine_id="local", model_name="builtin:tone", voice="b"))
    assert a.synthesize("hi there") == a.synthesize("hi there")
    assert a.synthesize("hi there") != b.synthesize("hi there")


def test_command_engine(tmp_path):
    script = tmp_path / "tts.py"
    script.write_text(textwrap.dedent("""
        import sys, numpy as np
        from scipy.io import wavfile
        text, out = sys.argv[1], sys.argv[2]
        wavfile.write(out, 8000, (np.ones(80 * len(text)) * 0.1).astype(np.float32))
    """))
    cfg = EngineConfig(engine_id="local", model_name="m", voice="v",
                       command=[sys.executable, str(script), "{text}", "{output}"])
    entry = synthesize_one("four", cfg, ManifestStore(tmp_path / "m.jsonl"))
    assert entry.duration == pytest.approx(0.04)
    bad = EngineConfig(engine_id="local", model_name="m", voice="v", command=[sys.executable, "-c", "raise SystemExit(3)"])
    with pytest.raises(EngineRejected):
        synthesize_one("four", bad, ManifestStore(tmp_path / "n.jsonl"))


# --- crash safety ---------------------------------------------------------------------

def test_store_repairs_partial_state(tmp_path, local_config):
    path = tmp_path / "m.jsonl"
    store = ManifestStore(path)
    synthesize_corpus([("a", "one"), ("b", "two")], local_config, store, rate=0.0, engine=MockEngine())
    victim = store.resolve(store.latest_by_sample()["b"])
    victim.unlink()
    (store.audio_dir / "zz").mkdir()
    (store.audio_dir / "zz" / "half.wav.1.tmp").write_bytes(b"RIFF")
    with open(path, "a") as fh:
        fh.write('{"sample_id": "c", "engine')
    repaired = ManifestStore(path)
    assert set(repaired.audio_paths()) == {"a"}
    assert [e.sample_id for e in repaired.dropped] == ["b"]
    assert not list(repaired.audio_dir.glob("**/*.tmp"))
    assert path.read_bytes().endswith(b"\n")
    eng = MockEngine()
    synthesize_corpus([("a", "one"), ("b", "two")], local_config, repaired, rate=0.0, engine=eng)
    assert eng.calls == {"two": 1}


KILL_SCRIPT = """
import sys, time
sys.path.insert(0, {tests!r})
from conftest import MockEngine
from sadkit.synthesis import EngineConfig, ManifestStore, synthesize_corpus

class Slow(MockEngine):
    def synthesize(self, text):
        time.sleep(0.05)
        return super().synthesize(text)

cfg = EngineConfig(engine_id="local", model_name="mock", voice="v1")
items = [("s%d" % i, "utterance %d" % i) for i in range(200)]
synthesize_corpus(items, cfg, ManifestStore({path!r}), rate=0.0, parallelism=4, engine=Slow())
"""


def test_kill_and_resume(tmp_path, local_config):
    path = tmp_path / "m.jsonl"
    script = KILL_SCRIPT.format(tests=str(Path(__file__).parent), path=str(path))
    proc = subprocess.Popen([sys.executable, "-c", script])
    deadline = time.time() + 60
    while time.time() < deadline and (not path.exists() or path.read_text().count("\n") < 10):
        time.sleep(0.05)
    os.kill(proc.pid, signal.SIGKILL)
    proc.wait()

    store = ManifestStore(path)
    done = store.audio_paths()
    assert 10 <= len(done) < 200
    for entry in store.entries:  # no dangling entries
        assert not entry.ok or decode_wav(store.resolve(entry)).duration > 0
    assert not list(store.audio_dir.glob("**/*.tmp"))

    eng = MockEngine()
    items = [(f"s{i}", f"utterance {i}") for i in range(200)]
    res = synthesize_corpus(items, local_config, store, rate=0.0, engine=eng)
    assert eng.total == 200 - len(done) and res.cache_hits == len(done)
    assert len(ManifestStore(path).audio_paths()) == 200
