from __future__ import annotations

import csv
import json
import threading
from pathlib import Path

import numpy as np
import pytest

from sadkit.audio import Waveform, encode_wav
from sadkit.synthesis import EngineConfig

WORDS = "the a well really i think so maybe not sure good bad yes no okay right".split()


def write_tone(path: Path, seconds: float, amplitude: float = 0.3, freq: float = 220.0, rate: int = 16000) -> str:
    t = np.arange(int(seconds * rate)) / rate
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_wav(Waveform((amplitude * np.sin(2 * np.pi * freq * t)).astype(np.float32), rate)))
    return str(path)


def make_swbd(root: Path, n: int = 12, seed: int = 0, audio: bool = True) -> Path:
    """Tiny SWBD-S style corpus: three annotator votes per row, optional gold audio."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "swbd_sentiment.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "text", "sentiment_1", "sentiment_2", "sentiment_3", "audio_path"])
        for i in range(n):
            text = " ".join(rng.choice(WORDS, size=int(rng.integers(3, 8))))
            votes = rng.integers(-1, 2, size=3)
            rel = f"wav/u{i}.wav"
            if audio:
                write_tone(root / rel, 0.25 + 0.05 * i, amplitude=0.1 + 0.02 * i)
            w.writerow([f"u{i}", text, *votes, rel if audio else ""])
    return root


def make_boolq(root: Path, n_train: int = 6, n_val: int = 4, seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    for fname, n in (("train", n_train), ("val", n_val)):
        with open(root / f"{fname}.jsonl", "w", encoding="utf-8") as fh:
            for i in range(n):
                rec = {
                    "idx": i,
                    "passage": " ".join(rng.choice(WORDS, size=6)),
                    "question": " ".join(rng.choice(WORDS, size=3)),
                    "label": bool(i % 2),
                }
                fh.write(json.dumps(rec) + "\n")
    return root


class MockEngine:
    """Counts calls per text; optional scripted failures."""

    def __init__(self, fail_times: int = 0, reject: set[str] | None = None, seconds: float = 0.2) -> None:
        self.calls: dict[str, int] = {}
        self.fail_times = fail_times
        self.reject = reject or set()
        self.seconds = seconds
        self.lock = threading.Lock()

    @property
    def total(self) -> int:
        return sum(self.calls.values())

    def synthesize(self, text: str) -> bytes:
        from sadkit.synthesis import EngineRejected, TransportError

        with self.lock:
            self.calls[text] = self.calls.get(text, 0) + 1
            n = self.calls[text]
        if text in self.reject:
            raise EngineRejected("content policy")
        if n <= self.fail_times:
            raise TransportError("503")
        rate = 24000
        t = np.arange(int(self.seconds * rate)) / rate
        amp = 0.1 + (len(text) % 7) / 20
        return encode_wav(Waveform((amp * np.sin(2 * np.pi * 330 * t)).astype(np.float32), rate))


@pytest.fixture
def local_config() -> EngineConfig:
    return EngineConfig(engine_id="local", model_name="mock", voice="v1")


@pytest.fixture
def swbd_dir(tmp_path: Path) -> Path:
    return make_swbd(tmp_path / "swbd")


@pytest.fixture
def boolq_dir(tmp_path: Path) -> Path:
    return make_boolq(tmp_path / "boolq")


# --- acceptance summary: one PASS/FAIL line per criterion ----------------------------

_CRITERIA: dict[str, list[str]] = {}


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "criterion(name): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ok = report.outcome == "passed" and not hasattr(report, "wasxfail")
        _CRITERIA.setdefault(name, []).append("pass" if ok else "fail")


def pytest_terminal_summary(terminalreporter) -> None:
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, results in _CRITERIA.items():
        status = "PASS" if all(r == "pass" for r in results) else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
